#include "aim/solver.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

namespace aim {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Eigen::Index;

// Internal conic form:
//   min 1/2 x'Px + q'x   s.t.  A x = b,   G x + s = h,   s in K
// K = R+^l  x  SOC(d_1) x ... x SOC(d_nc)   (all plain second-order cones;
// public rotated cones are mapped through the orthogonal transform
// T = [[1/r2, 1/r2, 0],[1/r2, -1/r2, 0],[0, 0, I]], T = T^-1).
struct Internal {
    int n = 0, p = 0, m = 0, l = 0;
    std::vector<int> soc_dims;
    SpMat P, A, G;
    Vec q, b, h;
    // row offset of each public cone block inside G (after the l orthant rows)
    std::vector<int> cone_row0;
};

constexpr double kInvSqrt2 = 0.70710678118654752440;

Internal build_internal(const ConicProgram& prog) {
    Internal w;
    w.n = prog.num_vars;
    w.p = prog.num_eq();
    w.l = prog.num_ineq();
    int m = w.l;
    for (const auto& c : prog.cones) m += static_cast<int>(c.vars.size());
    w.m = m;

    std::vector<Eigen::Triplet<double>> tp, ta, tg;
    tp.reserve(prog.P.size());
    for (const auto& t : prog.P) tp.emplace_back(t.row, t.col, t.value);
    ta.reserve(prog.A.size());
    for (const auto& t : prog.A) ta.emplace_back(t.row, t.col, t.value);
    tg.reserve(prog.G.size() + 3 * prog.cones.size());
    for (const auto& t : prog.G) tg.emplace_back(t.row, t.col, t.value);

    int row = w.l;
    for (const auto& c : prog.cones) {
        w.cone_row0.push_back(row);
        int d = static_cast<int>(c.vars.size());
        if (c.kind == ConeKind::RotatedSecondOrder) {
            // s = T x_B  =>  G rows are -T restricted to the block columns
            tg.emplace_back(row, c.vars[0], -kInvSqrt2);
            tg.emplace_back(row, c.vars[1], -kInvSqrt2);
            tg.emplace_back(row + 1, c.vars[0], -kInvSqrt2);
            tg.emplace_back(row + 1, c.vars[1], kInvSqrt2);
            for (int j = 2; j < d; ++j) tg.emplace_back(row + j, c.vars[j], -1.0);
        } else {
            for (int j = 0; j < d; ++j) tg.emplace_back(row + j, c.vars[j], -1.0);
        }
        w.soc_dims.push_back(d);
        row += d;
    }

    w.P.resize(w.n, w.n);
    w.P.setFromTriplets(tp.begin(), tp.end());
    w.A.resize(w.p, w.n);
    w.A.setFromTriplets(ta.begin(), ta.end());
    w.G.resize(w.m, w.n);
    w.G.setFromTriplets(tg.begin(), tg.end());
    w.q = Eigen::Map<const Vec>(prog.q.data(), w.n);
    w.b = w.p ? Eigen::Map<const Vec>(prog.b.data(), w.p) : Vec(0);
    w.h = Vec::Zero(w.m);
    for (int i = 0; i < w.l; ++i) w.h[i] = prog.h[static_cast<size_t>(i)];
    return w;
}

struct Scaling {
    Vec d, e, f;       // columns, eq rows, cone rows
    double cost = 1.0;
};

// Ruiz equilibration; cone-block rows share one factor so membership is
// preserved under scaling.
Scaling equilibrate(Internal& w, int iters) {
    Scaling sc;
    sc.d = Vec::Ones(w.n);
    sc.e = Vec::Ones(w.p);
    sc.f = Vec::Ones(w.m);
    Vec cn(w.n), ra(w.p), rg(w.m);
    for (int it = 0; it < iters; ++it) {
        cn.setZero();
        ra.setZero();
        rg.setZero();
        for (int k = 0; k < w.P.outerSize(); ++k)
            for (SpMat::InnerIterator i(w.P, k); i; ++i)
                cn[i.col()] = std::max(cn[i.col()], std::abs(i.value()));
        for (int k = 0; k < w.A.outerSize(); ++k)
            for (SpMat::InnerIterator i(w.A, k); i; ++i) {
                cn[i.col()] = std::max(cn[i.col()], std::abs(i.value()));
                ra[i.row()] = std::max(ra[i.row()], std::abs(i.value()));
            }
        for (int k = 0; k < w.G.outerSize(); ++k)
            for (SpMat::InnerIterator i(w.G, k); i; ++i) {
                cn[i.col()] = std::max(cn[i.col()], std::abs(i.value()));
                rg[i.row()] = std::max(rg[i.row()], std::abs(i.value()));
            }
        // uniform factor inside each SOC block
        int r = w.l;
        for (int d : w.soc_dims) {
            double mx = 0.0;
            for (int j = 0; j < d; ++j) mx = std::max(mx, rg[r + j]);
            for (int j = 0; j < d; ++j) rg[r + j] = mx;
            r += d;
        }
        auto inv_sqrt = [](double v) { return v > 1e-12 ? 1.0 / std::sqrt(v) : 1.0; };
        Vec dc = cn.unaryExpr(inv_sqrt), de = ra.unaryExpr(inv_sqrt), df = rg.unaryExpr(inv_sqrt);
        sc.d.array() *= dc.array();
        sc.e.array() *= de.array();
        sc.f.array() *= df.array();
        w.P = dc.asDiagonal() * w.P * dc.asDiagonal();
        w.A = de.asDiagonal() * w.A * dc.asDiagonal();
        w.G = df.asDiagonal() * w.G * dc.asDiagonal();
    }
    w.q = sc.d.asDiagonal() * w.q;
    w.b = sc.e.asDiagonal() * w.b;
    w.h = sc.f.asDiagonal() * w.h;
    sc.cost = 1.0 / std::max(1.0, w.q.lpNorm<Eigen::Infinity>());
    w.q *= sc.cost;
    w.P *= sc.cost;
    return sc;
}

// --- cone utilities (on the internal K = orthant x SOCs) -------------------

struct ConeLayout {
    int l = 0;
    std::vector<int> dims;  // SOC dims, offsets follow l
    int degree() const { return l + static_cast<int>(dims.size()); }
};

bool in_cone(const ConeLayout& K, const Vec& u, double margin) {
    for (int i = 0; i < K.l; ++i)
        if (u[i] < margin) return false;
    int r = K.l;
    for (int d : K.dims) {
        double nn = u.segment(r + 1, d - 1).norm();
        if (u[r] - nn < margin) return false;
        r += d;
    }
    return true;
}

bool strictly_interior(const ConeLayout& K, const Vec& u) {
    for (int i = 0; i < K.l; ++i)
        if (!(u[i] > 0.0)) return false;
    int r = K.l;
    for (int d : K.dims) {
        double nn = u.segment(r + 1, d - 1).norm();
        if (!(u[r] > 0.0) || !(u[r] - nn > 0.0)) return false;
        r += d;
    }
    return true;
}

// Shift a vector into the cone interior (used only for initialization).
void bring_to_cone(const ConeLayout& K, Vec& u) {
    double worst = 0.0;
    for (int i = 0; i < K.l; ++i) worst = std::max(worst, -u[i]);
    int r = K.l;
    for (int d : K.dims) {
        worst = std::max(worst, u.segment(r + 1, d - 1).norm() - u[r]);
        r += d;
    }
    if (worst <= 0.0 && in_cone(K, u, 1e-8)) return;
    double a = worst + 1.0;
    for (int i = 0; i < K.l; ++i) u[i] += a;
    r = K.l;
    for (int d : K.dims) {
        u[r] += a;
        r += d;
    }
}

// Max step alpha so that u + alpha*du stays in K (u strictly inside).
double max_step(const ConeLayout& K, const Vec& u, const Vec& du) {
    double alpha = std::numeric_limits<double>::infinity();
    for (int i = 0; i < K.l; ++i)
        if (du[i] < 0.0) alpha = std::min(alpha, -u[i] / du[i]);
    int r = K.l;
    for (int d : K.dims) {
        double u0 = u[r], d0 = du[r];
        auto u1 = u.segment(r + 1, d - 1);
        auto d1 = du.segment(r + 1, d - 1);
        double a = d0 * d0 - d1.squaredNorm();
        double bq = 2.0 * (u0 * d0 - u1.dot(d1));
        double c = u0 * u0 - u1.squaredNorm();
        c = std::max(c, 0.0);
        std::vector<double> cand;
        if (std::abs(a) > 1e-300) {
            double disc = bq * bq - 4.0 * a * c;
            if (disc >= 0.0) {
                double sd = std::sqrt(disc);
                cand.push_back((-bq - sd) / (2.0 * a));
                cand.push_back((-bq + sd) / (2.0 * a));
            }
        } else if (bq < 0.0) {
            cand.push_back(-c / bq);
        }
        if (d0 < 0.0) cand.push_back(-u0 / d0);
        double best = std::numeric_limits<double>::infinity();
        for (double t : cand) {
            if (t <= 0.0) continue;
            // crossing out of the cone just past t?
            double tt = t * (1.0 + 1e-9) + 1e-14;
            double v0 = u0 + tt * d0;
            double vn = (u1 + tt * d1).norm();
            if (v0 < 0.0 || v0 * v0 - vn * vn < 0.0) best = std::min(best, t);
        }
        alpha = std::min(alpha, best);
        r += d;
    }
    return alpha;
}

// Jordan product u o v.
void cone_product(const ConeLayout& K, const Vec& u, const Vec& v, Vec& out) {
    for (int i = 0; i < K.l; ++i) out[i] = u[i] * v[i];
    int r = K.l;
    for (int d : K.dims) {
        auto u1 = u.segment(r + 1, d - 1);
        auto v1 = v.segment(r + 1, d - 1);
        out[r] = u.segment(r, d).dot(v.segment(r, d));
        out.segment(r + 1, d - 1) = u[r] * v1 + v[r] * u1;
        r += d;
    }
}

// Jordan division lambda \ v  (solve lambda o x = v).
void cone_divide(const ConeLayout& K, const Vec& lam, const Vec& v, Vec& out) {
    for (int i = 0; i < K.l; ++i) out[i] = v[i] / lam[i];
    int r = K.l;
    for (int d : K.dims) {
        double l0 = lam[r];
        auto l1 = lam.segment(r + 1, d - 1);
        double det = l0 * l0 - l1.squaredNorm();
        double x0 = (l0 * v[r] - l1.dot(v.segment(r + 1, d - 1))) / det;
        out[r] = x0;
        out.segment(r + 1, d - 1) = (v.segment(r + 1, d - 1) - x0 * l1) / l0;
        r += d;
    }
}

Vec cone_identity(const ConeLayout& K, int m) {
    Vec e = Vec::Zero(m);
    for (int i = 0; i < K.l; ++i) e[i] = 1.0;
    int r = K.l;
    for (int d : K.dims) {
        e[r] = 1.0;
        r += d;
    }
    return e;
}

// Nesterov-Todd scaling. Orthant part stores w_i = sqrt(s/z); each SOC block
// stores the dense symmetric W (and W^2) since horizon cones are small.
struct NTScaling {
    Vec wo;  // orthant: W diagonal
    std::vector<Eigen::MatrixXd> Wblk, W2blk;
    Vec lambda;  // lambda = W z = W^{-1} s

    void identity(const ConeLayout& K, int m) {
        wo = Vec::Ones(K.l);
        Wblk.clear();
        W2blk.clear();
        for (int d : K.dims) {
            Wblk.push_back(Eigen::MatrixXd::Identity(d, d));
            W2blk.push_back(Eigen::MatrixXd::Identity(d, d));
        }
        lambda = Vec::Zero(m);
    }

    bool update(const ConeLayout& K, const Vec& s, const Vec& z) {
        const int m = static_cast<int>(s.size());
        wo.resize(K.l);
        lambda.resize(m);
        for (int i = 0; i < K.l; ++i) {
            if (s[i] <= 0.0 || z[i] <= 0.0) return false;
            wo[i] = std::sqrt(s[i] / z[i]);
            lambda[i] = std::sqrt(s[i] * z[i]);
        }
        Wblk.assign(K.dims.size(), {});
        W2blk.assign(K.dims.size(), {});
        int r = K.l;
        for (size_t kblk = 0; kblk < K.dims.size(); ++kblk) {
            int d = K.dims[kblk];
            auto sb = s.segment(r, d);
            auto zb = z.segment(r, d);
            // factored form avoids catastrophic cancellation near the boundary
            double sn = sb.tail(d - 1).norm(), zn = zb.tail(d - 1).norm();
            double sres = (sb[0] - sn) * (sb[0] + sn);
            double zres = (zb[0] - zn) * (zb[0] + zn);
            if (sb[0] - sn <= 0.0 || zb[0] - zn <= 0.0 || sb[0] <= 0.0 || zb[0] <= 0.0)
                return false;
            Vec sbar = sb / std::sqrt(sres);
            Vec zbar = zb / std::sqrt(zres);
            double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
            Vec wbar(d);
            wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            wbar.tail(d - 1) = (sbar.tail(d - 1) - zbar.tail(d - 1)) / (2.0 * gamma);
            double eta = std::pow(sres / zres, 0.25);
            Eigen::MatrixXd W(d, d);
            W(0, 0) = wbar[0];
            for (int j = 1; j < d; ++j) {
                W(0, j) = wbar[j];
                W(j, 0) = wbar[j];
            }
            auto w1 = wbar.tail(d - 1);
            W.block(1, 1, d - 1, d - 1) =
                Eigen::MatrixXd::Identity(d - 1, d - 1) + w1 * w1.transpose() / (1.0 + wbar[0]);
            W *= eta;
            Wblk[kblk] = W;
            W2blk[kblk] = W * W;
            lambda.segment(r, d) = W * zb;
            r += d;
        }
        return true;
    }

    // out = W * v
    void mul(const ConeLayout& K, const Vec& v, Vec& out) const {
        out.resize(v.size());
        for (int i = 0; i < K.l; ++i) out[i] = wo[i] * v[i];
        int r = K.l;
        for (size_t kblk = 0; kblk < K.dims.size(); ++kblk) {
            int d = K.dims[kblk];
            out.segment(r, d) = Wblk[kblk] * v.segment(r, d);
            r += d;
        }
    }

    // out = W^{-1} * v  (W(wbar)^{-1} = W(J wbar)/eta; use dense solve instead,
    // blocks are tiny)
    void solve(const ConeLayout& K, const Vec& v, Vec& out) const {
        out.resize(v.size());
        for (int i = 0; i < K.l; ++i) out[i] = v[i] / wo[i];
        int r = K.l;
        for (size_t kblk = 0; kblk < K.dims.size(); ++kblk) {
            int d = K.dims[kblk];
            out.segment(r, d) = Wblk[kblk].ldlt().solve(v.segment(r, d));
            r += d;
        }
    }
};

struct KktSystem {
    int n, p, m;
    SpMat K;             // assembled with static regularization
    Vec reg;             // +delta on x, -delta on y/z
    Eigen::SimplicialLDLT<SpMat> ldlt;
    bool analyzed = false;

    // positions of mutable W^2 entries inside a triplet list
    std::vector<Eigen::Triplet<double>> trips;
    std::vector<size_t> w_entries;  // indices into trips for the z-block

    void assemble_pattern(const Internal& w, double delta) {
        n = w.n;
        p = w.p;
        m = w.m;
        trips.clear();
        w_entries.clear();
        for (int k = 0; k < w.P.outerSize(); ++k)
            for (SpMat::InnerIterator i(w.P, k); i; ++i)
                trips.emplace_back(i.row(), i.col(), i.value());
        for (int i = 0; i < n; ++i) trips.emplace_back(i, i, delta);
        for (int k = 0; k < w.A.outerSize(); ++k)
            for (SpMat::InnerIterator i(w.A, k); i; ++i) {
                trips.emplace_back(n + i.row(), i.col(), i.value());
                trips.emplace_back(i.col(), n + i.row(), i.value());
            }
        for (int i = 0; i < p; ++i) trips.emplace_back(n + i, n + i, -delta);
        for (int k = 0; k < w.G.outerSize(); ++k)
            for (SpMat::InnerIterator i(w.G, k); i; ++i) {
                trips.emplace_back(n + p + i.row(), i.col(), i.value());
                trips.emplace_back(i.col(), n + p + i.row(), i.value());
            }
        // -(W^2 + delta I): orthant diagonal then dense SOC blocks
        int l = w.l;
        for (int i = 0; i < l; ++i) {
            w_entries.push_back(trips.size());
            trips.emplace_back(n + p + i, n + p + i, -1.0 - delta);
        }
        int r = l;
        for (int d : w.soc_dims) {
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    w_entries.push_back(trips.size());
                    trips.emplace_back(n + p + r + i, n + p + r + j,
                                       (i == j) ? -1.0 - delta : 0.0);
                }
            r += d;
        }
        reg = Vec::Zero(n + p + m);
        reg.head(n).setConstant(delta);
        reg.segment(n, p).setConstant(-delta);
        reg.tail(m).setConstant(-delta);
        K.resize(n + p + m, n + p + m);
    }

    void set_scaling(const Internal& w, const NTScaling& nt, double delta) {
        size_t idx = 0;
        for (int i = 0; i < w.l; ++i)
            trips[w_entries[idx++]] =
                Eigen::Triplet<double>(n + p + i, n + p + i, -nt.wo[i] * nt.wo[i] - delta);
        int r = w.l;
        for (size_t kblk = 0; kblk < w.soc_dims.size(); ++kblk) {
            int d = w.soc_dims[kblk];
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    double v = -nt.W2blk[kblk](i, j) - (i == j ? delta : 0.0);
                    trips[w_entries[idx++]] =
                        Eigen::Triplet<double>(n + p + r + i, n + p + r + j, v);
                }
            r += d;
        }
    }

    bool factorize() {
        K.setFromTriplets(trips.begin(), trips.end());
        if (!analyzed) {
            ldlt.analyzePattern(K);
            analyzed = true;
        }
        ldlt.factorize(K);
        return ldlt.info() == Eigen::Success;
    }

    // Solve with iterative refinement against the unregularized matrix.
    Vec solve(const Vec& rhs, int refine) const {
        Vec x = ldlt.solve(rhs);
        for (int it = 0; it < refine; ++it) {
            Vec r = rhs - K * x + reg.cwiseProduct(x);
            if (r.lpNorm<Eigen::Infinity>() < 1e-13 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
                break;
            x += ldlt.solve(r);
        }
        return x;
    }
};

struct Residuals {
    double pres = 0.0, dres = 0.0, gap = 0.0, relgap = 0.0, pcost = 0.0;
};

}  // namespace

Solution solve(const ConicProgram& prog, const SolverSettings& st) {
    prog.validate();
    Solution sol;

    Internal w = build_internal(prog);
    // keep unscaled internal copies for true residuals / certificates
    const SpMat P0 = w.P, A0 = w.A, G0 = w.G;
    const Vec q0 = w.q, b0 = w.b, h0 = w.h;

    Scaling sc = equilibrate(w, st.ruiz_iterations);

    ConeLayout K;
    K.l = w.l;
    K.dims = w.soc_dims;
    const int n = w.n, p = w.p, m = w.m;
    const double nb = 1.0 + b0.lpNorm<Eigen::Infinity>();
    const double nh = 1.0 + h0.lpNorm<Eigen::Infinity>();
    const double nq = 1.0 + q0.lpNorm<Eigen::Infinity>();

    auto unscale_x = [&](const Vec& xs) { return Vec(sc.d.asDiagonal() * xs); };

    // ------- no-inequality special case: one Newton/KKT solve -------
    if (m == 0) {
        KktSystem kkt;
        kkt.assemble_pattern(w, st.static_reg);
        if (!kkt.factorize()) {
            sol.status = SolveStatus::NumericalError;
            sol.message = "KKT factorization failed";
            return sol;
        }
        Vec rhs(n + p);
        rhs.head(n) = -w.q;
        rhs.segment(n, p) = w.b;
        Vec d = kkt.solve(rhs, st.refine_iterations);
        Vec x = unscale_x(d.head(n));
        Vec y = (sc.e.asDiagonal() * d.segment(n, p)) / sc.cost;
        Vec rd = q0 + P0 * x + A0.transpose() * y;
        Vec rp = A0 * x - b0;
        sol.status = (rd.lpNorm<Eigen::Infinity>() / nq < 1e-6 &&
                      (p == 0 || rp.lpNorm<Eigen::Infinity>() / nb < 1e-6))
                         ? SolveStatus::Optimal
                         : SolveStatus::NumericalError;
        sol.x.assign(x.data(), x.data() + n);
        sol.y.assign(y.data(), y.data() + p);
        sol.objective = 0.5 * x.dot(P0 * x) + q0.dot(x);
        sol.dual_residual = rd.lpNorm<Eigen::Infinity>() / nq;
        sol.primal_residual = p ? rp.lpNorm<Eigen::Infinity>() / nb : 0.0;
        sol.iterations = 1;
        return sol;
    }

    KktSystem kkt;
    kkt.assemble_pattern(w, st.static_reg);
    NTScaling nt;
    nt.identity(K, m);
    kkt.set_scaling(w, nt, st.static_reg);
    double delta = st.static_reg;
    for (int attempt = 0; attempt < 3 && !kkt.factorize(); ++attempt) {
        delta *= 100.0;
        kkt.assemble_pattern(w, delta);
        kkt.set_scaling(w, nt, delta);
    }

    // ---- initialization (two solves with W = I) ----
    Vec xs(n), ys(p), zs(m), ss(m);
    {
        Vec rhs = Vec::Zero(n + p + m);
        rhs.segment(n, p) = w.b;
        rhs.tail(m) = w.h;
        Vec d1 = kkt.solve(rhs, st.refine_iterations);
        xs = d1.head(n);
        ss = -d1.tail(m);
        bring_to_cone(K, ss);
        rhs.setZero();
        rhs.head(n) = -w.q;
        Vec d2 = kkt.solve(rhs, st.refine_iterations);
        ys = d2.segment(n, p);
        zs = d2.tail(m);
        bring_to_cone(K, zs);
    }

    const int degree = K.degree();
    const double step_damp = 0.99;
    double best_metric = std::numeric_limits<double>::infinity();
    Vec bx = xs, by = ys, bz = zs, bs = ss;
    Residuals best_res;
    int best_iter = 0;

    Vec rx(n), ry(p), rz(m);
    Vec lam2(m), corr(m), dtil(m), rhs(n + p + m);
    Vec dz_a(m), ds_a(m), wi_ds(m), w_dz(m);

    auto compute_true_residuals = [&](const Vec& x, const Vec& y, const Vec& z, const Vec& s,
                                      Residuals& R) {
        Vec px = P0 * x;
        Vec gtz = G0.transpose() * z;
        Vec rd = q0 + px + gtz;
        double dscale = std::max({nq, px.lpNorm<Eigen::Infinity>(), gtz.lpNorm<Eigen::Infinity>()});
        if (p) {
            Vec aty = A0.transpose() * y;
            rd += aty;
            dscale = std::max(dscale, aty.lpNorm<Eigen::Infinity>());
        }
        R.dres = rd.lpNorm<Eigen::Infinity>() / dscale;
        double pe = 0.0;
        if (p) {
            Vec ax = A0 * x;
            pe = (ax - b0).lpNorm<Eigen::Infinity>() /
                 std::max(nb, ax.lpNorm<Eigen::Infinity>());
        }
        Vec gx = G0 * x;
        Vec rp_in = gx + s - h0;
        double iscale = std::max({nh, gx.lpNorm<Eigen::Infinity>(), s.lpNorm<Eigen::Infinity>()});
        R.pres = std::max(pe, rp_in.lpNorm<Eigen::Infinity>() / iscale);
        R.gap = s.dot(z);
        R.pcost = 0.5 * x.dot(px) + q0.dot(x);
        R.relgap = R.gap / (1.0 + std::abs(R.pcost));
    };

    int iter = 0;
    for (; iter < st.max_iterations; ++iter) {
        // true residuals on original data
        Vec x = unscale_x(xs);
        Vec y = (sc.e.asDiagonal() * ys) / sc.cost;
        Vec z = (sc.f.asDiagonal() * zs) / sc.cost;
        Vec s = ss.cwiseQuotient(sc.f);
        Residuals R;
        compute_true_residuals(x, y, z, s, R);

        double metric = std::max({R.pres, R.dres, R.relgap});
        if (metric < best_metric) {
            best_metric = metric;
            bx = x;
            by = y;
            bz = z;
            bs = s;
            best_res = R;
            best_iter = iter;
        }
        if (st.verbose)
            std::fprintf(stderr, "it %3d pres %.3e dres %.3e gap %.3e pcost %+.9e\n", iter,
                         R.pres, R.dres, R.relgap, R.pcost);

        if (R.pres <= st.feas_tol && R.dres <= st.feas_tol &&
            (R.relgap <= st.gap_tol || R.gap <= st.abs_gap_tol)) {
            sol.status = SolveStatus::Optimal;
            break;
        }

        // infeasibility certificates on original internal data
        double by_hz = (p ? b0.dot(y) : 0.0) + h0.dot(z);
        if (by_hz < -1e-10) {
            Vec aty = G0.transpose() * z;
            if (p) aty += A0.transpose() * y;
            // cone membership of z is invariant under the per-block positive scaling
            if (aty.lpNorm<Eigen::Infinity>() / (-by_hz) <= st.feas_tol * 1e2 &&
                in_cone(K, zs, -1e-12)) {
                sol.status = SolveStatus::PrimalInfeasible;
                sol.message = "Farkas certificate: A'y + G'z ~ 0, b'y + h'z < 0";
                break;
            }
        }
        double qx = q0.dot(x);
        if (qx < -1e-10) {
            Vec px = P0 * x;
            Vec ax = p ? Vec(A0 * x) : Vec(0);
            Vec gx = -(G0 * x);
            double res = px.lpNorm<Eigen::Infinity>();
            if (p) res = std::max(res, ax.lpNorm<Eigen::Infinity>());
            double cone_dist = 0.0;
            for (int i = 0; i < K.l; ++i) cone_dist = std::max(cone_dist, -gx[i]);
            int r = K.l;
            for (int d : K.dims) {
                cone_dist = std::max(cone_dist, gx.segment(r + 1, d - 1).norm() - gx[r]);
                r += d;
            }
            if (std::max(res, cone_dist) / (-qx) <= st.feas_tol * 1e2) {
                sol.status = SolveStatus::DualInfeasible;
                sol.message = "unboundedness certificate: Px ~ 0, Ax ~ 0, -Gx in K, q'x < 0";
                break;
            }
        }

        // NT scaling and KKT refresh
        if (!nt.update(K, ss, zs)) {
            sol.status = SolveStatus::NumericalError;
            sol.message = "iterate left the cone interior";
            break;
        }
        kkt.set_scaling(w, nt, delta);
        if (!kkt.factorize()) {
            delta *= 100.0;
            kkt.assemble_pattern(w, delta);
            kkt.set_scaling(w, nt, delta);
            if (!kkt.factorize()) {
                sol.status = SolveStatus::NumericalError;
                sol.message = "KKT factorization failed";
                break;
            }
        }

        double mu = ss.dot(zs) / degree;

        // scaled residuals for the Newton RHS
        rx = w.q + w.P * xs + w.G.transpose() * zs;
        if (p) rx += w.A.transpose() * ys;
        if (p) ry = w.A * xs - w.b;
        rz = w.G * xs + ss - w.h;

        // affine predictor
        rhs.head(n) = -rx;
        if (p) rhs.segment(n, p) = -ry;
        rhs.tail(m) = -(rz - ss);  // -rz + s
        Vec d_aff = kkt.solve(rhs, st.refine_iterations);
        dz_a = d_aff.tail(m);
        Vec w2dz(m);
        {
            for (int i = 0; i < K.l; ++i) w2dz[i] = nt.wo[i] * nt.wo[i] * dz_a[i];
            int r = K.l;
            for (size_t kb = 0; kb < K.dims.size(); ++kb) {
                int d = K.dims[kb];
                w2dz.segment(r, d) = nt.W2blk[kb] * dz_a.segment(r, d);
                r += d;
            }
        }
        ds_a = -ss - w2dz;

        double a_aff = std::min({max_step(K, ss, ds_a), max_step(K, zs, dz_a), 1.0});
        double mu_aff = (ss + a_aff * ds_a).dot(zs + a_aff * dz_a) / degree;
        double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);
        sigma = std::clamp(sigma, 0.0, 0.99999);

        // Mehrotra corrector; falls back to the plain centering direction
        // when the second-order term shortens the step too much
        nt.solve(K, ds_a, wi_ds);
        nt.mul(K, dz_a, w_dz);
        cone_product(K, wi_ds, w_dz, corr);
        cone_product(K, nt.lambda, nt.lambda, lam2);
        const double eta = 1.0 - sigma;
        Vec dx(n), dy(p), dz(m), ds(m);
        double alpha = 0.0;
        for (int pass = 0; pass < 2; ++pass) {
            Vec target = sigma * mu * cone_identity(K, m) - lam2 - (pass == 0 ? corr : Vec(Vec::Zero(m)));
            cone_divide(K, nt.lambda, target, dtil);
            Vec w_dtil(m);
            nt.mul(K, dtil, w_dtil);
            rhs.head(n) = -eta * rx;
            if (p) rhs.segment(n, p) = -eta * ry;
            rhs.tail(m) = -eta * rz - w_dtil;
            Vec d_cmb = kkt.solve(rhs, st.refine_iterations);
            dx = d_cmb.head(n);
            dy = d_cmb.segment(n, p);
            dz = d_cmb.tail(m);
            Vec w2dz_c(m);
            for (int i = 0; i < K.l; ++i) w2dz_c[i] = nt.wo[i] * nt.wo[i] * dz[i];
            int r = K.l;
            for (size_t kb = 0; kb < K.dims.size(); ++kb) {
                int d = K.dims[kb];
                w2dz_c.segment(r, d) = nt.W2blk[kb] * dz.segment(r, d);
                r += d;
            }
            ds = w_dtil - w2dz_c;
            alpha = step_damp * std::min({max_step(K, ss, ds), max_step(K, zs, dz), 1.0});
            alpha = std::min(alpha, 1.0);
            if (alpha >= 0.1 * a_aff || a_aff < 1e-8) break;
        }
        if (st.verbose) {
            std::fprintf(stderr, "      a_aff %.3e sigma %.3e alpha %.3e mu %.3e\n", a_aff,
                         sigma, alpha, mu);
            // locate the limiting block
            auto report_limit = [&](const char* name, const Vec& u, const Vec& du) {
                double worst = 1e300;
                int which = -1;
                for (int i = 0; i < K.l; ++i)
                    if (du[i] < 0.0 && -u[i] / du[i] < worst) {
                        worst = -u[i] / du[i];
                        which = i;
                    }
                int r = K.l;
                int bi = 0;
                for (int d : K.dims) {
                    Vec ub = u.segment(r, d), db = du.segment(r, d);
                    ConeLayout K1;
                    K1.l = 0;
                    K1.dims = {d};
                    double a = max_step(K1, ub, db);
                    if (a < worst) {
                        worst = a;
                        which = 100000 + bi;
                    }
                    r += d;
                    ++bi;
                }
                std::fprintf(stderr, "        %s limited by %d at %.3e\n", name, which, worst);
            };
            if (alpha < 1e-3) {
                report_limit("s", ss, ds);
                report_limit("z", zs, dz);
            }
        }
        if (!std::isfinite(alpha) || alpha < 1e-11) {
            sol.status = SolveStatus::MaxIterations;
            sol.message = "step length collapsed";
            break;
        }
        // halve back if rounding pushed the candidate onto the boundary
        bool stepped = false;
        for (int bt = 0; bt < 12; ++bt) {
            Vec sn = ss + alpha * ds, zn = zs + alpha * dz;
            if (strictly_interior(K, sn) && strictly_interior(K, zn)) {
                xs += alpha * dx;
                if (p) ys += alpha * dy;
                zs = zn;
                ss = sn;
                stepped = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!stepped) {
            sol.status = SolveStatus::MaxIterations;
            sol.message = "step length collapsed at cone boundary";
            break;
        }
    }

    if (iter >= st.max_iterations) {
        sol.status = SolveStatus::MaxIterations;
        sol.message = "iteration limit";
    }

    // accept a stalled-but-accurate iterate at 100x the target tolerance
    if (sol.status == SolveStatus::MaxIterations &&
        best_res.pres <= 1e2 * st.feas_tol && best_res.dres <= 1e2 * st.feas_tol &&
        (best_res.relgap <= 1e2 * st.gap_tol || best_res.gap <= 1e2 * st.abs_gap_tol)) {
        sol.status = SolveStatus::Optimal;
        sol.message += " (reduced accuracy)";
    }

    // report the best iterate for non-certificate outcomes
    if (sol.status == SolveStatus::Optimal || sol.status == SolveStatus::MaxIterations ||
        sol.status == SolveStatus::NumericalError) {
        if (sol.status == SolveStatus::Optimal) {
            // best iterate is the terminating one by construction
        }
        sol.x.assign(bx.data(), bx.data() + n);
        sol.y.assign(by.data(), by.data() + p);
        sol.objective = best_res.pcost;
        sol.primal_residual = best_res.pres;
        sol.dual_residual = best_res.dres;
        sol.duality_gap = best_res.relgap;
        sol.iterations = best_iter + 1;
        // public duals: orthant rows, then per-block transforms
        sol.z_ineq.assign(bz.data(), bz.data() + w.l);
        sol.z_cone.clear();
        for (size_t c = 0; c < prog.cones.size(); ++c) {
            int r0 = w.cone_row0[c];
            int d = static_cast<int>(prog.cones[c].vars.size());
            Vec zb = bz.segment(r0, d);
            if (prog.cones[c].kind == ConeKind::RotatedSecondOrder) {
                Vec t(d);
                t[0] = kInvSqrt2 * (zb[0] + zb[1]);
                t[1] = kInvSqrt2 * (zb[0] - zb[1]);
                for (int j = 2; j < d; ++j) t[j] = zb[j];
                zb = t;
            }
            sol.z_cone.emplace_back(zb.data(), zb.data() + d);
        }
    } else {
        // certificate outcomes still expose the (normalized) certificate
        Vec x = unscale_x(xs), y = (sc.e.asDiagonal() * ys) / sc.cost,
            z = (sc.f.asDiagonal() * zs) / sc.cost;
        sol.x.assign(x.data(), x.data() + n);
        sol.y.assign(y.data(), y.data() + p);
        sol.z_ineq.assign(z.data(), z.data() + w.l);
        for (size_t c = 0; c < prog.cones.size(); ++c) {
            int r0 = w.cone_row0[c];
            int d = static_cast<int>(prog.cones[c].vars.size());
            std::vector<double> zb(z.data() + r0, z.data() + r0 + d);
            sol.z_cone.push_back(std::move(zb));
        }
        sol.iterations = iter + 1;
    }
    return sol;
}

}  // namespace aim
