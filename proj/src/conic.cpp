#include "aim/conic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace aim {

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::PrimalInfeasible: return "primal_infeasible";
        case SolveStatus::DualInfeasible: return "dual_infeasible";
        case SolveStatus::MaxIterations: return "max_iterations";
        case SolveStatus::NumericalError: return "numerical_error";
    }
    return "unknown";
}

void ConicProgram::validate() const {
    if (num_vars <= 0) throw std::invalid_argument("conic: num_vars must be positive");
    if (static_cast<int>(q.size()) != num_vars)
        throw std::invalid_argument("conic: q size mismatch");
    auto check_trips = [&](const std::vector<Triplet>& T, int rows, const char* name) {
        for (const auto& t : T) {
            if (t.col < 0 || t.col >= num_vars || t.row < 0 || t.row >= rows)
                throw std::invalid_argument(std::string("conic: index out of range in ") + name);
            if (!std::isfinite(t.value))
                throw std::invalid_argument(std::string("conic: non-finite value in ") + name);
        }
    };
    check_trips(P, num_vars, "P");
    check_trips(A, num_eq(), "A");
    check_trips(G, num_ineq(), "G");
    std::vector<char> in_cone(static_cast<size_t>(num_vars), 0);
    for (const auto& c : cones) {
        size_t min_dim = c.kind == ConeKind::RotatedSecondOrder ? 3 : 2;
        if (c.vars.size() < min_dim) throw std::invalid_argument("conic: cone block too small");
        for (int v : c.vars) {
            if (v < 0 || v >= num_vars) throw std::invalid_argument("conic: cone index out of range");
            if (in_cone[static_cast<size_t>(v)])
                throw std::invalid_argument("conic: variable in two cone blocks");
            in_cone[static_cast<size_t>(v)] = 1;
        }
    }
}

namespace {

double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// y += op(M) * x with triplets, transpose optional
void accum(const std::vector<Triplet>& M, const std::vector<double>& x,
           std::vector<double>& y, bool transpose) {
    for (const auto& t : M) {
        if (transpose)
            y[static_cast<size_t>(t.col)] += t.value * x[static_cast<size_t>(t.row)];
        else
            y[static_cast<size_t>(t.row)] += t.value * x[static_cast<size_t>(t.col)];
    }
}

}  // namespace

double KktReport::worst() const {
    return std::max({stationarity, equality, inequality, cone_primal, dual_sign,
                     complementarity});
}

KktReport check_kkt(const ConicProgram& p, const Solution& s) {
    KktReport r;
    if (s.status != SolveStatus::Optimal) {
        // For infeasible/unbounded outcomes the report only records that a
        // certificate-style check was performed; residual fields stay zero.
        r.feasibility_certificate = true;
        return r;
    }
    const size_t n = static_cast<size_t>(p.num_vars);
    if (s.x.size() != n) throw std::invalid_argument("check_kkt: x size mismatch");

    // stationarity: Px + q + A'y + G'z_in - scatter(z_cone); each term is
    // recomputed here so the scale of the normalization reflects the data.
    std::vector<double> grad(p.q);
    std::vector<double> px(n, 0.0), aty(n, 0.0), gtz(n, 0.0), scat(n, 0.0);
    accum(p.P, s.x, px, false);
    if (!s.y.empty()) accum(p.A, s.y, aty, true);
    if (!s.z_ineq.empty()) accum(p.G, s.z_ineq, gtz, true);
    for (size_t c = 0; c < p.cones.size(); ++c) {
        const auto& blk = p.cones[c];
        const auto& zc = s.z_cone[c];
        for (size_t j = 0; j < blk.vars.size(); ++j)
            scat[static_cast<size_t>(blk.vars[j])] += zc[j];
    }
    for (size_t i = 0; i < n; ++i) grad[i] += px[i] + aty[i] + gtz[i] - scat[i];
    double dscale = std::max({1.0 + inf_norm(p.q), inf_norm(px), inf_norm(aty), inf_norm(gtz),
                              inf_norm(scat)});
    r.stationarity = inf_norm(grad) / dscale;

    // primal equalities
    std::vector<double> ax(p.b.size(), 0.0);
    accum(p.A, s.x, ax, false);
    double eq = 0.0;
    for (size_t i = 0; i < ax.size(); ++i) eq = std::max(eq, std::abs(ax[i] - p.b[i]));
    r.equality = eq / std::max(1.0 + inf_norm(p.b), inf_norm(ax));

    // primal inequalities + complementarity with slacks
    std::vector<double> gx(p.h.size(), 0.0);
    accum(p.G, s.x, gx, false);
    double ineq = 0.0, comp = 0.0, zneg = 0.0;
    for (size_t i = 0; i < gx.size(); ++i) {
        double slack = p.h[i] - gx[i];
        ineq = std::max(ineq, -slack);
        comp += std::max(slack, 0.0) * s.z_ineq[i];
        zneg = std::max(zneg, -s.z_ineq[i]);
    }
    r.inequality = ineq / std::max(1.0 + inf_norm(p.h), inf_norm(gx));

    // cone feasibility (primal and dual) + complementarity
    double cone_viol = 0.0, dual_viol = zneg;
    for (size_t c = 0; c < p.cones.size(); ++c) {
        const auto& blk = p.cones[c];
        std::vector<double> xb(blk.vars.size());
        for (size_t j = 0; j < blk.vars.size(); ++j)
            xb[j] = s.x[static_cast<size_t>(blk.vars[j])];
        const auto& zb = s.z_cone[c];
        auto viol = [&](const std::vector<double>& u) {
            double scale = 1.0;
            for (double v : u) scale = std::max(scale, std::abs(v));
            if (blk.kind == ConeKind::RotatedSecondOrder) {
                double zz = 0.0;
                for (size_t j = 2; j < u.size(); ++j) zz += u[j] * u[j];
                double worst = std::max({zz - 2.0 * u[0] * u[1], -u[0] * scale, -u[1] * scale});
                return std::max(0.0, worst) / (scale * scale);
            }
            double zz = 0.0;
            for (size_t j = 1; j < u.size(); ++j) zz += u[j] * u[j];
            double worst = std::max(zz - u[0] * u[0], -u[0] * scale);
            return std::max(0.0, worst) / (scale * scale);
        };
        cone_viol = std::max(cone_viol, viol(xb));
        dual_viol = std::max(dual_viol, viol(zb));
        double dot = 0.0;
        for (size_t j = 0; j < xb.size(); ++j) dot += xb[j] * zb[j];
        comp += std::abs(dot);
    }
    r.cone_primal = cone_viol;
    r.dual_sign = dual_viol;

    double pcost = 0.0;
    for (size_t i = 0; i < n; ++i) pcost += p.q[i] * s.x[i];
    for (const auto& t : p.P)
        pcost += 0.5 * t.value * s.x[static_cast<size_t>(t.row)] * s.x[static_cast<size_t>(t.col)];
    r.complementarity = std::abs(comp) / (1.0 + std::abs(pcost));
    return r;
}

// ---------------------------------------------------------------------------
// interchange format
// ---------------------------------------------------------------------------
//
//   aimconic 1
//   vars <n>
//   P <nnz>            (then nnz lines: row col value)
//   q <n>              (then n lines: value)
//   A <rows> <nnz>     (then nnz triplet lines, then rows rhs lines)
//   G <rows> <nnz>     (idem)
//   cones <count>      (then count lines: rsoc|soc dim v0 v1 ...)

namespace {

void write_triplets(std::ostream& os, const std::vector<Triplet>& T) {
    for (const auto& t : T) {
        os << t.row << ' ' << t.col << ' ';
        os.precision(17);
        os << t.value << '\n';
    }
}

}  // namespace

void write_program(const ConicProgram& p, std::ostream& os) {
    os << "aimconic 1\n";
    os << "vars " << p.num_vars << '\n';
    os << "P " << p.P.size() << '\n';
    write_triplets(os, p.P);
    os << "q " << p.q.size() << '\n';
    os.precision(17);
    for (double v : p.q) os << v << '\n';
    os << "A " << p.num_eq() << ' ' << p.A.size() << '\n';
    write_triplets(os, p.A);
    for (double v : p.b) os << v << '\n';
    os << "G " << p.num_ineq() << ' ' << p.G.size() << '\n';
    write_triplets(os, p.G);
    for (double v : p.h) os << v << '\n';
    os << "cones " << p.cones.size() << '\n';
    for (const auto& c : p.cones) {
        os << (c.kind == ConeKind::RotatedSecondOrder ? "rsoc" : "soc") << ' ' << c.vars.size();
        for (int v : c.vars) os << ' ' << v;
        os << '\n';
    }
}

ConicProgram read_program(std::istream& is) {
    auto fail = [](const std::string& what) -> ConicProgram {
        throw std::runtime_error("conic parse error: " + what);
    };
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "aimconic" || version != 1)
        return fail("bad header");
    ConicProgram p;
    std::string tok;
    size_t count = 0, rows = 0;
    auto read_triplets = [&](std::vector<Triplet>& T, size_t nnz) {
        T.resize(nnz);
        for (auto& t : T)
            if (!(is >> t.row >> t.col >> t.value)) fail("triplet");
    };
    auto read_values = [&](std::vector<double>& v, size_t n) {
        v.resize(n);
        for (auto& x : v)
            if (!(is >> x)) fail("value");
    };
    if (!(is >> tok >> p.num_vars) || tok != "vars") return fail("vars");
    if (!(is >> tok >> count) || tok != "P") return fail("P");
    read_triplets(p.P, count);
    if (!(is >> tok >> count) || tok != "q") return fail("q");
    read_values(p.q, count);
    if (!(is >> tok >> rows >> count) || tok != "A") return fail("A");
    read_triplets(p.A, count);
    read_values(p.b, rows);
    if (!(is >> tok >> rows >> count) || tok != "G") return fail("G");
    read_triplets(p.G, count);
    read_values(p.h, rows);
    if (!(is >> tok >> count) || tok != "cones") return fail("cones");
    p.cones.resize(count);
    for (auto& c : p.cones) {
        std::string kind;
        size_t dim = 0;
        if (!(is >> kind >> dim)) fail("cone header");
        if (kind == "rsoc")
            c.kind = ConeKind::RotatedSecondOrder;
        else if (kind == "soc")
            c.kind = ConeKind::SecondOrder;
        else
            fail("cone kind");
        c.vars.resize(dim);
        for (int& v : c.vars)
            if (!(is >> v)) fail("cone index");
    }
    p.validate();
    return p;
}

void write_program_file(const ConicProgram& p, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    write_program(p, os);
}

ConicProgram read_program_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_program(is);
}

}  // namespace aim
