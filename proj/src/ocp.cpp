#include "aim/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace aim {

void add_time_cone(ConicProgram& prog, int zeta_index, int e_index, double mass) {
    const int w = prog.num_vars;
    const int w2 = w + 1;
    const int half = w + 2;
    const int cconst = w + 3;
    prog.num_vars += 4;
    prog.q.resize(static_cast<size_t>(prog.num_vars), 0.0);

    int r = prog.num_eq();
    prog.A.push_back({r, half, 1.0});
    prog.b.push_back(0.5);
    prog.A.push_back({r + 1, w2, 1.0});
    prog.A.push_back({r + 1, w, -1.0});
    prog.b.push_back(0.0);
    prog.A.push_back({r + 2, cconst, 1.0});
    prog.b.push_back(std::sqrt(2.0 * std::sqrt(mass / 2.0)));

    // w2^2 <= 2 * E * (1/2) = E   and   2 * zeta * w >= c^2 = 2 sqrt(m/2)
    prog.cones.push_back({ConeKind::RotatedSecondOrder, {e_index, half, w2}});
    prog.cones.push_back({ConeKind::RotatedSecondOrder, {zeta_index, w, cconst}});
}

namespace {

// forward band of reachable energies under extreme wheel force
void check_terminal_reachable(const VehicleState& x0, int k, int horizon,
                              const IntersectionGeometry& geom, const VehicleModel& model,
                              const SafetyParams& sp, const SpeedLimits& limits) {
    int terminal_node = geom.alpha - k;
    if (terminal_node < 1 || terminal_node > horizon) return;
    const double a = 1.0 - 2.0 * model.f_d / model.m * geom.ds;
    const double fr = model.rolling_force();
    const double p_drive = model.p_ps_max + model.p_ss_max;
    double lo = x0.e, hi = x0.e;
    for (int j = 0; j < terminal_node; ++j) {
        lo = std::max(limits.e_min(model.m),
                      lo * a + (model.m * sp.a_min - fr) * geom.ds);
        hi = std::min(limits.e_max(model.m),
                      hi * a + (p_drive / limits.v_min - fr) * geom.ds);
    }
    const double target = kinetic_energy(sp.v_bar, model.m);
    if (target < lo - 1e-9 || target > hi + 1e-9)
        throw AssemblyInfeasible("terminal energy unreachable from step " + std::to_string(k) +
                                 ": reachable [" + std::to_string(lo) + ", " +
                                 std::to_string(hi) + "], need " + std::to_string(target));
}

}  // namespace

MpcProblem build_mpc(const VehicleState& x_k, int k, const NeighborData& neighbors,
                     const ObjectiveWeights& weights, const IntersectionGeometry& geom,
                     const VehicleModel& model, const SafetyParams& sp,
                     const SpeedLimits& limits, double soc_reference,
                     const MpcOptions& options) {
    if (k < 0 || k >= geom.alpha) throw std::invalid_argument("build_mpc: step outside the grid");
    const int N = std::min(options.horizon, geom.alpha - k);
    if (N < 1) throw std::invalid_argument("build_mpc: empty horizon");
    check_terminal_reachable(x_k, k, N, geom, model, sp, limits);

    MpcProblem mp;
    mp.k = k;
    mp.horizon = N;
    mp.model = model;
    mp.geom = geom;

    ConicProgram& p = mp.program;
    p.num_vars = 4 * (N + 1) + 4 * N;
    p.q.assign(static_cast<size_t>(p.num_vars), 0.0);

    auto xi = [&](int j, int c) { return mp.state_index(j, c); };
    auto ui = [&](int j, int c) { return mp.input_index(j, c); };

    // initial condition
    int row = 0;
    const double x0v[4] = {x_k.t, x_k.e, x_k.soc, x_k.m_f};
    for (int c = 0; c < 4; ++c) {
        p.A.push_back({row, xi(0, c), 1.0});
        p.b.push_back(x0v[c]);
        ++row;
    }

    // discrete dynamics rows: x(j+1) = Ad x(j) + Bd u(j) + cd
    StateSpace ss = discretize(build_continuous(model, limits), geom.ds);
    for (int j = 0; j < N; ++j) {
        for (int c = 0; c < 4; ++c) {
            p.A.push_back({row, xi(j + 1, c), 1.0});
            for (int cc = 0; cc < 4; ++cc) {
                if (ss.A(c, cc) != 0.0) p.A.push_back({row, xi(j, cc), -ss.A(c, cc)});
                if (ss.B(c, cc) != 0.0) p.A.push_back({row, ui(j, cc), -ss.B(c, cc)});
            }
            p.b.push_back(ss.Bc(c));
            ++row;
        }
    }

    // symbolic constraint records -> solver rows
    ConstraintSet cs = terminal_and_box_constraints(k, N, model, geom, sp, limits);
    if (neighbors.rear) {
        auto add = rear_end_constraints(N, *neighbors.rear, model.vel_fit, sp);
        cs.insert(cs.end(), add.begin(), add.end());
    }
    if (neighbors.lateral_exit) {
        auto add = lateral_constraints(k, N, geom, *neighbors.lateral_exit);
        cs.insert(cs.end(), add.begin(), add.end());
    }
    if (neighbors.opposite_entry || neighbors.opposite_exit) {
        auto add = opposite_constraints(k, N, geom,
                                        neighbors.opposite_entry.value_or(-1e30),
                                        neighbors.opposite_exit.value_or(-1e30), sp);
        cs.insert(cs.end(), add.begin(), add.end());
    }
    int grow = 0;
    for (const auto& c : cs) {
        auto index_of = [&](const VarRef& v) {
            return v.kind == VarKind::State ? xi(v.step, v.component) : ui(v.step, v.component);
        };
        if (c.rel == Relation::Eq) {
            for (const auto& t : c.terms) p.A.push_back({row, index_of(t.var), t.coeff});
            p.b.push_back(c.rhs);
            ++row;
        } else {
            const double sgn = c.rel == Relation::Le ? 1.0 : -1.0;
            for (const auto& t : c.terms) p.G.push_back({grow, index_of(t.var), sgn * t.coeff});
            p.h.push_back(sgn * c.rhs);
            ++grow;
        }
    }

    // travel-time relaxation cones, one pair per input node
    for (int j = 0; j < N; ++j) add_time_cone(p, ui(j, IN_ZETA), xi(j, ST_E), model.m);

    // objective, Eq.-(28) shape
    for (int j = 0; j < N; ++j) {
        p.q[static_cast<size_t>(ui(j, IN_ZETA))] += weights.w1 * geom.ds;
        p.q[static_cast<size_t>(ui(j, IN_FB))] -= weights.w2 * geom.ds;
    }
    if (model.has_fuel) p.q[static_cast<size_t>(xi(N, ST_MF))] += weights.w3;
    if (model.type == VehicleType::BEV) {
        // battery-out energy in fuel gram-equivalents:
        // w3 * kGramPerKj * (soc(k|k) - soc(N)) * Voc*Qmax/1000
        const double c_e = weights.w3 * kGramPerKj * model.battery.energy_capacity() / 1000.0;
        p.q[static_cast<size_t>(xi(N, ST_SOC))] -= c_e;
        mp.objective_constant += c_e * x_k.soc;
    }
    const double w4 = model.type == VehicleType::SHEV ? weights.w4 : 0.0;
    if (w4 > 0.0) {
        if (!options.lift_cs_quadratic) {
            p.P.push_back({xi(N, ST_SOC), xi(N, ST_SOC), 2.0 * w4});
            p.q[static_cast<size_t>(xi(N, ST_SOC))] -= 2.0 * w4 * soc_reference;
            mp.objective_constant += w4 * soc_reference * soc_reference;
        } else {
            // tau >= d^2 via (tau, 1/2, d) with d = soc(N) - reference
            const int tau = p.num_vars, chalf = tau + 1, dvar = tau + 2;
            p.num_vars += 3;
            p.q.resize(static_cast<size_t>(p.num_vars), 0.0);
            int r = p.num_eq();
            p.A.push_back({r, chalf, 1.0});
            p.b.push_back(0.5);
            p.A.push_back({r + 1, dvar, 1.0});
            p.A.push_back({r + 1, xi(N, ST_SOC), -1.0});
            p.b.push_back(-soc_reference);
            p.cones.push_back({ConeKind::RotatedSecondOrder, {tau, chalf, dvar}});
            p.q[static_cast<size_t>(tau)] += w4;
        }
    }
    p.validate();
    return mp;
}

MpcSolution extract_solution(const Solution& raw, const MpcProblem& mp) {
    if (raw.status != SolveStatus::Optimal)
        throw MpcSolveError(raw.status, std::string("mpc solve failed at step ") +
                                            std::to_string(mp.k) + ": " +
                                            to_string(raw.status) + " " + raw.message);
    MpcSolution out;
    const int N = mp.horizon;
    out.states.resize(static_cast<size_t>(N) + 1);
    out.inputs.resize(static_cast<size_t>(N));
    for (int j = 0; j <= N; ++j) {
        Eigen::Vector4d v;
        for (int c = 0; c < 4; ++c)
            v[c] = raw.x[static_cast<size_t>(mp.state_index(j, c))];
        out.states[static_cast<size_t>(j)] = VehicleState::from(v);
    }
    for (int j = 0; j < N; ++j) {
        Eigen::Vector4d v;
        for (int c = 0; c < 4; ++c)
            v[c] = raw.x[static_cast<size_t>(mp.input_index(j, c))];
        out.inputs[static_cast<size_t>(j)] = ControlInput::from(v);
    }
    out.first = out.inputs.front();
    out.tightness.resize(static_cast<size_t>(N));
    for (int j = 0; j < N; ++j) {
        double v = speed_of(out.states[static_cast<size_t>(j)].e, mp.model.m);
        out.tightness[static_cast<size_t>(j)] = out.inputs[static_cast<size_t>(j)].zeta * v - 1.0;
    }
    out.objective = raw.objective + mp.objective_constant;
    out.kkt = check_kkt(mp.program, raw);
    return out;
}

MpcSolution solve_mpc(const MpcProblem& mp, const SolverSettings& settings) {
    Solution raw = solve(mp.program, settings);
    return extract_solution(raw, mp);
}

}  // namespace aim
