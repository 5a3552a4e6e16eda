#include "aim/constraints.hpp"

#include <cmath>
#include <stdexcept>

namespace aim {

IntersectionGeometry IntersectionGeometry::make(double L, double S, double ds) {
    if (!(ds > 0.0)) throw std::invalid_argument("geometry: ds must be positive");
    if (!(S < L)) throw std::invalid_argument("geometry: need S < L");
    IntersectionGeometry g;
    g.length_cz = L;
    g.length_mz = S;
    g.ds = ds;
    double a1 = L / ds, a2 = S / ds;
    if (std::abs(a1 - std::round(a1)) > 1e-9 || std::abs(a2 - std::round(a2)) > 1e-9)
        throw std::invalid_argument("geometry: L and S must be integer multiples of ds");
    g.alpha1 = static_cast<int>(std::round(a1));
    g.alpha2 = static_cast<int>(std::round(a2));
    g.alpha = g.alpha1 + g.alpha2;
    return g;
}

namespace {

VarRef state(int step, int comp) { return {VarKind::State, step, comp}; }
VarRef input(int step, int comp) { return {VarKind::Input, step, comp}; }

}  // namespace

ConstraintSet rear_end_constraints(int horizon, const PredecessorTrace& pred,
                                   const FitCoefficients& fit, const SafetyParams& sp) {
    if (static_cast<int>(pred.t.size()) < horizon + 1 ||
        static_cast<int>(pred.e.size()) < horizon + 1)
        throw std::invalid_argument("rear_end: predecessor trace too short for the horizon");
    ConstraintSet out;
    out.reserve(static_cast<size_t>(2 * horizon));
    const double slope = fit.a1 / std::abs(sp.a_min);
    for (int j = 1; j <= horizon; ++j) {
        // t_i(j) >= t_h(j) + t_delta
        out.push_back({Relation::Ge,
                       {{state(j, ST_T), 1.0}},
                       pred.t[static_cast<size_t>(j)] + sp.t_delta,
                       "rear_end_headway"});
        // t_i(j) - a1/|a_min| * E_i(j) >= t_h(j) - a1/|a_min| * E_h(j); the
        // affine surrogate's intercept cancels between the two vehicles
        out.push_back({Relation::Ge,
                       {{state(j, ST_T), 1.0}, {state(j, ST_E), -slope}},
                       pred.t[static_cast<size_t>(j)] - slope * pred.e[static_cast<size_t>(j)],
                       "rear_end_speed_gap"});
    }
    return out;
}

ConstraintSet lateral_constraints(int k, int horizon, const IntersectionGeometry& geom,
                                  double exit_estimate) {
    ConstraintSet out;
    int node = geom.alpha1 - k;
    if (node < 1 || node > horizon) return out;
    out.push_back({Relation::Ge, {{state(node, ST_T), 1.0}}, exit_estimate, "lateral_gate"});
    return out;
}

ConstraintSet opposite_constraints(int k, int horizon, const IntersectionGeometry& geom,
                                   double entry_estimate, double exit_estimate,
                                   const SafetyParams& sp) {
    ConstraintSet out;
    int n1 = geom.alpha1 - k;
    if (n1 >= 1 && n1 <= horizon)
        out.push_back({Relation::Ge,
                       {{state(n1, ST_T), 1.0}},
                       entry_estimate + sp.ordering_slack,
                       "opposite_entry_order"});
    int n2 = geom.alpha - k;
    if (n2 >= 1 && n2 <= horizon)
        out.push_back({Relation::Ge,
                       {{state(n2, ST_T), 1.0}},
                       exit_estimate + sp.ordering_slack,
                       "opposite_exit_order"});
    return out;
}

double estimate_exit_time(const PredictedTrace& info, double target_s, double v_bar,
                          const IntersectionGeometry& geom) {
    if (info.t.empty() || info.e.empty())
        throw std::invalid_argument("estimate_exit_time: empty information set");
    const int target = static_cast<int>(std::round(target_s / geom.ds));
    const int last = info.anchor_step + static_cast<int>(info.t.size()) - 1;
    if (last >= target) {
        int idx = target - info.anchor_step;
        if (idx < 0) idx = 0;  // target already behind the trace anchor
        return info.t[static_cast<size_t>(idx)];
    }
    const double t_last = info.t.back();
    const double v_last = std::sqrt(2.0 * info.e.back() / info.mass);
    const double remaining = target_s - last * geom.ds;
    return t_last + 2.0 * remaining / (v_last + v_bar);
}

ConstraintSet terminal_and_box_constraints(int k, int horizon, const VehicleModel& model,
                                           const IntersectionGeometry& geom,
                                           const SafetyParams& sp, const SpeedLimits& limits) {
    ConstraintSet out;
    const double e_min = limits.e_min(model.m), e_max = limits.e_max(model.m);

    int terminal_node = geom.alpha - k;
    if (terminal_node >= 1 && terminal_node <= horizon)
        out.push_back({Relation::Eq,
                       {{state(terminal_node, ST_E), 1.0}},
                       kinetic_energy(sp.v_bar, model.m),
                       "terminal_speed"});

    for (int j = 1; j <= horizon; ++j) {
        out.push_back({Relation::Ge, {{state(j, ST_E), 1.0}}, e_min, "e_floor"});
        out.push_back({Relation::Le, {{state(j, ST_E), 1.0}}, e_max, "e_ceiling"});
        if (model.has_battery) {
            out.push_back(
                {Relation::Ge, {{state(j, ST_SOC), 1.0}}, model.battery.soc_min, "soc_floor"});
            out.push_back(
                {Relation::Le, {{state(j, ST_SOC), 1.0}}, model.battery.soc_max, "soc_ceiling"});
        }
    }
    for (int j = 0; j < horizon; ++j) {
        if (model.has_fuel) {
            out.push_back({Relation::Ge, {{input(j, IN_FPS), 1.0}}, 0.0, "f_ps_floor"});
            out.push_back({Relation::Le,
                           {{input(j, IN_FPS), 1.0}, {input(j, IN_ZETA), -model.p_ps_max}},
                           0.0,
                           "f_ps_power"});
        } else {
            out.push_back({Relation::Eq, {{input(j, IN_FPS), 1.0}}, 0.0, "f_ps_absent"});
        }
        if (model.has_battery) {
            out.push_back({Relation::Ge,
                           {{input(j, IN_FSS), 1.0}, {input(j, IN_ZETA), -model.p_ss_min}},
                           0.0,
                           "f_ss_regen_power"});
            out.push_back({Relation::Le,
                           {{input(j, IN_FSS), 1.0}, {input(j, IN_ZETA), -model.p_ss_max}},
                           0.0,
                           "f_ss_drive_power"});
        } else {
            out.push_back({Relation::Eq, {{input(j, IN_FSS), 1.0}}, 0.0, "f_ss_absent"});
        }
        out.push_back({Relation::Le, {{input(j, IN_FB), 1.0}}, 0.0, "f_b_ceiling"});
        // m*a_min - F_t_min <= F_b with F_t_min = P_SS_min * zeta
        out.push_back({Relation::Ge,
                       {{input(j, IN_FB), 1.0}, {input(j, IN_ZETA), model.p_ss_min}},
                       model.m * sp.a_min,
                       "f_b_friction"});
        out.push_back({Relation::Ge, {{input(j, IN_ZETA), 1.0}}, 1.0 / limits.v_max, "zeta_floor"});
        out.push_back(
            {Relation::Le, {{input(j, IN_ZETA), 1.0}}, 1.0 / limits.v_min, "zeta_ceiling"});
    }
    return out;
}

}  // namespace aim
