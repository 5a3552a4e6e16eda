#include "aim/dynamics.hpp"

#include <cmath>

namespace aim {

StateSpace build_continuous(const VehicleModel& model, const SpeedLimits& limits) {
    StateSpace ss;
    ss.model = model;
    ss.limits = limits;
    ss.A(ST_E, ST_E) = -2.0 * model.f_d / model.m;
    ss.B(ST_T, IN_ZETA) = 1.0;
    ss.B(ST_E, IN_FPS) = 1.0;
    ss.B(ST_E, IN_FSS) = 1.0;
    ss.B(ST_E, IN_FB) = 1.0;
    if (model.has_battery) ss.B(ST_SOC, IN_FSS) = model.soc_fit.a_soc;
    if (model.has_fuel) {
        ss.B(ST_MF, IN_FPS) = model.alpha_ps / 1000.0;  // g/kJ against F in N
        ss.B(ST_MF, IN_ZETA) = model.m_f0;
    }
    ss.Bc(ST_E) = -model.rolling_force();
    return ss;
}

StateSpace discretize(const StateSpace& cont, double ds, bool exact) {
    if (!(ds > 0.0)) throw std::invalid_argument("discretize: ds must be positive");
    if (cont.discrete) throw std::invalid_argument("discretize: already discrete");
    StateSpace d = cont;
    d.ds = ds;
    d.discrete = true;
    if (!exact) {
        d.A = Eigen::Matrix4d::Identity() + cont.A * ds;
        d.B = cont.B * ds;
        d.Bc = cont.Bc * ds;
        return d;
    }
    // zero-order hold; A is diagonal so the matrix exponential is entrywise
    Eigen::Vector4d phi;  // integral of exp(A sigma) per row
    d.A = Eigen::Matrix4d::Identity();
    for (int i = 0; i < 4; ++i) {
        double a = cont.A(i, i);
        if (std::abs(a) > 0.0) {
            d.A(i, i) = std::exp(a * ds);
            phi[i] = (std::exp(a * ds) - 1.0) / a;
        } else {
            phi[i] = ds;
        }
    }
    d.B = phi.asDiagonal() * cont.B;
    d.Bc = phi.asDiagonal() * cont.Bc;
    return d;
}

VehicleState step(const VehicleState& x, const ControlInput& u, const StateSpace& ss) {
    if (!ss.discrete) throw std::invalid_argument("step: state space is continuous");
    const VehicleModel& m = ss.model;
    const double tol = 1e-6;
    const double fscale = 1.0 + std::abs(m.p_ps_max) * u.zeta;

    if (!(u.zeta > 0.0)) throw BoundViolation("zeta", "step: zeta must be positive");
    if (u.zeta > 1.0 / ss.limits.v_min + tol)
        throw BoundViolation("zeta", "step: zeta above 1/v_min");
    if (u.f_ps < -tol * fscale || u.f_ps > m.p_ps_max * u.zeta + tol * fscale)
        throw BoundViolation("f_ps", "step: F_PS outside [0, P_PS_max*zeta]");
    if (u.f_ss < m.p_ss_min * u.zeta - tol * fscale ||
        u.f_ss > m.p_ss_max * u.zeta + tol * fscale)
        throw BoundViolation("f_ss", "step: F_SS outside power band");
    double fb_min = m.m * ss.limits.a_min - m.p_ss_min * u.zeta;
    if (u.f_b > tol * fscale || u.f_b < fb_min - tol * fscale)
        throw BoundViolation("f_b", "step: F_b outside [m*a_min - F_t_min, 0]");

    Eigen::Vector4d next = ss.A * x.vec() + ss.B * u.vec() + ss.Bc;
    if (next[ST_E] < ss.limits.e_min(m.m) * (1.0 - 1e-9) - tol)
        throw BoundViolation("e", "step: resulting energy below the v_min floor");
    return VehicleState::from(next);
}

}  // namespace aim
