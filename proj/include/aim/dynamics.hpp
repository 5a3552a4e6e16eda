#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "aim/powertrain.hpp"

namespace aim {

// state x = [t, E, SOC, m_f], input u = [F_PS, F_SS, F_b, zeta]
enum StateIdx : int { ST_T = 0, ST_E = 1, ST_SOC = 2, ST_MF = 3 };
enum InputIdx : int { IN_FPS = 0, IN_FSS = 1, IN_FB = 2, IN_ZETA = 3 };

struct VehicleState {
    double t = 0.0;    // s
    double e = 0.0;    // J
    double soc = 0.0;
    double m_f = 0.0;  // g

    Eigen::Vector4d vec() const { return {t, e, soc, m_f}; }
    static VehicleState from(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }
};

struct ControlInput {
    double f_ps = 0.0;  // N
    double f_ss = 0.0;  // N
    double f_b = 0.0;   // N, <= 0
    double zeta = 0.0;  // s/m

    Eigen::Vector4d vec() const { return {f_ps, f_ss, f_b, zeta}; }
    static ControlInput from(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }
};

struct SpeedLimits {
    double v_min = 0.1;   // m/s
    double v_max = 15.0;  // m/s
    double a_min = -6.5;  // m/s^2

    double e_min(double m) const { return 0.5 * m * v_min * v_min; }
    double e_max(double m) const { return 0.5 * m * v_max * v_max; }
};

struct BoundViolation : std::runtime_error {
    std::string field;
    BoundViolation(std::string f, const std::string& what)
        : std::runtime_error(what), field(std::move(f)) {}
};

// dx/ds = A x + B u + B_c (continuous) or x(k+1) = A x(k) + B u(k) + B_c.
struct StateSpace {
    Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
    Eigen::Matrix4d B = Eigen::Matrix4d::Zero();
    Eigen::Vector4d Bc = Eigen::Vector4d::Zero();
    double ds = 0.0;  // grid step; 0 marks the continuous form
    bool discrete = false;
    VehicleModel model;
    SpeedLimits limits;
};

inline double speed_of(double e, double m) { return std::sqrt(2.0 * e / m); }
inline double kinetic_energy(double v, double m) { return 0.5 * m * v * v; }

StateSpace build_continuous(const VehicleModel& model, const SpeedLimits& limits = {});

// Forward-Euler by default; `exact` switches to the zero-order-hold closed
// form (A is diagonal) for discretization-order oracle tests.
StateSpace discretize(const StateSpace& ss, double ds, bool exact = false);

// One discrete step; validates the input box and the resulting energy,
// throwing BoundViolation with the offending field name.
VehicleState step(const VehicleState& x, const ControlInput& u, const StateSpace& ss);

}  // namespace aim
