#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aim/dynamics.hpp"
#include "aim/powertrain.hpp"

namespace aim {

struct IntersectionGeometry {
    double length_cz = 150.0;  // L, m
    double length_mz = 10.0;   // S, m
    double ds = 2.0;
    int alpha = 80;    // (L+S)/ds
    int alpha1 = 75;   // L/ds
    int alpha2 = 5;    // S/ds

    static IntersectionGeometry make(double L, double S, double ds);
    double total_length() const { return length_cz + length_mz; }
};

struct SafetyParams {
    double t_delta = 1.0;         // s, minimum headway
    double a_min = -6.5;          // m/s^2
    double v_bar = 10.0;          // m/s, desired MZ exit speed
    double ordering_slack = 1e-3; // s, strict-order slack for Eq.-style ">"
};

// Symbolic affine constraint over horizon variables. Affine by construction:
// a record can only carry linear coefficient terms.
enum class VarKind { State, Input };

struct VarRef {
    VarKind kind = VarKind::State;
    int step = 0;       // node index within the horizon
    int component = 0;  // StateIdx / InputIdx
};

struct LinearTerm {
    VarRef var;
    double coeff = 0.0;
};

enum class Relation { Eq, Ge, Le };

struct LinearConstraint {
    Relation rel = Relation::Ge;
    std::vector<LinearTerm> terms;
    double rhs = 0.0;
    std::string tag;
};

using ConstraintSet = std::vector<LinearConstraint>;

// Predecessor data at the follower's horizon node positions: entry j holds
// the predecessor's time/energy at position (k+j)*ds, j = 0..N.
struct PredecessorTrace {
    std::vector<double> t;
    std::vector<double> e;
};

// A vehicle's latest predicted sequence anchored at grid step anchor_step;
// t[i], e[i] refer to position (anchor_step + i)*ds.
struct PredictedTrace {
    int anchor_step = 0;
    std::vector<double> t;
    std::vector<double> e;
    double mass = 0.0;
};

// Eq.-(22)-style split of the rear-end time-gap bound: two affine rows per
// horizon node (headway and speed-difference branches of the max).
ConstraintSet rear_end_constraints(int horizon, const PredecessorTrace& pred,
                                   const FitCoefficients& fit, const SafetyParams& sp);

// MZ-entry gate against the lateral predecessor's estimated exit time;
// empty unless alpha1 falls inside (k, k+N].
ConstraintSet lateral_constraints(int k, int horizon, const IntersectionGeometry& geom,
                                  double exit_estimate);

// Strict crossing-order rows against the opposite-direction predecessor at
// the MZ entry and exit positions.
ConstraintSet opposite_constraints(int k, int horizon, const IntersectionGeometry& geom,
                                   double entry_estimate, double exit_estimate,
                                   const SafetyParams& sp);

// Predicted time at target_s when the horizon reaches it; otherwise the
// average-speed completion estimate from the horizon end.
double estimate_exit_time(const PredictedTrace& info, double target_s, double v_bar,
                          const IntersectionGeometry& geom);

// Terminal-speed equality (gated on alpha entering the horizon), state boxes,
// and the zeta-coupled input boxes.
ConstraintSet terminal_and_box_constraints(int k, int horizon, const VehicleModel& model,
                                           const IntersectionGeometry& geom,
                                           const SafetyParams& sp, const SpeedLimits& limits);

}  // namespace aim
