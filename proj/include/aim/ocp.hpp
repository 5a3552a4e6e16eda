#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "aim/conic.hpp"
#include "aim/constraints.hpp"
#include "aim/dynamics.hpp"
#include "aim/solver.hpp"

namespace aim {

struct ObjectiveWeights {
    double w1 = 0.1;    // travel time, per s
    double w2 = 1e-4;   // mechanical braking, per N*m
    double w3 = 1.0;    // fuel mass, per g (electric energy in gram-equivalents for BEV)
    double w4 = 1e4;    // charge sustaining, per SOC^2
};

// fuel gram-equivalent of one kJ of battery energy, used to put the BEV
// energy term on the same scale as fuel grams
inline constexpr double kGramPerKj = 0.059;

struct MpcOptions {
    int horizon = 30;
    bool lift_cs_quadratic = false;  // epigraph-lift the CS term into a cone
};

struct NeighborData {
    std::optional<PredecessorTrace> rear;    // same-lane vehicle immediately ahead
    std::optional<double> lateral_exit;      // \hat t_q(L+S)
    std::optional<double> opposite_entry;    // \hat t_p(L)
    std::optional<double> opposite_exit;     // \hat t_p(L+S)
};

struct MpcProblem {
    ConicProgram program;
    int k = 0;        // spatial step the solve is anchored at
    int horizon = 0;  // N (shrunk near the exit)
    double objective_constant = 0.0;
    VehicleModel model;
    IntersectionGeometry geom;

    int state_index(int j, int comp) const { return 4 * j + comp; }
    int input_index(int j, int comp) const { return 4 * (horizon + 1) + 4 * j + comp; }
};

struct MpcSolveError : std::runtime_error {
    SolveStatus status;
    MpcSolveError(SolveStatus st, const std::string& what)
        : std::runtime_error(what), status(st) {}
};

struct AssemblyInfeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MpcSolution {
    std::vector<VehicleState> states;   // N+1
    std::vector<ControlInput> inputs;   // N
    ControlInput first;
    std::vector<double> tightness;      // zeta*sqrt(2E/m) - 1 per input node
    double objective = 0.0;             // Eq.-(28)-style value incl. constant
    KktReport kkt;
};

// Appends the two rotated cones (plus aux variables and ties) realizing
// zeta >= 1/sqrt(2E/m) for one step. The projection of the feasible set onto
// (zeta, E) is exactly {zeta * sqrt(2E/m) >= 1, E > 0}.
void add_time_cone(ConicProgram& prog, int zeta_index, int e_index, double mass);

// Assembles the receding-horizon program at step k from state x_k and the
// exchanged neighbor data. soc_reference anchors the CS quadratic (trip-start
// SOC). Throws AssemblyInfeasible when the terminal energy is unreachable.
MpcProblem build_mpc(const VehicleState& x_k, int k, const NeighborData& neighbors,
                     const ObjectiveWeights& weights, const IntersectionGeometry& geom,
                     const VehicleModel& model, const SafetyParams& sp,
                     const SpeedLimits& limits, double soc_reference,
                     const MpcOptions& options = {});

// Shapes the raw solver output into state/input sequences, records the
// relaxation tightness, and audits the KKT conditions. Throws MpcSolveError
// on a non-optimal status.
MpcSolution extract_solution(const Solution& raw, const MpcProblem& problem);

MpcSolution solve_mpc(const MpcProblem& problem, const SolverSettings& settings = {});

}  // namespace aim
