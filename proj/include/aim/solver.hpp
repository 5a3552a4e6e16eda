#pragma once

#include "aim/conic.hpp"

namespace aim {

struct SolverSettings {
    double feas_tol = 1e-8;    // relative primal/dual residual target
    double gap_tol = 1e-8;     // relative duality gap target
    double abs_gap_tol = 1e-9;
    int max_iterations = 200;
    int ruiz_iterations = 10;
    double static_reg = 1e-9;  // KKT quasi-definite regularization
    int refine_iterations = 10;
    bool verbose = false;
};

// Primal-dual interior-point solve. Deterministic: identical inputs give
// identical outputs. A call is single-use and shares no mutable state, so
// distinct programs may be solved concurrently.
Solution solve(const ConicProgram& p, const SolverSettings& settings = {});

}  // namespace aim
