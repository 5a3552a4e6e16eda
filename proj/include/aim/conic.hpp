#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace aim {

// Sparse triplet; rows/cols are 0-based.
struct Triplet {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

enum class ConeKind {
    SecondOrder,         // x0 >= ||x1..xd-1||
    RotatedSecondOrder,  // 2*x0*x1 >= ||x2..xd-1||^2, x0,x1 >= 0
};

// A cone membership constraint on a tuple of program variables.
// Each variable may appear in at most one cone block.
struct ConeBlock {
    ConeKind kind = ConeKind::RotatedSecondOrder;
    std::vector<int> vars;  // dim >= 3 for rotated, >= 2 for plain SOC
};

// min 1/2 x'Px + q'x  s.t.  A x = b,  G x <= h,  x[block] in cone per block.
// P is symmetric PSD, given as full-symmetric triplets (both halves or diagonal).
struct ConicProgram {
    int num_vars = 0;
    std::vector<Triplet> P;  // quadratic objective, full symmetric
    std::vector<double> q;   // linear objective, size num_vars
    std::vector<Triplet> A;  // equality lhs
    std::vector<double> b;   // equality rhs
    std::vector<Triplet> G;  // inequality lhs (row-form Gx <= h)
    std::vector<double> h;   // inequality rhs
    std::vector<ConeBlock> cones;

    int num_eq() const { return static_cast<int>(b.size()); }
    int num_ineq() const { return static_cast<int>(h.size()); }

    // Throws std::invalid_argument on out-of-range indices, a variable in
    // two cone blocks, or asymmetric/undersized data.
    void validate() const;
};

enum class SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,  // unbounded below
    MaxIterations,
    NumericalError,
};

const char* to_string(SolveStatus s);

struct Solution {
    SolveStatus status = SolveStatus::NumericalError;
    std::vector<double> x;        // primal, size num_vars
    std::vector<double> y;        // equality duals
    std::vector<double> z_ineq;   // inequality duals, >= 0
    std::vector<std::vector<double>> z_cone;  // one dual vector per cone block
    double objective = 0.0;
    // Relative residuals at the returned iterate.
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double duality_gap = 0.0;     // relative complementarity gap
    int iterations = 0;
    std::string message;
};

// Independent optimality audit: recomputes every KKT condition with plain
// triplet arithmetic, sharing no code with the solve path.
struct KktReport {
    double stationarity = 0.0;        // ||Px+q+A'y+G'z-scatter(z_cone)||_inf, relative
    double equality = 0.0;            // ||Ax-b||_inf, relative
    double inequality = 0.0;          // max(0, Gx-h), relative
    double cone_primal = 0.0;         // worst primal cone violation, relative
    double dual_sign = 0.0;           // worst z_ineq negativity / dual-cone violation
    double complementarity = 0.0;     // |s'z| summed over parts, relative
    bool feasibility_certificate = false;  // set when auditing an infeasible status

    double worst() const;
    bool pass(double tol) const { return worst() <= tol; }
};

KktReport check_kkt(const ConicProgram& p, const Solution& s);

// Text interchange format (one program per file), deterministic layout.
void write_program(const ConicProgram& p, std::ostream& os);
ConicProgram read_program(std::istream& is);
void write_program_file(const ConicProgram& p, const std::string& path);
ConicProgram read_program_file(const std::string& path);

}  // namespace aim
