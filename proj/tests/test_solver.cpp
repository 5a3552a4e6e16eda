#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "aim/conic.hpp"
#include "aim/solver.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace aim;

namespace {

// minimize (x-1)^2 = 1/2 * (2) x^2 - 2x + 1  subject to x >= 2
ConicProgram scalar_qp() {
    ConicProgram p;
    p.num_vars = 1;
    p.P = {{0, 0, 2.0}};
    p.q = {-2.0};
    p.G = {{0, 0, -1.0}};
    p.h = {-2.0};
    return p;
}

// minimize zeta subject to the travel-time cone pair with E pinned:
// vars: zeta, E, half, wA, wB, cvar
ConicProgram time_cone_program(double E_fixed, double mass) {
    ConicProgram p;
    p.num_vars = 6;
    p.q = {1.0, 0, 0, 0, 0, 0};
    p.A = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {2, 4, -1.0}, {3, 5, 1.0}};
    p.b = {E_fixed, 0.5, 0.0, std::sqrt(2.0 * std::sqrt(mass / 2.0))};
    p.cones.push_back({ConeKind::RotatedSecondOrder, {1, 2, 3}});   // wA^2 <= E
    p.cones.push_back({ConeKind::RotatedSecondOrder, {0, 4, 5}});   // zeta*wB >= sqrt(m/2)
    return p;
}

}  // namespace

TEST_CASE("active bound QP: min (x-1)^2 s.t. x >= 2") {
    auto p = scalar_qp();
    auto s = solve(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.x[0] == doctest::Approx(2.0).epsilon(1e-7));
    // objective excludes the +1 constant
    CHECK(s.objective + 1.0 == doctest::Approx(1.0).epsilon(1e-6));
    auto rep = check_kkt(p, s);
    CHECK(rep.pass(1e-6));
}

TEST_CASE("time cone boundary: E=60000, m=1200 gives zeta=0.1") {
    auto p = time_cone_program(60000.0, 1200.0);
    auto s = solve(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.x[0] == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(check_kkt(p, s).pass(1e-6));
}

TEST_CASE("time cone boundary at v_max: E=0.5*1200*15^2 gives zeta=1/15") {
    auto p = time_cone_program(0.5 * 1200.0 * 225.0, 1200.0);
    auto s = solve(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.x[0] == doctest::Approx(1.0 / 15.0).epsilon(1e-6));
}

TEST_CASE("random LPs match vertex enumeration oracle") {
    std::mt19937_64 rng(12345);
    for (int trial = 0; trial < 60; ++trial) {
        auto op = testing::make_random_lp(rng);
        auto s = solve(op.prog);
        REQUIRE_MESSAGE(s.status == SolveStatus::Optimal, "trial ", trial);
        CHECK_MESSAGE(std::abs(s.objective - op.expected_objective) <=
                          1e-6 * (1.0 + std::abs(op.expected_objective)),
                      "trial ", trial, " got ", s.objective, " want ", op.expected_objective);
        CHECK(check_kkt(op.prog, s).pass(1e-6));
    }
}

TEST_CASE("constructed cone QPs recover the planted optimum") {
    std::mt19937_64 rng(777);
    for (int trial = 0; trial < 60; ++trial) {
        auto op = testing::make_constructed_cone_qp(rng);
        auto s = solve(op.prog);
        REQUIRE_MESSAGE(s.status == SolveStatus::Optimal, "trial ", trial);
        CHECK_MESSAGE(std::abs(s.objective - op.expected_objective) <=
                          1e-6 * (1.0 + std::abs(op.expected_objective)),
                      "trial ", trial, " got ", s.objective, " want ", op.expected_objective);
        CHECK(check_kkt(op.prog, s).pass(1e-6));
    }
}

TEST_CASE("determinism: identical programs give identical solution bytes") {
    std::mt19937_64 rng(42);
    auto op = testing::make_random_lp(rng);
    auto s1 = solve(op.prog);
    auto s2 = solve(op.prog);
    REQUIRE(s1.x.size() == s2.x.size());
    CHECK(std::memcmp(s1.x.data(), s2.x.data(), s1.x.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(s1.z_ineq.data(), s2.z_ineq.data(), s1.z_ineq.size() * sizeof(double)) == 0);
    CHECK(s1.objective == s2.objective);
}

TEST_CASE("positive objective scaling leaves the argmin unchanged") {
    auto p = scalar_qp();
    auto s1 = solve(p);
    ConicProgram p2 = p;
    for (auto& t : p2.P) t.value *= 37.5;
    for (auto& v : p2.q) v *= 37.5;
    auto s2 = solve(p2);
    REQUIRE(s1.status == SolveStatus::Optimal);
    REQUIRE(s2.status == SolveStatus::Optimal);
    CHECK(s1.x[0] == doctest::Approx(s2.x[0]).epsilon(1e-7));
}

TEST_CASE("kkt audit flags a perturbed primal") {
    auto p = scalar_qp();
    auto s = solve(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    Solution bad = s;
    bad.x[0] += 1e-3;
    auto rep = check_kkt(p, bad);
    CHECK(rep.worst() > 1e-4);
}

TEST_CASE("infeasible LP is certified") {
    ConicProgram p;
    p.num_vars = 1;
    p.q = {1.0};
    p.G = {{0, 0, -1.0}, {1, 0, 1.0}};  // x >= 1 and x <= 0
    p.h = {-1.0, 0.0};
    auto s = solve(p);
    CHECK(s.status == SolveStatus::PrimalInfeasible);
    auto rep = check_kkt(p, s);
    CHECK(rep.feasibility_certificate);
}

TEST_CASE("unbounded LP is certified as dual infeasible") {
    ConicProgram p;
    p.num_vars = 1;
    p.q = {-1.0};
    p.G = {{0, 0, -1.0}};  // x >= 0, minimize -x
    p.h = {0.0};
    auto s = solve(p);
    CHECK(s.status == SolveStatus::DualInfeasible);
}

TEST_CASE("equality-only QP short path") {
    ConicProgram p;
    p.num_vars = 1;
    p.P = {{0, 0, 2.0}};
    p.q = {-6.0};  // (x-3)^2
    p.A = {{0, 0, 1.0}};
    p.b = {1.0};
    auto s = solve(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("interchange format round-trips and solves identically") {
    std::mt19937_64 rng(99);
    auto op = testing::make_constructed_cone_qp(rng);
    std::stringstream ss;
    write_program(op.prog, ss);
    auto back = read_program(ss);
    CHECK(back.num_vars == op.prog.num_vars);
    CHECK(back.P.size() == op.prog.P.size());
    CHECK(back.cones.size() == op.prog.cones.size());
    auto s1 = solve(op.prog);
    auto s2 = solve(back);
    REQUIRE(s1.status == SolveStatus::Optimal);
    REQUIRE(s2.status == SolveStatus::Optimal);
    CHECK(s1.objective == doctest::Approx(s2.objective).epsilon(1e-12));
}

TEST_CASE("validation rejects malformed programs") {
    ConicProgram p;
    p.num_vars = 2;
    p.q = {0.0, 0.0};
    p.cones.push_back({ConeKind::RotatedSecondOrder, {0, 1}});  // too small
    CHECK_THROWS(p.validate());
    p.cones.clear();
    p.G = {{0, 5, 1.0}};
    p.h = {0.0};
    CHECK_THROWS(p.validate());
}
