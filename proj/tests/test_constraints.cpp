#include <cmath>

#include "aim/constraints.hpp"
#include "doctest.h"

using namespace aim;

namespace {

const VehicleModel& shev() {
    static VehicleModel m = default_model(VehicleType::SHEV);
    return m;
}

double eval_rhs_gap(const LinearConstraint& c, double e_i) {
    // for a speed-gap row, the implied lower bound on t_i given E_i
    double coeff_e = 0.0;
    for (const auto& t : c.terms)
        if (t.var.kind == VarKind::State && t.var.component == ST_E) coeff_e = t.coeff;
    return c.rhs - coeff_e * e_i;
}

}  // namespace

TEST_CASE("geometry splits into integer step indices") {
    auto g = IntersectionGeometry::make(150.0, 10.0, 2.0);
    CHECK(g.alpha == 80);
    CHECK(g.alpha1 == 75);
    CHECK(g.alpha2 == 5);
    CHECK(g.alpha == g.alpha1 + g.alpha2);
    CHECK_THROWS(IntersectionGeometry::make(10.0, 150.0, 2.0));   // S < L violated
    CHECK_THROWS(IntersectionGeometry::make(151.0, 10.0, 2.0));   // not a multiple
}

TEST_CASE("rear-end rows: counts, headway dominance at equal energy, gap bound") {
    const int np = 30;
    PredecessorTrace trace;
    trace.t.assign(np + 1, 0.0);
    trace.e.assign(np + 1, 60000.0);
    for (int j = 0; j <= np; ++j) trace.t[static_cast<size_t>(j)] = 0.2 * j;
    SafetyParams sp;
    auto cs = rear_end_constraints(np, trace, shev().vel_fit, sp);
    CHECK(cs.size() == 60);  // two per step

    // equal energies: the speed-gap branch degenerates to t_i >= t_h, so the
    // headway branch is the binding one
    for (int j = 1; j <= np; ++j) {
        const auto& headway = cs[static_cast<size_t>(2 * (j - 1))];
        const auto& gap = cs[static_cast<size_t>(2 * (j - 1) + 1)];
        CHECK(headway.rhs == doctest::Approx(trace.t[static_cast<size_t>(j)] + sp.t_delta));
        CHECK(eval_rhs_gap(gap, 60000.0) == doctest::Approx(trace.t[static_cast<size_t>(j)]));
        CHECK(headway.rhs > eval_rhs_gap(gap, 60000.0));
    }

    // energy surplus of 7500 J tightens the follower by a1 * 7500 / |a_min|
    double a1 = shev().vel_fit.a1;
    const auto& gap = cs[1];
    double need = eval_rhs_gap(gap, 60000.0 + 7500.0) - trace.t[1];
    CHECK(need == doctest::Approx(a1 * 7500.0 / 6.5).epsilon(1e-12));
}

TEST_CASE("rear-end rejects short traces") {
    PredecessorTrace trace;
    trace.t.assign(10, 0.0);
    trace.e.assign(10, 60000.0);
    CHECK_THROWS(rear_end_constraints(30, trace, shev().vel_fit, SafetyParams{}));
}

TEST_CASE("lateral gate appears only when alpha1 enters the horizon") {
    auto g = IntersectionGeometry::make(150.0, 10.0, 2.0);
    CHECK(lateral_constraints(10, 30, g, 11.64).empty());   // 75 > 10+30
    CHECK(lateral_constraints(75, 5, g, 11.64).empty());    // already at the MZ
    auto cs = lateral_constraints(45, 30, g, 11.64);
    REQUIRE(cs.size() == 1);
    CHECK(cs[0].terms.size() == 1);
    CHECK(cs[0].terms[0].var.step == 30);  // k + j + 1 = 75 at j = 29
    CHECK(cs[0].terms[0].var.component == ST_T);
    CHECK(cs[0].rhs == doctest::Approx(11.64));
}

TEST_CASE("opposite-order rows with strict slack") {
    auto g = IntersectionGeometry::make(150.0, 10.0, 2.0);
    SafetyParams sp;
    CHECK(opposite_constraints(0, 30, g, 9.0, 9.7, sp).empty());
    auto cs = opposite_constraints(50, 30, g, 9.0, 9.7, sp);
    REQUIRE(cs.size() == 2);
    CHECK(cs[0].terms[0].var.step == 25);  // alpha1 - k
    CHECK(cs[0].rhs == doctest::Approx(9.001));
    CHECK(cs[1].terms[0].var.step == 30);  // alpha - k
    CHECK(cs[1].rhs == doctest::Approx(9.701));
}

TEST_CASE("exit-time estimator branches") {
    auto g = IntersectionGeometry::make(150.0, 10.0, 2.0);
    PredictedTrace info;
    info.mass = 1200.0;

    // first branch: horizon covers the target
    info.anchor_step = 60;
    info.t = {8.0, 8.2, 8.4, 8.6, 8.8};
    info.e.assign(5, 60000.0);
    // target 128 m = step 64
    CHECK(estimate_exit_time(info, 128.0, 10.0, g) == doctest::Approx(8.8));

    // second branch: 8 s at 120 m, v = 12, target 160 m
    info.anchor_step = 30;
    info.t.assign(31, 0.0);
    info.e.assign(31, kinetic_energy(12.0, 1200.0));
    for (int i = 0; i <= 30; ++i) info.t[static_cast<size_t>(i)] = 8.0 - (30 - i) * 0.18;
    CHECK(estimate_exit_time(info, 160.0, 10.0, g) ==
          doctest::Approx(8.0 + 2.0 * 40.0 / 22.0).epsilon(1e-12));

    // equal speeds: remaining time = distance / v_bar
    info.e.assign(31, kinetic_energy(10.0, 1200.0));
    CHECK(estimate_exit_time(info, 160.0, 10.0, g) == doctest::Approx(8.0 + 4.0).epsilon(1e-12));

    // boundary: horizon end exactly on target -> both branches coincide
    info.anchor_step = 50;
    info.t.assign(31, 9.5);
    info.e.assign(31, kinetic_energy(11.0, 1200.0));
    double t_first = estimate_exit_time(info, 160.0, 10.0, g);
    CHECK(t_first == doctest::Approx(info.t.back()));

    PredictedTrace empty;
    empty.mass = 1200.0;
    CHECK_THROWS(estimate_exit_time(empty, 160.0, 10.0, g));
}

TEST_CASE("terminal and box rows: values and golden counts") {
    auto g = IntersectionGeometry::make(150.0, 10.0, 2.0);
    SafetyParams sp;
    SpeedLimits lim;

    auto cs = terminal_and_box_constraints(0, 30, shev(), g, sp, lim);
    // no terminal eq at k=0; per state node 4 rows, per input node 8 rows
    CHECK(cs.size() == 30 * 4 + 30 * 8);
    for (const auto& c : cs) CHECK(!c.tag.empty());

    auto cs2 = terminal_and_box_constraints(55, 30, shev(), g, sp, lim);
    CHECK(cs2.size() == 1 + 30 * 4 + 30 * 8);
    CHECK(cs2[0].rel == Relation::Eq);
    CHECK(cs2[0].rhs == doctest::Approx(60000.0));  // E(alpha) = m/2 * 10^2
    CHECK(cs2[0].terms[0].var.step == 25);

    // zeta-coupled bounds: F_PS <= 75 kW * zeta and F_SS >= -15 kW * zeta
    double fps_bound = 0.0, fss_bound = 0.0;
    for (const auto& c : cs) {
        if (c.tag == "f_ps_power" && c.terms[0].var.step == 0)
            for (const auto& t : c.terms)
                if (t.var.component == IN_ZETA) fps_bound = -t.coeff * 0.1;
        if (c.tag == "f_ss_regen_power" && c.terms[0].var.step == 0)
            for (const auto& t : c.terms)
                if (t.var.component == IN_ZETA) fss_bound = t.coeff * 0.1;
    }
    CHECK(fps_bound == doctest::Approx(7500.0));
    CHECK(fss_bound == doctest::Approx(1500.0));  // magnitude of the regen floor

    // CV swaps the F_SS band for a pin, no SOC rows
    auto cv = terminal_and_box_constraints(0, 30, default_model(VehicleType::CV), g, sp, lim);
    CHECK(cv.size() == 30 * 2 + 30 * 7);
    int eq_count = 0;
    for (const auto& c : cv)
        if (c.rel == Relation::Eq) ++eq_count;
    CHECK(eq_count == 30);  // F_SS == 0 per input node
}

TEST_CASE("beta split equivalence by enumeration") {
    // max(x, td) <= gap  <=>  x <= gap and td <= gap
    for (double x = -2.0; x <= 2.0; x += 0.25)
        for (double td : {0.5, 1.0, 1.5})
            for (double gap = -2.0; gap <= 3.0; gap += 0.25) {
                bool joint = std::max(x, td) <= gap;
                bool split = (x <= gap) && (td <= gap);
                CHECK(joint == split);
            }
}
