#include <cmath>
#include <random>

#include "doctest.h"
#include "lt/game_core.hpp"

using namespace lt;
using namespace lt::game;

namespace {

VehicleState make_state(double v, double d_conf, PlayerRole role, double exit_leg = 20.0) {
    return {v, d_conf, d_conf + exit_leg, role};
}

NormalizationConstants affine_norms() {
    NormalizationConstants n;
    n.lv_safety = {0.0, 10.0};
    n.tv_safety = {0.0, 10.0};
    n.lv_efficiency = {-20.0, 0.0};
    n.tv_efficiency = {-20.0, 0.0};
    return n;
}

}  // namespace

TEST_CASE("ttcp is distance over speed") {
    CHECK(ttcp(make_state(10.0, 20.0, PlayerRole::LV)) == doctest::Approx(2.0));
    CHECK(ttcp(make_state(5.0, 0.0, PlayerRole::LV)) == doctest::Approx(0.0));
}

TEST_CASE("ttcp applies the speed floor at standstill") {
    CHECK(ttcp(make_state(0.0, 5.0, PlayerRole::TV)) == doctest::Approx(50.0));
}

TEST_CASE("ttcp rejects a vehicle past the conflict point") {
    CHECK_THROWS_AS(ttcp(make_state(5.0, -0.1, PlayerRole::LV)), std::domain_error);
}

TEST_CASE("rttc absolute difference and symmetry") {
    CHECK(rttc(2.0, 3.0) == doctest::Approx(1.0));
    CHECK(rttc(3.0, 2.0) == doctest::Approx(1.0));
    CHECK(rttc(2.35, 2.35) == doctest::Approx(0.0));
}

TEST_CASE("safety payoff composes ttcp and rttc") {
    CHECK(safety_payoff(make_state(10.0, 20.0, PlayerRole::LV),
                        make_state(10.0, 30.0, PlayerRole::TV)) == doctest::Approx(3.0));
    const VehicleState a = make_state(7.0, 14.0, PlayerRole::LV);
    const VehicleState b = make_state(7.0, 14.0, PlayerRole::TV);
    CHECK(safety_payoff(a, b) == doctest::Approx(ttcp(a)));
    CHECK(safety_payoff(make_state(5.0, 10.0, PlayerRole::LV),
                        make_state(20.0, 40.0, PlayerRole::TV)) == doctest::Approx(2.0));
}

TEST_CASE("efficiency payoff is negative time to destination") {
    VehicleState s = make_state(10.0, 20.0, PlayerRole::LV);
    s.dist_to_destination = 40.0;
    CHECK(efficiency_payoff(s) == doctest::Approx(-4.0));
    s.dist_to_destination = 0.0;
    CHECK(efficiency_payoff(s) == doctest::Approx(0.0));
    s.dist_to_destination = 40.0;
    s.speed = 0.0;
    CHECK(efficiency_payoff(s) == doctest::Approx(-400.0));
}

TEST_CASE("efficiency payoff increases with speed above the floor") {
    VehicleState s = make_state(1.0, 20.0, PlayerRole::LV);
    double prev = efficiency_payoff(s);
    for (double v = 2.0; v <= 20.0; v += 1.0) {
        s.speed = v;
        const double cur = efficiency_payoff(s);
        CHECK(cur > prev);
        prev = cur;
    }
}

TEST_CASE("rule payoff grants the through vehicle priority") {
    CHECK(rule_payoff(PlayerRole::LV) == doctest::Approx(0.5));
    CHECK(rule_payoff(PlayerRole::TV) == doctest::Approx(1.0));
    CHECK(rule_payoff(PlayerRole::LV) < rule_payoff(PlayerRole::TV));
}

TEST_CASE("project_state uniform motion") {
    const VehicleState out = project_state(make_state(10.0, 20.0, PlayerRole::LV), 0.0, 1.0);
    CHECK(out.speed == doctest::Approx(10.0));
    CHECK(out.dist_to_conflict == doctest::Approx(10.0));
}

TEST_CASE("project_state stops at zero speed") {
    const VehicleState out = project_state(make_state(1.0, 20.0, PlayerRole::LV), -2.0, 1.0);
    CHECK(out.speed == doctest::Approx(0.0));
    CHECK(out.dist_to_conflict == doctest::Approx(20.0 - 0.25));
}

TEST_CASE("project_state accelerating") {
    const VehicleState out = project_state(make_state(10.0, 20.0, PlayerRole::TV), 1.0, 1.0);
    CHECK(out.speed == doctest::Approx(11.0));
    CHECK(out.dist_to_conflict == doctest::Approx(9.5));
}

TEST_CASE("project_state requires a positive horizon") {
    CHECK_THROWS_AS(project_state(make_state(10.0, 20.0, PlayerRole::LV), 0.0, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(project_state(make_state(10.0, 20.0, PlayerRole::LV), 0.0, -1.0),
                    std::invalid_argument);
}

TEST_CASE("build_game_matrix rejects degenerate normalization") {
    NormalizationConstants bad = affine_norms();
    bad.lv_safety = {1.0, 1.0};
    CHECK_THROWS_AS(build_game_matrix(make_state(3.0, 20.0, PlayerRole::LV),
                                      make_state(3.0, 20.0, PlayerRole::TV), 1.0, bad),
                    std::invalid_argument);
}

TEST_CASE("build_game_matrix rejects vehicles past the conflict point") {
    CHECK_THROWS_AS(build_game_matrix(make_state(3.0, -1.0, PlayerRole::LV),
                                      make_state(3.0, 20.0, PlayerRole::TV), 1.0,
                                      affine_norms()),
                    std::domain_error);
}

TEST_CASE("build_game_matrix spot cell against hand-computed components") {
    // Keep-speed/keep-speed cell for LV 3 m/s at 23.51 m and TV 3 m/s at
    // 22.56 m, one-second projection, destinations 20 m past the conflict.
    const VehicleState lv = make_state(3.0, 23.51, PlayerRole::LV);
    const VehicleState tv = make_state(3.0, 22.56, PlayerRole::TV);
    const GameMatrix m = build_game_matrix(lv, tv, 1.0, affine_norms());

    const double ttcp_lv = 20.51 / 3.0;
    const double ttcp_tv = 19.56 / 3.0;
    const double rttc_both = std::abs(ttcp_lv - ttcp_tv);
    const double safety_lv = (ttcp_lv + rttc_both) / 10.0;   // affine map /10
    const double safety_tv = (ttcp_tv + rttc_both) / 10.0;
    const double eff_lv = (-40.51 / 3.0 + 20.0) / 20.0;      // affine map (x+20)/20
    const double eff_tv = (-39.56 / 3.0 + 20.0) / 20.0;

    CHECK(m.lv[1][2].safety == doctest::Approx(safety_lv).epsilon(1e-12));
    CHECK(m.tv[1][2].safety == doctest::Approx(safety_tv).epsilon(1e-12));
    CHECK(m.lv[1][2].efficiency == doctest::Approx(eff_lv).epsilon(1e-12));
    CHECK(m.tv[1][2].efficiency == doctest::Approx(eff_tv).epsilon(1e-12));
    CHECK(m.lv[1][2].rule == doctest::Approx(0.5));
    CHECK(m.tv[1][2].rule == doctest::Approx(1.0));
}

TEST_CASE("build_game_matrix orientation: efficiency depends only on the owner") {
    // A transposed tensor would make LV efficiency vary along the TV axis.
    const VehicleState lv = make_state(8.0, 12.0, PlayerRole::LV);
    const VehicleState tv = make_state(3.0, 30.0, PlayerRole::TV);
    const GameMatrix m = build_game_matrix(lv, tv, 1.0, affine_norms());
    for (std::size_t i = 0; i < kLvActionCount; ++i)
        for (std::size_t j = 1; j < kTvActionCount; ++j)
            CHECK(m.lv[i][j].efficiency == doctest::Approx(m.lv[i][0].efficiency));
    for (std::size_t j = 0; j < kTvActionCount; ++j)
        for (std::size_t i = 1; i < kLvActionCount; ++i)
            CHECK(m.tv[i][j].efficiency == doctest::Approx(m.tv[0][j].efficiency));
    // The LV rows do differ from each other (distinct projections).
    CHECK(m.lv[0][0].efficiency != doctest::Approx(m.lv[2][0].efficiency));
    CHECK(m.tv[0][0].efficiency != doctest::Approx(m.tv[0][4].efficiency));
}

TEST_CASE("normalized components stay in the unit interval") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> speed(0.0, 15.0);
    std::uniform_real_distribution<double> dist(0.1, 40.0);
    const NormalizationConstants norms = affine_norms();
    for (int k = 0; k < 200; ++k) {
        const GameMatrix m =
            build_game_matrix(make_state(speed(rng), dist(rng), PlayerRole::LV),
                              make_state(speed(rng), dist(rng), PlayerRole::TV), 1.0, norms);
        for (std::size_t i = 0; i < kLvActionCount; ++i)
            for (std::size_t j = 0; j < kTvActionCount; ++j) {
                for (const PayoffComponents* c : {&m.lv[i][j], &m.tv[i][j]}) {
                    CHECK(c->safety >= 0.0);
                    CHECK(c->safety <= 1.0);
                    CHECK(c->efficiency >= 0.0);
                    CHECK(c->efficiency <= 1.0);
                }
            }
    }
}

TEST_CASE("normalization endpoints map to 0 and 1") {
    // Choose states whose keep-speed projection hits the range endpoints.
    NormalizationConstants n = affine_norms();
    const VehicleState lv = make_state(10.0, 20.0, PlayerRole::LV);
    const VehicleState tv = make_state(10.0, 20.0, PlayerRole::TV);
    // Keep-speed cell: safety = ttcp = 1.0 for both after projection.
    n.lv_safety = {1.0, 5.0};
    const GameMatrix m = build_game_matrix(lv, tv, 1.0, n);
    CHECK(m.lv[1][2].safety == doctest::Approx(0.0));
    n.lv_safety = {0.0, 1.0};
    const GameMatrix m2 = build_game_matrix(lv, tv, 1.0, n);
    CHECK(m2.lv[1][2].safety == doctest::Approx(1.0));
}
