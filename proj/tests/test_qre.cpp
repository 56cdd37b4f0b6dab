#include <cmath>
#include <random>

#include "doctest.h"
#include "lt/qre.hpp"

using namespace lt;
using namespace lt::qre;

namespace {

// Builds a game whose scalarized payoffs (under unit safety weight) are
// exactly the given per-player tables.
struct TestGame {
    game::GameMatrix matrix;
    WeightTensor w = WeightTensor::constant(1.0, 0.0, 0.0);
};

TestGame make_game(const double lv[kLvActionCount][kTvActionCount],
                   const double tv[kLvActionCount][kTvActionCount]) {
    TestGame g;
    for (std::size_t i = 0; i < kLvActionCount; ++i)
        for (std::size_t j = 0; j < kTvActionCount; ++j) {
            g.matrix.lv[i][j].safety = lv[i][j];
            g.matrix.tv[i][j].safety = tv[i][j];
        }
    return g;
}

TestGame random_game(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    TestGame g;
    for (std::size_t i = 0; i < kLvActionCount; ++i)
        for (std::size_t j = 0; j < kTvActionCount; ++j) {
            g.matrix.lv[i][j].safety = uni(rng);
            g.matrix.tv[i][j].safety = uni(rng);
        }
    return g;
}

}  // namespace

TEST_CASE("rationality profile sizing and lookup") {
    const RationalityProfile p = RationalityProfile::constant(2.0, 2.0, 40.0);
    CHECK(p.bin_count() == 20);
    for (double v : p.values) CHECK(v == doctest::Approx(2.0));

    RationalityProfile ramp;
    ramp.bin_width = 1.0;
    ramp.max_distance = 20.0;
    for (int i = 0; i < 20; ++i) ramp.values.push_back(static_cast<double>(i));
    CHECK(lookup_lambda(ramp, 12.4) == doctest::Approx(12.0));
    CHECK(lookup_lambda(ramp, 25.0) == doctest::Approx(19.0));
    CHECK(lookup_lambda(ramp, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("expected payoffs against a point-mass opponent select a column") {
    std::mt19937_64 rng(11);
    const TestGame g = random_game(rng);
    for (std::size_t j = 0; j < kTvActionCount; ++j) {
        const auto e = expected_payoffs(g.matrix, g.w, MixedStrategy::point_mass(kTvActionCount, j),
                                        PlayerRole::LV);
        for (std::size_t i = 0; i < kLvActionCount; ++i)
            CHECK(e[i] == doctest::Approx(g.matrix.lv[i][j].safety));
    }
}

TEST_CASE("expected payoffs of a constant game are constant") {
    double c[kLvActionCount][kTvActionCount];
    for (auto& row : c)
        for (auto& v : row) v = 0.37;
    const TestGame g = make_game(c, c);
    const auto e = expected_payoffs(g.matrix, g.w, MixedStrategy::uniform(kTvActionCount),
                                    PlayerRole::LV);
    for (double v : e) CHECK(v == doctest::Approx(0.37));
}

TEST_CASE("expected payoffs match a brute-force dot product") {
    std::mt19937_64 rng(5);
    const TestGame g = random_game(rng);
    MixedStrategy opp;
    opp.probs = {0.1, 0.25, 0.3, 0.15, 0.2};
    const auto e = expected_payoffs(g.matrix, g.w, opp, PlayerRole::LV);
    for (std::size_t i = 0; i < kLvActionCount; ++i) {
        double ref = 0.0;
        for (std::size_t j = 0; j < kTvActionCount; ++j)
            ref += opp.probs[j] * g.matrix.lv[i][j].safety;
        CHECK(e[i] == doctest::Approx(ref).epsilon(1e-12));
    }
    const auto etv = expected_payoffs(g.matrix, g.w, MixedStrategy{{0.25, 0.75, 0.0}},
                                      PlayerRole::TV);
    for (std::size_t j = 0; j < kTvActionCount; ++j) {
        const double ref = 0.25 * g.matrix.tv[0][j].safety + 0.75 * g.matrix.tv[1][j].safety;
        CHECK(etv[j] == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("expected payoffs reject a mismatched opponent dimension") {
    std::mt19937_64 rng(2);
    const TestGame g = random_game(rng);
    CHECK_THROWS_AS(expected_payoffs(g.matrix, g.w, MixedStrategy::uniform(kLvActionCount),
                                     PlayerRole::LV),
                    std::invalid_argument);
}

TEST_CASE("logit response limits") {
    const std::vector<double> e = {0.3, 0.9, 0.1};
    const MixedStrategy zero = logit_response(e, 0.0);
    for (double p : zero.probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const MixedStrategy hard = logit_response(e, 1e3);
    CHECK(hard.probs[1] >= 1.0 - 1e-6);

    const MixedStrategy flat = logit_response({0.5, 0.5, 0.5, 0.5}, 7.0);
    for (double p : flat.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("logit response identities and ordering") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    for (int k = 0; k < 500; ++k) {
        std::vector<double> e(5);
        for (double& v : e) v = uni(rng);
        const double lambda = std::abs(uni(rng));
        const double shift = uni(rng);
        const double scale = 0.1 + std::abs(uni(rng));

        const MixedStrategy base = logit_response(e, lambda);
        double sum = 0.0;
        for (double p : base.probs) {
            CHECK(p >= 0.0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

        std::vector<double> shifted = e, scaled = e;
        for (double& v : shifted) v += shift;
        for (double& v : scaled) v *= scale;
        const MixedStrategy s1 = logit_response(shifted, lambda);
        const MixedStrategy s2 = logit_response(scaled, lambda);
        const MixedStrategy s3 = logit_response(e, scale * lambda);
        for (std::size_t i = 0; i < e.size(); ++i) {
            CHECK(std::abs(s1.probs[i] - base.probs[i]) <= 1e-12);
            CHECK(std::abs(s2.probs[i] - s3.probs[i]) <= 1e-12);
        }
        if (lambda > 0.0)
            for (std::size_t i = 0; i < e.size(); ++i)
                for (std::size_t j = 0; j < e.size(); ++j)
                    if (e[i] > e[j]) CHECK(base.probs[i] > base.probs[j]);
    }
}

TEST_CASE("solve_qre at zero rationality is uniform immediately") {
    std::mt19937_64 rng(3);
    const TestGame g = random_game(rng);
    const QreSolution sol =
        solve_qre(g.matrix, g.w, g.w, 0.0, 0.0, MixedStrategy::uniform(kLvActionCount),
                  MixedStrategy::uniform(kTvActionCount));
    CHECK(sol.converged);
    CHECK(sol.iterations == 1);
    CHECK(sol.residual == doctest::Approx(0.0));
    for (double p : sol.p_lv.probs) CHECK(p == doctest::Approx(1.0 / 3.0));
    for (double p : sol.p_tv.probs) CHECK(p == doctest::Approx(1.0 / 5.0));
}

TEST_CASE("solve_qre concentrates on a dominant action") {
    double lv[kLvActionCount][kTvActionCount] = {};
    double tv[kLvActionCount][kTvActionCount] = {};
    for (std::size_t i = 0; i < kLvActionCount; ++i)
        for (std::size_t j = 0; j < kTvActionCount; ++j)
            tv[i][j] = (j == 3) ? 1.0 : 0.0;  // action 3 dominates by margin 1
    const TestGame g = make_game(lv, tv);
    const QreSolution sol =
        solve_qre(g.matrix, g.w, g.w, 10.0, 10.0, MixedStrategy::uniform(kLvActionCount),
                  MixedStrategy::uniform(kTvActionCount));
    CHECK(sol.converged);
    CHECK(sol.p_tv.probs[3] >= 0.999);
}

TEST_CASE("solve_qre fixed point is stable under one more update") {
    std::mt19937_64 rng(17);
    for (int k = 0; k < 100; ++k) {
        const TestGame g = random_game(rng);
        std::uniform_real_distribution<double> lam(0.0, 8.0);
        const double l1 = lam(rng), l2 = lam(rng);
        const QreSolution sol =
            solve_qre(g.matrix, g.w, g.w, l1, l2, MixedStrategy::uniform(kLvActionCount),
                      MixedStrategy::uniform(kTvActionCount));
        if (!sol.converged) continue;
        const MixedStrategy tv2 =
            logit_response(expected_payoffs(g.matrix, g.w, sol.p_lv, PlayerRole::TV), l2);
        const MixedStrategy lv2 =
            logit_response(expected_payoffs(g.matrix, g.w, tv2, PlayerRole::LV), l1);
        for (std::size_t i = 0; i < kTvActionCount; ++i)
            CHECK(std::abs(tv2.probs[i] - sol.p_tv.probs[i]) <= 1e-9);
        for (std::size_t i = 0; i < kLvActionCount; ++i)
            CHECK(std::abs(lv2.probs[i] - sol.p_lv.probs[i]) <= 1e-9);
    }
}

TEST_CASE("solve_qre rejects non-finite payoffs") {
    std::mt19937_64 rng(9);
    TestGame g = random_game(rng);
    g.matrix.lv[1][1].safety = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(solve_qre(g.matrix, g.w, g.w, 1.0, 1.0,
                              MixedStrategy::uniform(kLvActionCount),
                              MixedStrategy::uniform(kTvActionCount)),
                    std::invalid_argument);
}

TEST_CASE("pure NE enumeration: dominance, indifference, empty") {
    double lv[kLvActionCount][kTvActionCount] = {};
    double tv[kLvActionCount][kTvActionCount] = {};
    for (std::size_t j = 0; j < kTvActionCount; ++j) lv[2][j] = 1.0;
    for (std::size_t i = 0; i < kLvActionCount; ++i) tv[i][0] = 1.0;
    const TestGame dom = make_game(lv, tv);
    const auto sols = solve_pure_ne(dom.matrix, dom.w, dom.w);
    REQUIRE(sols.size() == 1);
    CHECK(sols[0] == std::pair<std::size_t, std::size_t>{2, 0});

    double c[kLvActionCount][kTvActionCount];
    for (auto& row : c)
        for (auto& v : row) v = 0.5;
    const TestGame flat = make_game(c, c);
    CHECK(solve_pure_ne(flat.matrix, flat.w, flat.w).size() == 15);

    // Matching-pennies core on rows {0,1} and columns {0,1}; every other row
    // or column is strictly dominated for its owner.
    double mp_lv[kLvActionCount][kTvActionCount] = {{1, 0, 1, 1, 1},
                                                    {0, 1, 1, 1, 1},
                                                    {-9, -9, -9, -9, -9}};
    double mp_tv[kLvActionCount][kTvActionCount] = {{0, 1, -9, -9, -9},
                                                    {1, 0, -9, -9, -9},
                                                    {0, 0, -9, -9, -9}};
    const TestGame mp = make_game(mp_lv, mp_tv);
    CHECK(solve_pure_ne(mp.matrix, mp.w, mp.w).empty());
}

TEST_CASE("NE selection prefers the welfare-maximal equilibrium") {
    std::mt19937_64 rng(1);
    const TestGame g = random_game(rng);
    const std::vector<std::pair<std::size_t, std::size_t>> two = {{0, 1}, {2, 3}};
    // Evaluate which of the two pairs has the higher payoff sum and expect it.
    auto sum_of = [&](std::pair<std::size_t, std::size_t> c) {
        return g.matrix.lv[c.first][c.second].safety + g.matrix.tv[c.first][c.second].safety;
    };
    const auto picked = select_ne_action(two, g.matrix, g.w, g.w);
    CHECK(sum_of(picked) >= sum_of(two[0]));
    CHECK(sum_of(picked) >= sum_of(two[1]));

    const std::vector<std::pair<std::size_t, std::size_t>> one = {{1, 4}};
    CHECK(select_ne_action(one, g.matrix, g.w, g.w) == one[0]);
}

TEST_CASE("NE selection falls back to maximin") {
    std::mt19937_64 rng(42);
    const TestGame g = random_game(rng);
    const auto picked = select_ne_action({}, g.matrix, g.w, g.w);

    // Brute-force security actions.
    std::size_t best_lv = 0, best_tv = 0;
    double best_lv_worst = -1e300, best_tv_worst = -1e300;
    for (std::size_t i = 0; i < kLvActionCount; ++i) {
        double worst = 1e300;
        for (std::size_t j = 0; j < kTvActionCount; ++j)
            worst = std::min(worst, g.matrix.lv[i][j].safety);
        if (worst > best_lv_worst) {
            best_lv_worst = worst;
            best_lv = i;
        }
    }
    for (std::size_t j = 0; j < kTvActionCount; ++j) {
        double worst = 1e300;
        for (std::size_t i = 0; i < kLvActionCount; ++i)
            worst = std::min(worst, g.matrix.tv[i][j].safety);
        if (worst > best_tv_worst) {
            best_tv_worst = worst;
            best_tv = j;
        }
    }
    CHECK(picked.first == best_lv);
    CHECK(picked.second == best_tv);
}

TEST_CASE("pure NE agrees with an independent double-loop oracle") {
    std::mt19937_64 rng(77);
    for (int k = 0; k < 300; ++k) {
        const TestGame g = random_game(rng);
        const auto fast = solve_pure_ne(g.matrix, g.w, g.w);
        std::vector<std::pair<std::size_t, std::size_t>> slow;
        for (std::size_t i = 0; i < kLvActionCount; ++i)
            for (std::size_t j = 0; j < kTvActionCount; ++j) {
                bool ne = true;
                for (std::size_t a = 0; a < kLvActionCount; ++a)
                    if (g.matrix.lv[a][j].safety > g.matrix.lv[i][j].safety) ne = false;
                for (std::size_t b = 0; b < kTvActionCount; ++b)
                    if (g.matrix.tv[i][b].safety > g.matrix.tv[i][j].safety) ne = false;
                if (ne) slow.emplace_back(i, j);
            }
        CHECK(fast == slow);
    }
}
