#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "lt/game_core.hpp"
#include "lt/types.hpp"

namespace lt::qre {

// Bounded-rationality values lambda over discretized distance-to-conflict bins.
struct RationalityProfile {
    std::vector<double> values;  // lambda >= 0 per bin
    double bin_width = 2.0;      // m
    double max_distance = 40.0;  // m

    static RationalityProfile constant(double lambda, double bin_width = 2.0,
                                       double max_distance = 40.0);
    std::size_t bin_count() const { return values.size(); }
};

// Bin lookup with clamp to the last bin for d >= max_distance.
double lookup_lambda(const RationalityProfile& profile, double dist_to_conflict);

struct QreOptions {
    double tol = 1e-10;
    int max_iter = 1000;
    double damping = 0.0;   // 0 = undamped; p' = (1-damping)*update + damping*p
    bool jacobi = false;    // simultaneous updates instead of TV-then-LV
};

struct QreSolution {
    MixedStrategy p_lv;
    MixedStrategy p_tv;
    int iterations = 0;
    double residual = 0.0;  // max abs probability change in the last iteration
    bool converged = false;
};

// Expected scalarized payoff of each own action against the opponent's mixed
// strategy: E_i = sum_j q_j * J^role(i, j).
std::vector<double> expected_payoffs(const game::GameMatrix& game, const WeightTensor& weights,
                                     const MixedStrategy& opponent, PlayerRole role);

// Logit choice probabilities p_i ∝ exp(lambda * E_i), max-subtracted.
// Lambda is clamped to [0, 1e4].
MixedStrategy logit_response(const std::vector<double>& expected, double lambda);

// Fixed-point iteration of the two logit responses.
QreSolution solve_qre(const game::GameMatrix& game, const WeightTensor& weights_lv,
                      const WeightTensor& weights_tv, double lambda_lv, double lambda_tv,
                      const MixedStrategy& init_lv, const MixedStrategy& init_tv,
                      const QreOptions& opts = {});

// Exhaustive pure-strategy Nash enumeration over the scalarized bimatrix.
// Returns all cells where each player's payoff is maximal against the other's
// fixed action; ties included.
std::vector<std::pair<std::size_t, std::size_t>> solve_pure_ne(const game::GameMatrix& game,
                                                               const WeightTensor& weights_lv,
                                                               const WeightTensor& weights_tv);

// Picks the NE maximizing the sum of both players' payoffs (ties broken by
// lowest lexicographic index pair); with no pure NE, each player plays its
// security (maximin) action.
std::pair<std::size_t, std::size_t> select_ne_action(
    const std::vector<std::pair<std::size_t, std::size_t>>& solutions,
    const game::GameMatrix& game, const WeightTensor& weights_lv, const WeightTensor& weights_tv);

}  // namespace lt::qre
