#include "lt/qre.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lt::qre {

namespace {
constexpr double kLambdaCap = 1e4;
}

RationalityProfile RationalityProfile::constant(double lambda, double bin_width,
                                                double max_distance) {
    RationalityProfile p;
    p.bin_width = bin_width;
    p.max_distance = max_distance;
    const auto n = static_cast<std::size_t>(std::ceil(max_distance / bin_width));
    p.values.assign(n, std::max(0.0, lambda));
    return p;
}

double lookup_lambda(const RationalityProfile& profile, double dist_to_conflict) {
    if (profile.values.empty()) throw std::invalid_argument("lookup_lambda: empty profile");
    auto idx = static_cast<std::size_t>(std::floor(std::max(0.0, dist_to_conflict) /
                                                   profile.bin_width));
    idx = std::min(idx, profile.values.size() - 1);
    return profile.values[idx];
}

std::vector<double> expected_payoffs(const game::GameMatrix& game, const WeightTensor& weights,
                                     const MixedStrategy& opponent, PlayerRole role) {
    const std::size_t own_n = role == PlayerRole::LV ? kLvActionCount : kTvActionCount;
    const std::size_t opp_n = role == PlayerRole::LV ? kTvActionCount : kLvActionCount;
    if (opponent.size() != opp_n)
        throw std::invalid_argument("expected_payoffs: opponent strategy dimension mismatch");

    std::vector<double> expected(own_n, 0.0);
    for (std::size_t i = 0; i < own_n; ++i) {
        double e = 0.0;
        for (std::size_t j = 0; j < opp_n; ++j) {
            const std::size_t lv_idx = role == PlayerRole::LV ? i : j;
            const std::size_t tv_idx = role == PlayerRole::LV ? j : i;
            e += opponent.probs[j] * game::scalar_payoff(game, weights, role, lv_idx, tv_idx);
        }
        expected[i] = e;
    }
    return expected;
}

MixedStrategy logit_response(const std::vector<double>& expected, double lambda) {
    lambda = std::clamp(lambda, 0.0, kLambdaCap);
    const double m = *std::max_element(expected.begin(), expected.end());
    MixedStrategy out;
    out.probs.resize(expected.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        out.probs[i] = std::exp(lambda * (expected[i] - m));
        sum += out.probs[i];
    }
    for (double& p : out.probs) p /= sum;
    return out;
}

namespace {

double max_abs_change(const MixedStrategy& a, const MixedStrategy& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.probs[i] - b.probs[i]));
    return m;
}

MixedStrategy damp(const MixedStrategy& fresh, const MixedStrategy& old, double damping) {
    if (damping <= 0.0) return fresh;
    MixedStrategy out = fresh;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.probs[i] = (1.0 - damping) * fresh.probs[i] + damping * old.probs[i];
    return out;
}

void check_finite(const game::GameMatrix& game, const WeightTensor& wl, const WeightTensor& wt) {
    for (std::size_t i = 0; i < kLvActionCount; ++i)
        for (std::size_t j = 0; j < kTvActionCount; ++j) {
            if (!std::isfinite(game::scalar_payoff(game, wl, PlayerRole::LV, i, j)) ||
                !std::isfinite(game::scalar_payoff(game, wt, PlayerRole::TV, i, j)))
                throw std::invalid_argument("solve_qre: non-finite payoff");
        }
}

}  // namespace

QreSolution solve_qre(const game::GameMatrix& game, const WeightTensor& weights_lv,
                      const WeightTensor& weights_tv, double lambda_lv, double lambda_tv,
                      const MixedStrategy& init_lv, const MixedStrategy& init_tv,
                      const QreOptions& opts) {
    if (opts.tol <= 0.0 || opts.max_iter < 1)
        throw std::invalid_argument("solve_qre: invalid tolerance or iteration limit");
    check_finite(game, weights_lv, weights_tv);

    QreSolution sol;
    sol.p_lv = init_lv;
    sol.p_tv = init_tv;

    for (int it = 0; it < opts.max_iter; ++it) {
        MixedStrategy tv_next, lv_next;
        if (opts.jacobi) {
            tv_next = logit_response(
                expected_payoffs(game, weights_tv, sol.p_lv, PlayerRole::TV), lambda_tv);
            lv_next = logit_response(
                expected_payoffs(game, weights_lv, sol.p_tv, PlayerRole::LV), lambda_lv);
        } else {
            // Gauss-Seidel: TV responds to the current LV, LV to the fresh TV.
            tv_next = logit_response(
                expected_payoffs(game, weights_tv, sol.p_lv, PlayerRole::TV), lambda_tv);
            lv_next = logit_response(
                expected_payoffs(game, weights_lv, tv_next, PlayerRole::LV), lambda_lv);
        }
        tv_next = damp(tv_next, sol.p_tv, opts.damping);
        lv_next = damp(lv_next, sol.p_lv, opts.damping);

        sol.residual = std::max(max_abs_change(tv_next, sol.p_tv),
                                max_abs_change(lv_next, sol.p_lv));
        sol.p_tv = std::move(tv_next);
        sol.p_lv = std::move(lv_next);
        sol.iterations = it + 1;
        if (sol.residual < opts.tol) {
            sol.converged = true;
            break;
        }
    }
    return sol;
}

std::vector<std::pair<std::size_t, std::size_t>> solve_pure_ne(const game::GameMatrix& game,
                                                               const WeightTensor& weights_lv,
                                                               const WeightTensor& weights_tv) {
    double lv_pay[kLvActionCount][kTvActionCount];
    double tv_pay[kLvActionCount][kTvActionCount];
    for (std::size_t i = 0; i < kLvActionCount; ++i)
        for (std::size_t j = 0; j < kTvActionCount; ++j) {
            lv_pay[i][j] = game::scalar_payoff(game, weights_lv, PlayerRole::LV, i, j);
            tv_pay[i][j] = game::scalar_payoff(game, weights_tv, PlayerRole::TV, i, j);
        }

    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < kLvActionCount; ++i)
        for (std::size_t j = 0; j < kTvActionCount; ++j) {
            bool best = true;
            for (std::size_t k = 0; k < kLvActionCount && best; ++k)
                if (lv_pay[k][j] > lv_pay[i][j]) best = false;
            for (std::size_t k = 0; k < kTvActionCount && best; ++k)
                if (tv_pay[i][k] > tv_pay[i][j]) best = false;
            if (best) out.emplace_back(i, j);
        }
    return out;
}

std::pair<std::size_t, std::size_t> select_ne_action(
    const std::vector<std::pair<std::size_t, std::size_t>>& solutions,
    const game::GameMatrix& game, const WeightTensor& weights_lv, const WeightTensor& weights_tv) {
    if (!solutions.empty()) {
        std::pair<std::size_t, std::size_t> best = solutions.front();
        double best_sum = -std::numeric_limits<double>::infinity();
        for (const auto& [i, j] : solutions) {
            const double sum = game::scalar_payoff(game, weights_lv, PlayerRole::LV, i, j) +
                               game::scalar_payoff(game, weights_tv, PlayerRole::TV, i, j);
            if (sum > best_sum + 1e-15 ||
                (std::abs(sum - best_sum) <= 1e-15 && std::pair(i, j) < best)) {
                best_sum = sum;
                best = {i, j};
            }
        }
        return best;
    }

    // Maximin fallback when no pure NE exists.
    auto security = [&](PlayerRole role) {
        const std::size_t own_n = role == PlayerRole::LV ? kLvActionCount : kTvActionCount;
        const std::size_t opp_n = role == PlayerRole::LV ? kTvActionCount : kLvActionCount;
        const WeightTensor& w = role == PlayerRole::LV ? weights_lv : weights_tv;
        std::size_t best = 0;
        double best_worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < own_n; ++i) {
            double worst = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < opp_n; ++j) {
                const std::size_t lv_idx = role == PlayerRole::LV ? i : j;
                const std::size_t tv_idx = role == PlayerRole::LV ? j : i;
                worst = std::min(worst, game::scalar_payoff(game, w, role, lv_idx, tv_idx));
            }
            if (worst > best_worst) {
                best_worst = worst;
                best = i;
            }
        }
        return best;
    };
    return {security(PlayerRole::LV), security(PlayerRole::TV)};
}

}  // namespace lt::qre
