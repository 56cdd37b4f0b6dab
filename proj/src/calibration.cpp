#include "lt/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lt/rng.hpp"

namespace lt::calib {

using nlohmann::json;

ModelParameters initial_parameters(const CalibrationConfig& config,
                                   const game::NormalizationConstants& norms) {
    ModelParameters p;
    p.weights_lv = WeightTensor::constant(0.5, 0.3, 0.2);
    p.weights_tv = WeightTensor::constant(0.5, 0.3, 0.2);
    p.lambda_lv = qre::RationalityProfile::constant(2.0, config.lambda_bin_width,
                                                    config.lambda_max_distance);
    p.lambda_tv = qre::RationalityProfile::constant(2.0, config.lambda_bin_width,
                                                    config.lambda_max_distance);
    p.normalization = norms;
    p.seed = config.seed;
    return p;
}

game::NormalizationConstants compute_normalization(const std::vector<DecisionFrame>& frames,
                                                   double horizon) {
    if (frames.empty()) throw std::invalid_argument("compute_normalization: no frames");
    auto init = [] {
        game::ComponentRange r;
        r.min = std::numeric_limits<double>::infinity();
        r.max = -std::numeric_limits<double>::infinity();
        return r;
    };
    game::ComponentRange lv_s = init(), lv_e = init(), tv_s = init(), tv_e = init();
    auto absorb = [](game::ComponentRange& r, double v) {
        r.min = std::min(r.min, v);
        r.max = std::max(r.max, v);
    };

    const ActionSet lv_actions = ActionSet::lv();
    const ActionSet tv_actions = ActionSet::tv();
    for (const DecisionFrame& f : frames) {
        for (std::size_t i = 0; i < kLvActionCount; ++i) {
            VehicleState lv = game::project_state(f.lv_state, lv_actions[i], horizon);
            lv.dist_to_conflict = std::max(0.0, lv.dist_to_conflict);
            for (std::size_t j = 0; j < kTvActionCount; ++j) {
                VehicleState tv = game::project_state(f.tv_state, tv_actions[j], horizon);
                tv.dist_to_conflict = std::max(0.0, tv.dist_to_conflict);
                absorb(lv_s, game::safety_payoff(lv, tv));
                absorb(lv_e, game::efficiency_payoff(lv));
                absorb(tv_s, game::safety_payoff(tv, lv));
                absorb(tv_e, game::efficiency_payoff(tv));
            }
        }
    }
    // Degenerate ranges (single-frame datasets) get a token width.
    for (game::ComponentRange* r : {&lv_s, &lv_e, &tv_s, &tv_e})
        if (r->max - r->min < 1e-9) r->max = r->min + 1.0;

    game::NormalizationConstants n;
    n.lv_safety = lv_s;
    n.lv_efficiency = lv_e;
    n.tv_safety = tv_s;
    n.tv_efficiency = tv_e;
    return n;
}

std::vector<PreparedFrame> prepare_frames(const std::vector<DecisionFrame>& frames,
                                          const ModelParameters& params, double horizon) {
    std::vector<PreparedFrame> out;
    out.reserve(frames.size());
    for (const DecisionFrame& f : frames) {
        PreparedFrame p;
        p.matrix = game::build_game_matrix(f.lv_state, f.tv_state, horizon, params.normalization);
        auto bin_of = [](const qre::RationalityProfile& prof, double d) {
            auto idx = static_cast<std::size_t>(std::floor(std::max(0.0, d) / prof.bin_width));
            return std::min(idx, prof.values.size() - 1);
        };
        p.lv_bin = bin_of(params.lambda_lv, f.lv_state.dist_to_conflict);
        p.tv_bin = bin_of(params.lambda_tv, f.tv_state.dist_to_conflict);
        p.lv_label = f.lv_label;
        p.tv_label = f.tv_label;
        p.episode_id = f.episode_id;
        out.push_back(std::move(p));
    }
    return out;
}

StrategyCache uniform_cache(std::size_t n_frames) {
    StrategyCache c;
    c.p_lv.assign(n_frames, MixedStrategy::uniform(kLvActionCount));
    c.p_tv.assign(n_frames, MixedStrategy::uniform(kTvActionCount));
    return c;
}

namespace {

struct PlayerEval {
    std::vector<double> expected;
    MixedStrategy probs;
    double lambda = 0.0;
};

PlayerEval eval_player(const ModelParameters& params, const PreparedFrame& f,
                       const StrategyCache& cache, std::size_t frame_idx, PlayerRole role) {
    PlayerEval ev;
    const MixedStrategy& opp = role == PlayerRole::LV ? cache.p_tv[frame_idx]
                                                      : cache.p_lv[frame_idx];
    ev.expected = qre::expected_payoffs(f.matrix, params.weights(role), opp, role);
    ev.lambda = role == PlayerRole::LV ? params.lambda_lv.values[f.lv_bin]
                                       : params.lambda_tv.values[f.tv_bin];
    ev.probs = qre::logit_response(ev.expected, ev.lambda);
    return ev;
}

}  // namespace

double negative_log_likelihood(const ModelParameters& params,
                               const std::vector<PreparedFrame>& frames,
                               const std::vector<std::size_t>& indices,
                               const StrategyCache& cache, std::size_t* flagged) {
    if (indices.empty()) return 0.0;
    double nll = 0.0;
    std::size_t n_flagged = 0;
    for (std::size_t idx : indices) {
        const PreparedFrame& f = frames[idx];
        const PlayerEval lv = eval_player(params, f, cache, idx, PlayerRole::LV);
        const PlayerEval tv = eval_player(params, f, cache, idx, PlayerRole::TV);
        double p_lv = lv.probs.probs[f.lv_label];
        double p_tv = tv.probs.probs[f.tv_label];
        if (p_lv < 1e-12 || p_tv < 1e-12) ++n_flagged;
        nll -= std::log(std::max(p_lv, 1e-12)) + std::log(std::max(p_tv, 1e-12));
    }
    if (flagged) *flagged = n_flagged;
    return nll / static_cast<double>(indices.size());
}

Gradients gradients(const ModelParameters& params, const std::vector<PreparedFrame>& frames,
                    const std::vector<std::size_t>& indices, const StrategyCache& cache) {
    Gradients g;
    g.d_lambda_lv.assign(params.lambda_lv.values.size(), 0.0);
    g.d_lambda_tv.assign(params.lambda_tv.values.size(), 0.0);
    if (indices.empty()) return g;
    const double inv_n = 1.0 / static_cast<double>(indices.size());

    for (std::size_t idx : indices) {
        const PreparedFrame& f = frames[idx];

        // LV: logits = lambda * E_i, E_i = sum_j q_j * J(i, j).
        {
            const PlayerEval ev = eval_player(params, f, cache, idx, PlayerRole::LV);
            const MixedStrategy& q = cache.p_tv[idx];
            for (std::size_t i = 0; i < kLvActionCount; ++i) {
                const double delta = ev.probs.probs[i] - (i == f.lv_label ? 1.0 : 0.0);
                g.d_lambda_lv[f.lv_bin] += inv_n * delta * ev.expected[i];
                const double coeff = inv_n * ev.lambda * delta;
                for (std::size_t j = 0; j < kTvActionCount; ++j) {
                    const PayoffComponents& c = f.matrix.lv[i][j];
                    g.d_weights_lv.w[0][i][j] += coeff * q.probs[j] * c.safety;
                    g.d_weights_lv.w[1][i][j] += coeff * q.probs[j] * c.efficiency;
                    g.d_weights_lv.w[2][i][j] += coeff * q.probs[j] * c.rule;
                }
            }
        }
        // TV: logits over j, E_j = sum_i p_i * J(i, j).
        {
            const PlayerEval ev = eval_player(params, f, cache, idx, PlayerRole::TV);
            const MixedStrategy& q = cache.p_lv[idx];
            for (std::size_t j = 0; j < kTvActionCount; ++j) {
                const double delta = ev.probs.probs[j] - (j == f.tv_label ? 1.0 : 0.0);
                g.d_lambda_tv[f.tv_bin] += inv_n * delta * ev.expected[j];
                const double coeff = inv_n * ev.lambda * delta;
                for (std::size_t i = 0; i < kLvActionCount; ++i) {
                    const PayoffComponents& c = f.matrix.tv[i][j];
                    g.d_weights_tv.w[0][i][j] += coeff * q.probs[i] * c.safety;
                    g.d_weights_tv.w[1][i][j] += coeff * q.probs[i] * c.efficiency;
                    g.d_weights_tv.w[2][i][j] += coeff * q.probs[i] * c.rule;
                }
            }
        }
    }
    return g;
}

void sgd_step(ModelParameters& params, const Gradients& grads, double learning_rate) {
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < kLvActionCount; ++i)
            for (std::size_t j = 0; j < kTvActionCount; ++j) {
                params.weights_lv.w[c][i][j] -= learning_rate * grads.d_weights_lv.w[c][i][j];
                params.weights_tv.w[c][i][j] -= learning_rate * grads.d_weights_tv.w[c][i][j];
            }
    for (std::size_t b = 0; b < params.lambda_lv.values.size(); ++b)
        params.lambda_lv.values[b] =
            std::max(0.0, params.lambda_lv.values[b] - learning_rate * grads.d_lambda_lv[b]);
    for (std::size_t b = 0; b < params.lambda_tv.values.size(); ++b)
        params.lambda_tv.values[b] =
            std::max(0.0, params.lambda_tv.values[b] - learning_rate * grads.d_lambda_tv[b]);
}

WeightTensor smooth_weights(const WeightTensor& w, double sigma) {
    if (sigma <= 0.0) return w;
    double kernel[3][3];
    for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj)
            kernel[di + 1][dj + 1] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));

    WeightTensor out;
    for (std::size_t c = 0; c < 3; ++c)
        for (int i = 0; i < static_cast<int>(kLvActionCount); ++i)
            for (int j = 0; j < static_cast<int>(kTvActionCount); ++j) {
                double acc = 0.0, norm = 0.0;
                for (int di = -1; di <= 1; ++di)
                    for (int dj = -1; dj <= 1; ++dj) {
                        const int ii = i + di, jj = j + dj;
                        if (ii < 0 || ii >= static_cast<int>(kLvActionCount) || jj < 0 ||
                            jj >= static_cast<int>(kTvActionCount))
                            continue;
                        acc += kernel[di + 1][dj + 1] * w.w[c][ii][jj];
                        norm += kernel[di + 1][dj + 1];
                    }
                out.w[c][i][j] = acc / norm;
            }
    return out;
}

WeightTensor normalize_weights(const WeightTensor& w) {
    WeightTensor out = w;
    for (std::size_t i = 0; i < kLvActionCount; ++i)
        for (std::size_t j = 0; j < kTvActionCount; ++j) {
            double sum = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                out.w[c][i][j] = std::max(out.w[c][i][j], 1e-6);
                sum += out.w[c][i][j];
            }
            for (std::size_t c = 0; c < 3; ++c) out.w[c][i][j] /= sum;
        }
    return out;
}

qre::QreSolution solve_frame(const ModelParameters& params, const VehicleState& lv,
                             const VehicleState& tv, double horizon) {
    const game::GameMatrix m = game::build_game_matrix(lv, tv, horizon, params.normalization);
    const double lam_lv = qre::lookup_lambda(params.lambda_lv, lv.dist_to_conflict);
    const double lam_tv = qre::lookup_lambda(params.lambda_tv, tv.dist_to_conflict);
    return qre::solve_qre(m, params.weights_lv, params.weights_tv, lam_lv, lam_tv,
                          MixedStrategy::uniform(kLvActionCount),
                          MixedStrategy::uniform(kTvActionCount));
}

std::pair<double, double> predict_accuracy(const ModelParameters& params,
                                           const std::vector<DecisionFrame>& frames,
                                           double horizon) {
    if (frames.empty()) return {0.0, 0.0};
    std::size_t lv_hits = 0, tv_hits = 0;
    for (const DecisionFrame& f : frames) {
        const qre::QreSolution sol = solve_frame(params, f.lv_state, f.tv_state, horizon);
        if (sol.p_lv.argmax() == f.lv_label) ++lv_hits;
        if (sol.p_tv.argmax() == f.tv_label) ++tv_hits;
    }
    const double n = static_cast<double>(frames.size());
    return {lv_hits / n, tv_hits / n};
}

namespace {

// Argmax-vs-label accuracy with the opponent strategies frozen; used for the
// per-epoch snapshot selection inside an M-step.
std::pair<double, double> cached_accuracy(const ModelParameters& params,
                                          const std::vector<PreparedFrame>& frames,
                                          const std::vector<std::size_t>& indices,
                                          const StrategyCache& cache) {
    if (indices.empty()) return {0.0, 0.0};
    std::size_t lv_hits = 0, tv_hits = 0;
    for (std::size_t idx : indices) {
        const PreparedFrame& f = frames[idx];
        const PlayerEval lv = eval_player(params, f, cache, idx, PlayerRole::LV);
        const PlayerEval tv = eval_player(params, f, cache, idx, PlayerRole::TV);
        if (lv.probs.argmax() == f.lv_label) ++lv_hits;
        if (tv.probs.argmax() == f.tv_label) ++tv_hits;
    }
    const double n = static_cast<double>(indices.size());
    return {lv_hits / n, tv_hits / n};
}

StrategyCache e_step(const ModelParameters& params, const std::vector<PreparedFrame>& frames,
                     const StrategyCache& warm) {
    StrategyCache next;
    next.p_lv.reserve(frames.size());
    next.p_tv.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const PreparedFrame& f = frames[i];
        const qre::QreSolution sol = qre::solve_qre(
            f.matrix, params.weights_lv, params.weights_tv, params.lambda_lv.values[f.lv_bin],
            params.lambda_tv.values[f.tv_bin], warm.p_lv[i], warm.p_tv[i]);
        next.p_lv.push_back(sol.p_lv);
        next.p_tv.push_back(sol.p_tv);
    }
    return next;
}

double mean_prob_change(const StrategyCache& a, const StrategyCache& b) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < a.p_lv.size(); ++i) {
        for (std::size_t k = 0; k < kLvActionCount; ++k, ++count)
            sum += std::abs(a.p_lv[i].probs[k] - b.p_lv[i].probs[k]);
        for (std::size_t k = 0; k < kTvActionCount; ++k, ++count)
            sum += std::abs(a.p_tv[i].probs[k] - b.p_tv[i].probs[k]);
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace

CalibrationResult em_calibrate(const std::vector<DecisionFrame>& frames,
                               const CalibrationConfig& config) {
    if (frames.empty()) throw std::invalid_argument("em_calibrate: no frames");
    if (!config.valid()) throw std::invalid_argument("em_calibrate: invalid config");

    const game::NormalizationConstants norms = compute_normalization(frames, config.horizon);
    ModelParameters params = initial_parameters(config, norms);
    const std::vector<PreparedFrame> prepared = prepare_frames(frames, params, config.horizon);

    // 70/30 split by episode to avoid leakage between correlated frames.
    std::vector<std::int64_t> episodes;
    for (const auto& f : frames) episodes.push_back(f.episode_id);
    std::sort(episodes.begin(), episodes.end());
    episodes.erase(std::unique(episodes.begin(), episodes.end()), episodes.end());
    {
        auto rng = make_rng(config.seed, "episode-split");
        std::shuffle(episodes.begin(), episodes.end(), rng);
    }
    const std::size_t n_train_ep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.train_fraction *
                                                 static_cast<double>(episodes.size()))));
    std::set<std::int64_t> train_eps(episodes.begin(), episodes.begin() + n_train_ep);
    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i < prepared.size(); ++i)
        (train_eps.count(prepared[i].episode_id) ? train_idx : val_idx).push_back(i);
    if (val_idx.empty()) val_idx = train_idx;

    StrategyCache cache = uniform_cache(prepared.size());

    CalibrationResult result;
    for (int em_iter = 0; em_iter < config.em_max_iter; ++em_iter) {
        // M-step: mini-batch SGD against the frozen cache, snapshotting the
        // best validation-accuracy epoch.
        ModelParameters best = params;
        double best_acc = -1.0;
        for (int epoch = 0; epoch < config.epochs_per_em_iter; ++epoch) {
            std::vector<std::size_t> order = train_idx;
            auto rng = make_rng(config.seed, "shuffle",
                                hash_combine(static_cast<std::uint64_t>(em_iter),
                                             static_cast<std::uint64_t>(epoch)));
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t start = 0; start < order.size();
                 start += static_cast<std::size_t>(config.batch_size)) {
                const std::size_t end =
                    std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
                std::vector<std::size_t> batch(order.begin() + start, order.begin() + end);
                sgd_step(params, gradients(params, prepared, batch, cache),
                         config.learning_rate);
            }
            if (config.project_each_epoch) {
                params.weights_lv =
                    normalize_weights(smooth_weights(params.weights_lv, config.smoothing_sigma));
                params.weights_tv =
                    normalize_weights(smooth_weights(params.weights_tv, config.smoothing_sigma));
            }
            const auto [acc_lv, acc_tv] = cached_accuracy(params, prepared, val_idx, cache);
            if (0.5 * (acc_lv + acc_tv) > best_acc) {
                best_acc = 0.5 * (acc_lv + acc_tv);
                best = params;
            }
        }
        params = best;

        const double train_nll = negative_log_likelihood(params, prepared, train_idx, cache);
        if (!std::isfinite(train_nll))
            throw std::runtime_error("em_calibrate: non-finite loss at EM iteration " +
                                     std::to_string(em_iter + 1));

        // E-step: recompute every frame's equilibrium under the new parameters.
        StrategyCache next = e_step(params, prepared, cache);
        const double change = mean_prob_change(next, cache);
        cache = std::move(next);

        const auto [val_lv, val_tv] = cached_accuracy(params, prepared, val_idx, cache);
        result.history.push_back({em_iter + 1, change, train_nll, val_lv, val_tv});
        if (change < config.em_tol) {
            result.converged = true;
            break;
        }
    }
    result.params = params;
    return result;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json weights_to_json(const WeightTensor& w) {
    json out = json::array();
    for (std::size_t c = 0; c < 3; ++c) {
        json plane = json::array();
        for (std::size_t i = 0; i < kLvActionCount; ++i) {
            json row = json::array();
            for (std::size_t j = 0; j < kTvActionCount; ++j) row.push_back(w.w[c][i][j]);
            plane.push_back(row);
        }
        out.push_back(plane);
    }
    return out;
}

WeightTensor weights_from_json(const json& j) {
    WeightTensor w;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < kLvActionCount; ++i)
            for (std::size_t jj = 0; jj < kTvActionCount; ++jj)
                w.w[c][i][jj] = j.at(c).at(i).at(jj).get<double>();
    return w;
}

json profile_to_json(const qre::RationalityProfile& p) {
    return json{{"bin_width", p.bin_width},
                {"max_distance", p.max_distance},
                {"values", p.values}};
}

qre::RationalityProfile profile_from_json(const json& j) {
    qre::RationalityProfile p;
    p.bin_width = j.at("bin_width").get<double>();
    p.max_distance = j.at("max_distance").get<double>();
    p.values = j.at("values").get<std::vector<double>>();
    return p;
}

json range_to_json(const game::ComponentRange& r) {
    return json{{"min", r.min}, {"max", r.max}};
}

game::ComponentRange range_from_json(const json& j) {
    return {j.at("min").get<double>(), j.at("max").get<double>()};
}

}  // namespace

std::string params_to_json(const ModelParameters& p) {
    json j{{"format", "lt-params"},
           {"version", 1},
           {"shape", {{"components", 3}, {"lv_actions", kLvActionCount},
                      {"tv_actions", kTvActionCount}}},
           {"weights_lv", weights_to_json(p.weights_lv)},
           {"weights_tv", weights_to_json(p.weights_tv)},
           {"lambda_lv", profile_to_json(p.lambda_lv)},
           {"lambda_tv", profile_to_json(p.lambda_tv)},
           {"normalization",
            {{"lv_safety", range_to_json(p.normalization.lv_safety)},
             {"lv_efficiency", range_to_json(p.normalization.lv_efficiency)},
             {"tv_safety", range_to_json(p.normalization.tv_safety)},
             {"tv_efficiency", range_to_json(p.normalization.tv_efficiency)}}},
           {"seed", p.seed},
           {"config_hash", p.config_hash}};
    return j.dump(2);
}

ModelParameters params_from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.value("format", "") != "lt-params")
        throw std::runtime_error("parameter file: unrecognized format");
    ModelParameters p;
    p.weights_lv = weights_from_json(j.at("weights_lv"));
    p.weights_tv = weights_from_json(j.at("weights_tv"));
    p.lambda_lv = profile_from_json(j.at("lambda_lv"));
    p.lambda_tv = profile_from_json(j.at("lambda_tv"));
    const json& n = j.at("normalization");
    p.normalization.lv_safety = range_from_json(n.at("lv_safety"));
    p.normalization.lv_efficiency = range_from_json(n.at("lv_efficiency"));
    p.normalization.tv_safety = range_from_json(n.at("tv_safety"));
    p.normalization.tv_efficiency = range_from_json(n.at("tv_efficiency"));
    p.seed = j.value("seed", std::uint64_t{0});
    p.config_hash = j.value("config_hash", "");
    return p;
}

void save_params(const ModelParameters& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write parameter file: " + path);
    out << params_to_json(params) << "\n";
}

ModelParameters load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read parameter file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return params_from_json(ss.str());
}

void save_history(const std::vector<EmHistoryRow>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write history file: " + path);
    out << "em_iter,mean_prob_change,train_nll,val_accuracy_lv,val_accuracy_tv\n";
    out.precision(17);
    for (const EmHistoryRow& r : history)
        out << r.em_iter << ',' << r.mean_prob_change << ',' << r.train_nll << ','
            << r.val_accuracy_lv << ',' << r.val_accuracy_tv << '\n';
}

}  // namespace lt::calib
