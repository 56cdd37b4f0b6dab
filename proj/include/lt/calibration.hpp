#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lt/game_core.hpp"
#include "lt/qre.hpp"
#include "lt/types.hpp"

namespace lt::calib {

// One labeled decision instant: both vehicle states plus the discrete action
// each driver actually took.
struct DecisionFrame {
    VehicleState lv_state;
    VehicleState tv_state;
    std::size_t lv_label = 0;  // index into the LV action set
    std::size_t tv_label = 0;  // index into the TV action set
    std::int64_t episode_id = 0;
    std::int64_t frame_id = 0;
};

struct CalibrationConfig {
    double em_tol = 0.01;
    int em_max_iter = 20;
    double learning_rate = 0.1;
    int batch_size = 32;
    int epochs_per_em_iter = 30;
    double smoothing_sigma = 1.0;  // in action-grid cells; 0 disables smoothing
    bool project_each_epoch = true;  // smoothing + simplex normalization cadence
    std::uint64_t seed = 0;
    double horizon = 1.0;          // projection horizon for matrix construction, s
    double train_fraction = 0.7;   // split by episode
    double lambda_bin_width = 2.0;     // m
    double lambda_max_distance = 40.0; // m

    bool valid() const {
        return em_tol > 0.0 && em_max_iter >= 1 && batch_size >= 1 &&
               epochs_per_em_iter >= 1 && smoothing_sigma >= 0.0;
    }
};

struct ModelParameters {
    WeightTensor weights_lv;
    WeightTensor weights_tv;
    qre::RationalityProfile lambda_lv;
    qre::RationalityProfile lambda_tv;
    game::NormalizationConstants normalization;
    std::uint64_t seed = 0;
    std::string config_hash;

    const WeightTensor& weights(PlayerRole role) const {
        return role == PlayerRole::LV ? weights_lv : weights_tv;
    }
    const qre::RationalityProfile& rationality(PlayerRole role) const {
        return role == PlayerRole::LV ? lambda_lv : lambda_tv;
    }
};

// Algorithm start point: weights (0.5, 0.3, 0.2) in every cell, all lambda
// bins at 2.0.
ModelParameters initial_parameters(const CalibrationConfig& config,
                                   const game::NormalizationConstants& norms);

// Min/max of raw safety and efficiency components over all projected cells of
// all frames, per role.
game::NormalizationConstants compute_normalization(const std::vector<DecisionFrame>& frames,
                                                   double horizon);

// Frame with its game matrix and lambda-bin indices precomputed; the matrix
// depends only on the frame states and the (fixed) normalization constants.
struct PreparedFrame {
    game::GameMatrix matrix;
    std::size_t lv_bin = 0;
    std::size_t tv_bin = 0;
    std::size_t lv_label = 0;
    std::size_t tv_label = 0;
    std::int64_t episode_id = 0;
};

std::vector<PreparedFrame> prepare_frames(const std::vector<DecisionFrame>& frames,
                                          const ModelParameters& params, double horizon);

// Opponent strategies held constant during the M-step, one entry per frame.
struct StrategyCache {
    std::vector<MixedStrategy> p_lv;
    std::vector<MixedStrategy> p_tv;
};

StrategyCache uniform_cache(std::size_t n_frames);

// Mean NLL of the labeled actions of both players under the logit model, with
// opponent strategies from the cache treated as constants. Probabilities below
// 1e-12 are clamped in the log; `flagged` (optional) counts such frames.
double negative_log_likelihood(const ModelParameters& params,
                               const std::vector<PreparedFrame>& frames,
                               const std::vector<std::size_t>& indices,
                               const StrategyCache& cache, std::size_t* flagged = nullptr);

struct Gradients {
    WeightTensor d_weights_lv{};
    WeightTensor d_weights_tv{};
    std::vector<double> d_lambda_lv;
    std::vector<double> d_lambda_tv;
};

// Exact gradients of the mean NLL over `indices` with respect to every weight
// entry and every lambda bin, opponent strategies constant.
Gradients gradients(const ModelParameters& params, const std::vector<PreparedFrame>& frames,
                    const std::vector<std::size_t>& indices, const StrategyCache& cache);

// params -= lr * grads, then lambda bins clamped to >= 0.
void sgd_step(ModelParameters& params, const Gradients& grads, double learning_rate);

// Truncated 3x3 Gaussian convolution of each component plane over the action
// grid, kernel renormalized at boundaries. sigma = 0 is the identity.
WeightTensor smooth_weights(const WeightTensor& w, double sigma);

// Clamp entries to >= 1e-6, then renormalize each cell's three components to
// sum to one.
WeightTensor normalize_weights(const WeightTensor& w);

struct EmHistoryRow {
    int em_iter = 0;
    double mean_prob_change = 0.0;
    double train_nll = 0.0;
    double val_accuracy_lv = 0.0;
    double val_accuracy_tv = 0.0;
};

struct CalibrationResult {
    ModelParameters params;
    std::vector<EmHistoryRow> history;
    bool converged = false;
};

CalibrationResult em_calibrate(const std::vector<DecisionFrame>& frames,
                               const CalibrationConfig& config);

// Fraction of frames where the argmax of the per-frame QRE strategy (ties
// broken toward the lowest index) matches the label, per player.
std::pair<double, double> predict_accuracy(const ModelParameters& params,
                                           const std::vector<DecisionFrame>& frames,
                                           double horizon = 1.0);

// Per-frame QRE choice distributions under `params` (uniform init, default
// solver options).
qre::QreSolution solve_frame(const ModelParameters& params, const VehicleState& lv,
                             const VehicleState& tv, double horizon = 1.0);

// JSON parameter file round trip; full-precision, lossless.
void save_params(const ModelParameters& params, const std::string& path);
ModelParameters load_params(const std::string& path);
std::string params_to_json(const ModelParameters& params);
ModelParameters params_from_json(const std::string& text);

void save_history(const std::vector<EmHistoryRow>& history, const std::string& path);

}  // namespace lt::calib
