#include "lt/reference.hpp"

#include <cmath>
#include <vector>

namespace lt {

namespace {

// Deterministic state grid covering the Monte-Carlo initial-condition range
// (10-36 km/h, 10-40 m), used to pin the normalization constants.
std::vector<calib::DecisionFrame> normalization_grid() {
    std::vector<calib::DecisionFrame> frames;
    const std::vector<double> speeds = {10.0 / 3.6, 16.0 / 3.6, 22.0 / 3.6,
                                        29.0 / 3.6, 36.0 / 3.6};
    const std::vector<double> dists = {10.0, 17.5, 25.0, 32.5, 40.0};
    std::int64_t id = 0;
    for (double lv_v : speeds)
        for (double lv_d : dists)
            for (double tv_v : speeds)
                for (double tv_d : dists) {
                    calib::DecisionFrame f;
                    f.lv_state = {lv_v, lv_d, lv_d + 20.0, PlayerRole::LV};
                    f.tv_state = {tv_v, tv_d, tv_d + 20.0, PlayerRole::TV};
                    f.episode_id = id++;
                    frames.push_back(f);
                }
    return frames;
}

}  // namespace

calib::ModelParameters reference_parameters() {
    calib::CalibrationConfig config;
    calib::ModelParameters p =
        calib::initial_parameters(config, calib::compute_normalization(normalization_grid(), 1.0));

    // Safety-dominant weights. The LV's rule weight rises toward its braking
    // row, a mild yield bias that resolves near-tie arrivals without
    // overriding the safety ordering.
    p.weights_tv = WeightTensor::constant(0.70, 0.20, 0.10);
    for (std::size_t i = 0; i < kLvActionCount; ++i)
        for (std::size_t j = 0; j < kTvActionCount; ++j) {
            const double wr = 0.10 + (1.0 - static_cast<double>(i) / 2.0) * 0.06;
            p.weights_lv.w[0][i][j] = (1.0 - wr) * 7.0 / 9.0;
            p.weights_lv.w[1][i][j] = (1.0 - wr) * 2.0 / 9.0;
            p.weights_lv.w[2][i][j] = wr;
        }

    // Lambda magnitudes sized against the min-max normalized payoff scale,
    // where per-action differences are of order 0.01 to 0.1.
    for (std::size_t b = 0; b < p.lambda_lv.values.size(); ++b) {
        const double d = (static_cast<double>(b) + 0.5) * p.lambda_lv.bin_width;
        p.lambda_lv.values[b] = 200.0 + 500.0 * std::exp(-(d - 12.0) * (d - 12.0) / 72.0);
        p.lambda_tv.values[b] = 160.0 + 640.0 * std::exp(-d / 12.0);
    }
    p.config_hash = "reference";
    return p;
}

}  // namespace lt
