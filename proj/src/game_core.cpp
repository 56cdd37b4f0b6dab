#include "lt/game_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lt::game {

double ttcp(const VehicleState& state) {
    if (state.dist_to_conflict < 0.0)
        throw std::domain_error("ttcp: vehicle already past the conflict point");
    return state.dist_to_conflict / std::max(state.speed, kSpeedFloor);
}

double rttc(double self_ttcp, double other_ttcp) {
    return std::abs(self_ttcp - other_ttcp);
}

double safety_payoff(const VehicleState& self, const VehicleState& other) {
    const double t_self = ttcp(self);
    const double t_other = ttcp(other);
    return t_self + rttc(t_self, t_other);
}

double efficiency_payoff(const VehicleState& state) {
    return -state.dist_to_destination / std::max(state.speed, kSpeedFloor);
}

double rule_payoff(PlayerRole role) {
    return role == PlayerRole::LV ? 0.5 : 1.0;
}

VehicleState project_state(const VehicleState& state, double accel, double horizon) {
    if (horizon <= 0.0) throw std::invalid_argument("project_state: horizon must be > 0");
    VehicleState out = state;
    double travel;
    const double v_end = state.speed + accel * horizon;
    if (v_end >= 0.0) {
        travel = state.speed * horizon + 0.5 * accel * horizon * horizon;
    } else {
        // Speed hits 0 at t*; the vehicle stays stopped afterwards.
        const double t_stop = -state.speed / accel;
        travel = state.speed * t_stop + 0.5 * accel * t_stop * t_stop;
    }
    out.speed = std::max(0.0, v_end);
    out.dist_to_conflict -= travel;
    out.dist_to_destination = std::max(0.0, out.dist_to_destination - travel);
    return out;
}

double scalar_payoff(const GameMatrix& game, const WeightTensor& weights, PlayerRole role,
                     std::size_t lv_index, std::size_t tv_index) {
    const PayoffComponents& c = game.at(role, lv_index, tv_index);
    return weights.w[0][lv_index][tv_index] * c.safety +
           weights.w[1][lv_index][tv_index] * c.efficiency +
           weights.w[2][lv_index][tv_index] * c.rule;
}

namespace {

double normalize_clip(double value, const ComponentRange& range) {
    const double x = (value - range.min) / (range.max - range.min);
    return std::clamp(x, 0.0, 1.0);
}

VehicleState clamp_at_conflict(VehicleState s) {
    s.dist_to_conflict = std::max(0.0, s.dist_to_conflict);
    return s;
}

}  // namespace

GameMatrix build_game_matrix(const VehicleState& lv, const VehicleState& tv, double horizon,
                             const NormalizationConstants& norms) {
    if (lv.dist_to_conflict < 0.0 || tv.dist_to_conflict < 0.0)
        throw std::domain_error("build_game_matrix: both vehicles must be before the conflict point");
    if (!norms.valid())
        throw std::invalid_argument("build_game_matrix: degenerate normalization constants");

    GameMatrix game;
    for (std::size_t i = 0; i < kLvActionCount; ++i) {
        const VehicleState lv_next =
            clamp_at_conflict(project_state(lv, game.lv_actions[i], horizon));
        for (std::size_t j = 0; j < kTvActionCount; ++j) {
            const VehicleState tv_next =
                clamp_at_conflict(project_state(tv, game.tv_actions[j], horizon));

            game.lv[i][j].safety =
                normalize_clip(safety_payoff(lv_next, tv_next), norms.lv_safety);
            game.lv[i][j].efficiency =
                normalize_clip(efficiency_payoff(lv_next), norms.lv_efficiency);
            game.lv[i][j].rule = rule_payoff(PlayerRole::LV);

            game.tv[i][j].safety =
                normalize_clip(safety_payoff(tv_next, lv_next), norms.tv_safety);
            game.tv[i][j].efficiency =
                normalize_clip(efficiency_payoff(tv_next), norms.tv_efficiency);
            game.tv[i][j].rule = rule_payoff(PlayerRole::TV);
        }
    }
    return game;
}

}  // namespace lt::game
