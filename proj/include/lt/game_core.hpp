#pragma once

#include <array>

#include "lt/types.hpp"

namespace lt::game {

// Min/max ranges for min-max normalization of the safety and efficiency
// components, per player role. Computed on the training data and persisted
// with the parameter file; the rule component is already in [0, 1].
struct ComponentRange {
    double min = 0.0;
    double max = 1.0;
};

struct NormalizationConstants {
    ComponentRange lv_safety, lv_efficiency;
    ComponentRange tv_safety, tv_efficiency;

    const ComponentRange& safety(PlayerRole role) const {
        return role == PlayerRole::LV ? lv_safety : tv_safety;
    }
    const ComponentRange& efficiency(PlayerRole role) const {
        return role == PlayerRole::LV ? lv_efficiency : tv_efficiency;
    }
    bool valid() const {
        return lv_safety.max > lv_safety.min && lv_efficiency.max > lv_efficiency.min &&
               tv_safety.max > tv_safety.min && tv_efficiency.max > tv_efficiency.min;
    }
};

// Per-player payoff components over the 3x5 joint action grid.
// Index (i, j) always means (LV action i, TV action j) in both tensors.
struct GameMatrix {
    std::array<std::array<PayoffComponents, kTvActionCount>, kLvActionCount> lv{};
    std::array<std::array<PayoffComponents, kTvActionCount>, kLvActionCount> tv{};
    ActionSet lv_actions = ActionSet::lv();
    ActionSet tv_actions = ActionSet::tv();

    const PayoffComponents& at(PlayerRole role, std::size_t i, std::size_t j) const {
        return role == PlayerRole::LV ? lv[i][j] : tv[i][j];
    }
};

// Time to the conflict point at constant speed. Requires dist_to_conflict >= 0.
double ttcp(const VehicleState& state);

// Absolute difference of two arrival times; symmetric.
double rttc(double self_ttcp, double other_ttcp);

// TTCP + RTTC; higher means safer.
double safety_payoff(const VehicleState& self, const VehicleState& other);

// Negative time to reach the destination; always <= 0.
double efficiency_payoff(const VehicleState& state);

// Constant right-of-way payoff: LV 0.5, TV 1.0.
double rule_payoff(PlayerRole role);

// Constant-acceleration projection over `horizon` seconds. Speed is clamped
// at 0 (no reversing); travel is integrated piecewise if the clamp binds.
VehicleState project_state(const VehicleState& state, double accel, double horizon);

// Scalar payoff of one cell: omega_s*J_s + omega_e*J_e + omega_r*J_r.
double scalar_payoff(const GameMatrix& game, const WeightTensor& weights, PlayerRole role,
                     std::size_t lv_index, std::size_t tv_index);

// Builds the normalized 3x5 payoff matrix for both players by projecting each
// joint action over `horizon` and min-max normalizing safety and efficiency
// (clipped to [0, 1] outside the training range). Projections that cross the
// conflict point are evaluated at distance 0.
GameMatrix build_game_matrix(const VehicleState& lv, const VehicleState& tv, double horizon,
                             const NormalizationConstants& norms);

}  // namespace lt::game
