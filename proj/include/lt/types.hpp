#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace lt {

enum class PlayerRole { LV, TV };

inline constexpr std::size_t kLvActionCount = 3;
inline constexpr std::size_t kTvActionCount = 5;

// Speed floor used in every division by speed, bounding payoffs near standstill.
inline constexpr double kSpeedFloor = 0.1;  // m/s

// Discrete longitudinal acceleration choices of one player.
struct ActionSet {
    std::vector<double> accelerations;  // m/s^2, strictly increasing

    static ActionSet lv() { return {{-1.0, 0.0, 1.0}}; }
    static ActionSet tv() { return {{-2.0, -1.0, 0.0, 1.0, 2.0}}; }
    static const ActionSet& for_role(PlayerRole role) {
        static const ActionSet lv_set = lv();
        static const ActionSet tv_set = tv();
        return role == PlayerRole::LV ? lv_set : tv_set;
    }

    std::size_t size() const { return accelerations.size(); }
    double operator[](std::size_t i) const { return accelerations.at(i); }
};

// Kinematic state of one player along its pre-planned path.
struct VehicleState {
    double speed = 0.0;             // m/s, >= 0
    double dist_to_conflict = 0.0;  // m, signed; negative after passing
    double dist_to_destination = 0.0;  // m, >= 0
    PlayerRole role = PlayerRole::LV;
};

struct PayoffComponents {
    double safety = 0.0;
    double efficiency = 0.0;
    double rule = 0.0;
};

// Probability vector aligned with an ActionSet.
struct MixedStrategy {
    std::vector<double> probs;

    static MixedStrategy uniform(std::size_t n) {
        return {std::vector<double>(n, 1.0 / static_cast<double>(n))};
    }
    static MixedStrategy point_mass(std::size_t n, std::size_t i) {
        MixedStrategy s{std::vector<double>(n, 0.0)};
        s.probs.at(i) = 1.0;
        return s;
    }

    std::size_t size() const { return probs.size(); }
    std::size_t argmax() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < probs.size(); ++i)
            if (probs[i] > probs[best]) best = i;
        return best;
    }
};

// Per-player payoff weights over {safety, efficiency, rule}, one simplex per
// joint-action cell.
struct WeightTensor {
    // [component][lv action][tv action]
    std::array<std::array<std::array<double, kTvActionCount>, kLvActionCount>, 3> w{};

    static WeightTensor constant(double ws, double we, double wr) {
        WeightTensor t;
        for (std::size_t i = 0; i < kLvActionCount; ++i)
            for (std::size_t j = 0; j < kTvActionCount; ++j) {
                t.w[0][i][j] = ws;
                t.w[1][i][j] = we;
                t.w[2][i][j] = wr;
            }
        return t;
    }
};

}  // namespace lt
