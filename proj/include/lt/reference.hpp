#pragma once

#include "lt/calibration.hpp"

namespace lt {

// Shipped reference parameter set for simulation without a calibration run:
// mean-style payoff weights per player, distance-shaped rationality profiles
// (TV rising toward the conflict point, LV peaking around 12 m), and
// normalization constants from a deterministic state-grid sweep.
calib::ModelParameters reference_parameters();

}  // namespace lt
