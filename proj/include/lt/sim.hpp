#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lt/calibration.hpp"
#include "lt/data.hpp"
#include "lt/qre.hpp"
#include "lt/types.hpp"

namespace lt::sim {

enum class DecisionMode { QRE, QRE0, NE };

std::string to_string(DecisionMode mode);
DecisionMode mode_from_string(const std::string& s);

// VSP-binned fuel rate lookup; replaceable via JSON file.
struct FuelTable {
    int version = 1;
    std::vector<double> upper_bounds;  // kW/tonne, ascending; size = bins - 1
    std::vector<double> rates_ml_s;    // mL/s per bin

    static FuelTable builtin();
    static FuelTable load(const std::string& path);
    double rate(double vsp_value) const;
};

// VSP in kW/tonne from speed (m/s) and acceleration (m/s^2).
double vsp(double speed, double accel);

struct SimConfig {
    double dt = 0.1;   // s
    double k = 0.1;    // 1/m, rationality-weight decay
    double d0 = 1.0;   // m
    double v_max = 20.0;  // m/s
    double horizon = 1.0;  // s, matrix projection lookahead
    double vehicle_length = 4.5;  // m
    double vehicle_width = 1.8;   // m
    double exit_leg = 20.0;       // m, conflict point to destination
    DecisionMode mode = DecisionMode::QRE;
    double max_time = 120.0;      // s, hard episode cap
    FuelTable fuel = FuelTable::builtin();
};

struct OrientedRectangle {
    double cx = 0.0, cy = 0.0;  // center, m
    double heading = 0.0;       // rad
    double length = 4.5, width = 1.8;
};

// Separating-axis test over the 4 face normals; touching edges count as
// collision.
bool detect_collision(const OrientedRectangle& a, const OrientedRectangle& b);

// alpha = exp(-k (d - d0)) for d > d0, else 1.
double rationality_weight(double d_conf, double k, double d0);

// alpha * argmax action + (1 - alpha) * expected action; argmax ties break
// toward the lower acceleration.
double blended_acceleration(const MixedStrategy& strategy, const ActionSet& actions,
                            double alpha);

// One control step: speed clamped to [0, v_max], travel integrated piecewise
// when a clamp binds within the step.
VehicleState step_kinematics(const VehicleState& state, double accel, double dt, double v_max);

struct StepRecord {
    double t = 0.0;
    double lv_d_conf = 0.0, lv_speed = 0.0, lv_accel = 0.0;
    double tv_d_conf = 0.0, tv_speed = 0.0, tv_accel = 0.0;
    std::vector<double> p_lv;  // empty after the decision phase ends
    std::vector<double> p_tv;
};

struct SimulationResult {
    bool completed = false;        // both vehicles reached their destinations
    double completion_time = 0.0;  // s, valid iff completed
    bool collided = false;
    bool pet_valid = false;
    double pet = 0.0;  // s
    double fuel_total = 0.0;  // mL, both vehicles
    bool qre_flagged = false;  // solver hit max_iter in some step
    std::vector<StepRecord> steps;
};

struct Scenario {
    double lv_speed = 0.0;  // m/s
    double lv_dist = 0.0;   // m to conflict point
    double tv_speed = 0.0;
    double tv_dist = 0.0;
};

SimulationResult run_episode(const Scenario& scenario, const data::ScenarioGeometry& geometry,
                             const calib::ModelParameters& params, const SimConfig& config);

// Zone-based post-encroachment time from the recorded step series: time from
// the first vehicle's rear edge leaving the square conflict zone to the second
// vehicle's front edge entering it, linearly interpolated between steps.
// Returns false when either vehicle never traverses the zone.
bool compute_pet(const std::vector<StepRecord>& steps, const SimConfig& config, double& pet);

// Total fuel (mL) of one vehicle's (speed, accel) series.
double fuel_consumption(const std::vector<std::pair<double, double>>& speed_accel, double dt,
                        const FuelTable& table);

struct MonteCarloRow {
    std::string rttc_bin;  // "0".."9", ">=10", "all"
    int samples = 0;
    double sct_qre = 0.0, sct_qre0 = 0.0, sct_ne = 0.0;
    double fuel_qre = 0.0, fuel_qre0 = 0.0, fuel_ne = 0.0;
    int collisions_qre = 0, collisions_qre0 = 0, collisions_ne = 0;
    std::string sct_sig;   // significance stars, QRE vs NE
    std::string fuel_sig;
};

struct MonteCarloSummary {
    std::vector<MonteCarloRow> rows;  // 11 RTTC bins + the all-cases row
};

// Paired-design batch: all three modes run on identical scenario draws
// (speeds U[10, 36] km/h, distances U[10, 40] m). Collided episodes count
// toward collisions only; their SCT/fuel are excluded from the means.
MonteCarloSummary monte_carlo(const calib::ModelParameters& params, const SimConfig& config,
                              int n, std::uint64_t seed);

// Deterministic scenario draw for episode `index` of the batch stream.
Scenario sample_scenario(std::uint64_t seed, int index);

void save_summary_csv(const MonteCarloSummary& summary, const std::string& path);
void save_result_json(const SimulationResult& result, const std::string& path);
void save_profile_csv(const SimulationResult& result, const std::string& path);

// Welch two-sample t-test p-value (two-sided); used for the summary stars.
double welch_p_value(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace lt::sim
