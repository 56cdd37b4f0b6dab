#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lt/calibration.hpp"
#include "lt/types.hpp"

namespace lt::data {

struct TrajectoryPoint {
    double t = 0.0;        // s
    double x = 0.0;        // m
    double y = 0.0;        // m
    double speed = 0.0;    // m/s
    double heading = 0.0;  // rad
};

// Cubic y(x) in a path-local frame plus a monotone arc-length table in world
// coordinates.
struct PathModel {
    double origin_x = 0.0, origin_y = 0.0;
    double cos_r = 1.0, sin_r = 0.0;  // local +x axis in world coordinates
    std::array<double, 4> coeffs{};   // y_local = c0 + c1 x + c2 x^2 + c3 x^3

    std::vector<double> s;  // strictly increasing arc length
    std::vector<double> x;  // world coordinates of the samples
    std::vector<double> y;

    double length() const { return s.empty() ? 0.0 : s.back(); }
    // Linear interpolation inside the table, tangent extrapolation outside.
    std::pair<double, double> point_at(double arc) const;
    double heading_at(double arc) const;
    // Arc coordinate of the nearest point on the path.
    double arc_of_point(double wx, double wy) const;
};

// Least-squares cubic fit; the local frame is chosen from the first-to-last
// chord so x is monotone along the travel direction. Requires >= 4 points.
PathModel fit_path(const std::vector<std::pair<double, double>>& points);

struct InteractionEpisode {
    std::int64_t episode_id = 0;
    std::vector<TrajectoryPoint> lv_track;
    std::vector<TrajectoryPoint> tv_track;
    PathModel lv_path;
    PathModel tv_path;
    double conflict_x = 0.0, conflict_y = 0.0;
    double lv_s_conf = 0.0;  // arc coordinate of the conflict point on each path
    double tv_s_conf = 0.0;
    std::vector<calib::DecisionFrame> frames;
};

struct LoadOptions {
    double exit_leg = 20.0;       // m, conflict point to destination
    int accel_window = 5;         // samples of moving-average smoothing
    double frame_min_dist = 0.0;  // valid-frame filter on both d_conf, m
    double frame_max_dist = 40.0;
};

// Parses the episode CSV (header `episode_id,role,t,x,y,speed`), fits paths,
// intersects them for the conflict point, and labels decision frames.
// Episodes whose paths do not intersect are skipped; their reasons are
// appended to `rejected` when given. Malformed rows throw with a line number.
std::vector<InteractionEpisode> load_episodes(
    const std::string& path, const LoadOptions& options = {},
    std::vector<std::pair<std::int64_t, std::string>>* rejected = nullptr);

// Central finite differences of speed over time, moving-average smoothed;
// endpoints use one-sided differences.
std::vector<double> derive_acceleration(const std::vector<TrajectoryPoint>& track,
                                        int window = 5);

// Nearest action by absolute difference; exact midpoints round toward zero.
std::size_t label_action(double accel, const ActionSet& actions);

// States at time t with distances measured along each fitted path.
std::pair<VehicleState, VehicleState> states_from_tracks(const InteractionEpisode& episode,
                                                         double t, double exit_leg = 20.0);

// Fixed intersection geometry used by the simulator and the synthetic
// generator: a straight TV path and a cubic left-turn LV path crossing it.
struct ScenarioGeometry {
    PathModel lv_path;
    PathModel tv_path;
    double lv_s_conf = 0.0;
    double tv_s_conf = 0.0;
    double conflict_x = 0.0, conflict_y = 0.0;
};

struct GeometryConfig {
    double turn_radius_scale = 12.0;  // m, curvature radius at the crossing
    double tv_approach = 45.0;        // m of straight path before the crossing
    double exit_leg = 22.0;           // m of path after the conflict point
};

ScenarioGeometry make_geometry(const GeometryConfig& config = {});

struct SyntheticOptions {
    double dt = 0.1;       // s
    double horizon = 1.0;  // s, matrix projection horizon
    double exit_leg = 20.0;
    double speed_min_kmh = 10.0, speed_max_kmh = 36.0;
    double dist_min = 10.0, dist_max = 40.0;  // m
    double frame_max_dist = 40.0;
};

// Rolls out episodes under `true_params` with the simulator and records
// per-frame labels sampled from the equilibrium distributions. Deterministic
// in (seed, episode index).
std::vector<InteractionEpisode> generate_synthetic(const calib::ModelParameters& true_params,
                                                   int n_episodes, std::uint64_t seed,
                                                   const SyntheticOptions& options = {});

std::vector<calib::DecisionFrame> collect_frames(const std::vector<InteractionEpisode>& episodes);

// Episode CSV (positions) and frames CSV (states + labels) I/O.
void save_episodes_csv(const std::vector<InteractionEpisode>& episodes, const std::string& path);
void save_frames_csv(const std::vector<calib::DecisionFrame>& frames, const std::string& path);
std::vector<calib::DecisionFrame> load_frames_csv(const std::string& path);

}  // namespace lt::data
