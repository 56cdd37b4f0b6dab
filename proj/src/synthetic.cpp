#include <cmath>

#include "lt/data.hpp"
#include "lt/rng.hpp"
#include "lt/sim.hpp"

namespace lt::data {

namespace {

TrajectoryPoint track_point(const PathModel& path, double s_conf, double t, double d_conf,
                            double speed) {
    TrajectoryPoint p;
    p.t = t;
    const double s = s_conf - d_conf;  // head position along the path
    const auto [x, y] = path.point_at(s);
    p.x = x;
    p.y = y;
    p.speed = speed;
    p.heading = path.heading_at(s);
    return p;
}

std::size_t sample_index(const std::vector<double>& probs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double u = uni(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

}  // namespace

std::vector<InteractionEpisode> generate_synthetic(const calib::ModelParameters& true_params,
                                                   int n_episodes, std::uint64_t seed,
                                                   const SyntheticOptions& options) {
    if (n_episodes < 1)
        throw std::invalid_argument("generate_synthetic: need at least 1 episode");

    const ScenarioGeometry geometry = make_geometry();
    sim::SimConfig cfg;
    cfg.dt = options.dt;
    cfg.horizon = options.horizon;
    cfg.exit_leg = options.exit_leg;
    cfg.mode = sim::DecisionMode::QRE;

    std::vector<InteractionEpisode> episodes;
    episodes.reserve(static_cast<std::size_t>(n_episodes));
    for (int e = 0; e < n_episodes; ++e) {
        auto rng = make_rng(seed, "synthetic-episode", static_cast<std::uint64_t>(e));
        std::uniform_real_distribution<double> speed_kmh(options.speed_min_kmh,
                                                         options.speed_max_kmh);
        std::uniform_real_distribution<double> dist(options.dist_min, options.dist_max);
        sim::Scenario sc;
        sc.lv_speed = speed_kmh(rng) / 3.6;
        sc.lv_dist = dist(rng);
        sc.tv_speed = speed_kmh(rng) / 3.6;
        sc.tv_dist = dist(rng);

        const sim::SimulationResult result = sim::run_episode(sc, geometry, true_params, cfg);

        InteractionEpisode ep;
        ep.episode_id = e;
        ep.lv_path = geometry.lv_path;
        ep.tv_path = geometry.tv_path;
        ep.lv_s_conf = geometry.lv_s_conf;
        ep.tv_s_conf = geometry.tv_s_conf;
        ep.conflict_x = geometry.conflict_x;
        ep.conflict_y = geometry.conflict_y;

        std::int64_t frame_id = 0;
        for (const sim::StepRecord& step : result.steps) {
            ep.lv_track.push_back(track_point(geometry.lv_path, geometry.lv_s_conf, step.t,
                                              step.lv_d_conf, step.lv_speed));
            ep.tv_track.push_back(track_point(geometry.tv_path, geometry.tv_s_conf, step.t,
                                              step.tv_d_conf, step.tv_speed));
            if (step.p_lv.empty()) continue;  // decision phase over
            if (step.lv_d_conf > options.frame_max_dist ||
                step.tv_d_conf > options.frame_max_dist)
                continue;

            calib::DecisionFrame f;
            f.lv_state = {step.lv_speed, step.lv_d_conf, step.lv_d_conf + options.exit_leg,
                          PlayerRole::LV};
            f.tv_state = {step.tv_speed, step.tv_d_conf, step.tv_d_conf + options.exit_leg,
                          PlayerRole::TV};
            f.lv_label = sample_index(step.p_lv, rng);
            f.tv_label = sample_index(step.p_tv, rng);
            f.episode_id = e;
            f.frame_id = frame_id++;
            ep.frames.push_back(f);
        }
        episodes.push_back(std::move(ep));
    }
    return episodes;
}

}  // namespace lt::data
