#include "lt/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lt/rng.hpp"

namespace lt::sim {

using nlohmann::json;

std::string to_string(DecisionMode mode) {
    switch (mode) {
        case DecisionMode::QRE: return "qre";
        case DecisionMode::QRE0: return "qre0";
        case DecisionMode::NE: return "ne";
    }
    return "?";
}

DecisionMode mode_from_string(const std::string& s) {
    if (s == "qre") return DecisionMode::QRE;
    if (s == "qre0") return DecisionMode::QRE0;
    if (s == "ne") return DecisionMode::NE;
    throw std::invalid_argument("unknown decision mode: " + s);
}

FuelTable FuelTable::builtin() {
    FuelTable t;
    t.version = 1;
    t.upper_bounds = {-2, 0, 1, 4, 7, 10, 13, 16, 19, 23, 28, 33, 39};
    t.rates_ml_s = {0.20, 0.28, 0.35, 0.60, 0.95, 1.30, 1.65,
                    2.05, 2.45, 2.90, 3.45, 4.05, 4.75, 5.50};
    return t;
}

FuelTable FuelTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open fuel table: " + path);
    json j;
    in >> j;
    FuelTable t;
    t.version = j.value("version", 1);
    t.upper_bounds = j.at("vsp_upper_bounds").get<std::vector<double>>();
    t.rates_ml_s = j.at("rates_ml_per_s").get<std::vector<double>>();
    if (t.rates_ml_s.size() != t.upper_bounds.size() + 1)
        throw std::runtime_error("fuel table: rates must have one more entry than bounds");
    if (!std::is_sorted(t.upper_bounds.begin(), t.upper_bounds.end()))
        throw std::runtime_error("fuel table: bounds must be ascending");
    return t;
}

double FuelTable::rate(double vsp_value) const {
    const auto it = std::upper_bound(upper_bounds.begin(), upper_bounds.end(), vsp_value);
    return rates_ml_s[static_cast<std::size_t>(it - upper_bounds.begin())];
}

double vsp(double speed, double accel) {
    return speed * (1.1 * accel + 0.132) + 0.000302 * speed * speed * speed;
}

bool detect_collision(const OrientedRectangle& a, const OrientedRectangle& b) {
    const OrientedRectangle* rects[2] = {&a, &b};
    for (const OrientedRectangle* r : rects) {
        const double axes[2][2] = {{std::cos(r->heading), std::sin(r->heading)},
                                   {-std::sin(r->heading), std::cos(r->heading)}};
        for (const auto& axis : axes) {
            double min_p[2], max_p[2];
            for (int k = 0; k < 2; ++k) {
                const OrientedRectangle& rc = *rects[k];
                const double c = rc.cx * axis[0] + rc.cy * axis[1];
                const double ex = std::cos(rc.heading) * axis[0] + std::sin(rc.heading) * axis[1];
                const double ey = -std::sin(rc.heading) * axis[0] + std::cos(rc.heading) * axis[1];
                const double radius =
                    0.5 * rc.length * std::abs(ex) + 0.5 * rc.width * std::abs(ey);
                min_p[k] = c - radius;
                max_p[k] = c + radius;
            }
            // Strict gap required for separation; touching counts as collision.
            if (max_p[0] < min_p[1] || max_p[1] < min_p[0]) return false;
        }
    }
    return true;
}

double rationality_weight(double d_conf, double k, double d0) {
    return d_conf > d0 ? std::exp(-k * (d_conf - d0)) : 1.0;
}

double blended_acceleration(const MixedStrategy& strategy, const ActionSet& actions,
                            double alpha) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < strategy.size(); ++i)
        if (strategy.probs[i] > strategy.probs[best]) best = i;  // ties keep the lower action
    double expectation = 0.0;
    for (std::size_t i = 0; i < strategy.size(); ++i)
        expectation += actions[i] * strategy.probs[i];
    return alpha * actions[best] + (1.0 - alpha) * expectation;
}

VehicleState step_kinematics(const VehicleState& state, double accel, double dt, double v_max) {
    if (dt <= 0.0) throw std::invalid_argument("step_kinematics: dt must be > 0");
    const double v0 = state.speed;
    const double v_unc = v0 + accel * dt;
    double travel, v1;
    if (v_unc < 0.0) {
        const double t_stop = -v0 / accel;
        travel = v0 * t_stop + 0.5 * accel * t_stop * t_stop;
        v1 = 0.0;
    } else if (v_unc > v_max) {
        const double t_cap = accel > 0.0 ? (v_max - v0) / accel : 0.0;
        travel = v0 * t_cap + 0.5 * accel * t_cap * t_cap + v_max * (dt - t_cap);
        v1 = v_max;
    } else {
        travel = v0 * dt + 0.5 * accel * dt * dt;
        v1 = v_unc;
    }
    VehicleState out = state;
    out.speed = v1;
    out.dist_to_conflict -= travel;
    out.dist_to_destination = std::max(0.0, out.dist_to_destination - travel);
    return out;
}

namespace {

OrientedRectangle footprint(const data::PathModel& path, double s_conf, double d_conf,
                            const SimConfig& config) {
    // d_conf is measured to the vehicle head; the center sits half a length
    // behind it along the path.
    const double s_center = s_conf - d_conf - 0.5 * config.vehicle_length;
    const auto [cx, cy] = path.point_at(s_center);
    OrientedRectangle r;
    r.cx = cx;
    r.cy = cy;
    r.heading = path.heading_at(s_center);
    r.length = config.vehicle_length;
    r.width = config.vehicle_width;
    return r;
}

calib::ModelParameters qre0_parameters(const calib::ModelParameters& params) {
    calib::ModelParameters p = params;
    p.weights_lv = WeightTensor::constant(0.5, 0.3, 0.2);
    p.weights_tv = WeightTensor::constant(0.5, 0.3, 0.2);
    std::fill(p.lambda_lv.values.begin(), p.lambda_lv.values.end(), 2.0);
    std::fill(p.lambda_tv.values.begin(), p.lambda_tv.values.end(), 2.0);
    return p;
}

}  // namespace

SimulationResult run_episode(const Scenario& scenario, const data::ScenarioGeometry& geometry,
                             const calib::ModelParameters& params, const SimConfig& config) {
    if (scenario.lv_dist <= 0.0 || scenario.tv_dist <= 0.0)
        throw std::domain_error("run_episode: both vehicles must start before the conflict point");

    const calib::ModelParameters* active = &params;
    calib::ModelParameters qre0;
    if (config.mode == DecisionMode::QRE0) {
        qre0 = qre0_parameters(params);
        active = &qre0;
    }

    VehicleState lv{scenario.lv_speed, scenario.lv_dist, scenario.lv_dist + config.exit_leg,
                    PlayerRole::LV};
    VehicleState tv{scenario.tv_speed, scenario.tv_dist, scenario.tv_dist + config.exit_leg,
                    PlayerRole::TV};

    MixedStrategy warm_lv = MixedStrategy::uniform(kLvActionCount);
    MixedStrategy warm_tv = MixedStrategy::uniform(kTvActionCount);
    const ActionSet lv_actions = ActionSet::lv();
    const ActionSet tv_actions = ActionSet::tv();

    SimulationResult result;
    double t = 0.0;
    while (t < config.max_time) {
        StepRecord rec;
        rec.t = t;
        rec.lv_d_conf = lv.dist_to_conflict;
        rec.lv_speed = lv.speed;
        rec.tv_d_conf = tv.dist_to_conflict;
        rec.tv_speed = tv.speed;

        double a_lv, a_tv;
        if (lv.dist_to_conflict > 0.0 && tv.dist_to_conflict > 0.0) {
            const game::GameMatrix matrix =
                game::build_game_matrix(lv, tv, config.horizon, active->normalization);
            MixedStrategy p_lv, p_tv;
            if (config.mode == DecisionMode::NE) {
                const auto ne = qre::select_ne_action(
                    qre::solve_pure_ne(matrix, active->weights_lv, active->weights_tv), matrix,
                    active->weights_lv, active->weights_tv);
                p_lv = MixedStrategy::point_mass(kLvActionCount, ne.first);
                p_tv = MixedStrategy::point_mass(kTvActionCount, ne.second);
            } else {
                const double lam_lv =
                    qre::lookup_lambda(active->lambda_lv, lv.dist_to_conflict);
                const double lam_tv =
                    qre::lookup_lambda(active->lambda_tv, tv.dist_to_conflict);
                const qre::QreSolution sol =
                    qre::solve_qre(matrix, active->weights_lv, active->weights_tv, lam_lv,
                                   lam_tv, warm_lv, warm_tv);
                if (!sol.converged) result.qre_flagged = true;
                p_lv = sol.p_lv;
                p_tv = sol.p_tv;
                warm_lv = p_lv;
                warm_tv = p_tv;
            }
            a_lv = blended_acceleration(p_lv, lv_actions,
                                        rationality_weight(lv.dist_to_conflict, config.k,
                                                           config.d0));
            a_tv = blended_acceleration(p_tv, tv_actions,
                                        rationality_weight(tv.dist_to_conflict, config.k,
                                                           config.d0));
            rec.p_lv = p_lv.probs;
            rec.p_tv = p_tv.probs;
        } else {
            // Post-conflict rule: both apply their maximum action; the speed
            // cap turns that into constant v_max.
            a_lv = lv_actions[kLvActionCount - 1];
            a_tv = tv_actions[kTvActionCount - 1];
        }
        rec.lv_accel = a_lv;
        rec.tv_accel = a_tv;
        result.steps.push_back(rec);

        result.fuel_total += config.fuel.rate(vsp(lv.speed, a_lv)) * config.dt;
        result.fuel_total += config.fuel.rate(vsp(tv.speed, a_tv)) * config.dt;

        lv = step_kinematics(lv, a_lv, config.dt, config.v_max);
        tv = step_kinematics(tv, a_tv, config.dt, config.v_max);
        t += config.dt;

        const OrientedRectangle lv_rect =
            footprint(geometry.lv_path, geometry.lv_s_conf, lv.dist_to_conflict, config);
        const OrientedRectangle tv_rect =
            footprint(geometry.tv_path, geometry.tv_s_conf, tv.dist_to_conflict, config);
        if (detect_collision(lv_rect, tv_rect)) {
            result.collided = true;
            break;
        }
        if (lv.dist_to_destination <= 0.0 && tv.dist_to_destination <= 0.0) {
            result.completed = true;
            result.completion_time = t;
            break;
        }
    }

    if (!result.collided) result.pet_valid = compute_pet(result.steps, config, result.pet);
    return result;
}

bool compute_pet(const std::vector<StepRecord>& steps, const SimConfig& config, double& pet) {
    // Square conflict zone of side max vehicle width, centered on the
    // conflict point, measured along each path.
    const double half = 0.5 * config.vehicle_width;
    const double exit_threshold = -(half + config.vehicle_length);

    auto crossing_time = [&](auto d_of, double threshold) -> std::pair<bool, double> {
        for (std::size_t i = 1; i < steps.size(); ++i) {
            const double prev = d_of(steps[i - 1]);
            const double cur = d_of(steps[i]);
            if (prev > threshold && cur <= threshold) {
                const double u = (prev - threshold) / (prev - cur);
                return {true, steps[i - 1].t + u * (steps[i].t - steps[i - 1].t)};
            }
        }
        return {false, 0.0};
    };
    auto lv_d = [](const StepRecord& r) { return r.lv_d_conf; };
    auto tv_d = [](const StepRecord& r) { return r.tv_d_conf; };

    const auto [lv_in_ok, lv_in] = crossing_time(lv_d, half);
    const auto [lv_out_ok, lv_out] = crossing_time(lv_d, exit_threshold);
    const auto [tv_in_ok, tv_in] = crossing_time(tv_d, half);
    const auto [tv_out_ok, tv_out] = crossing_time(tv_d, exit_threshold);
    if (!lv_in_ok || !lv_out_ok || !tv_in_ok || !tv_out_ok) return false;

    pet = lv_out < tv_out ? tv_in - lv_out : lv_in - tv_out;
    return true;
}

double fuel_consumption(const std::vector<std::pair<double, double>>& speed_accel, double dt,
                        const FuelTable& table) {
    double total = 0.0;
    for (const auto& [v, a] : speed_accel) total += table.rate(vsp(v, a)) * dt;
    return total;
}

// ---------------------------------------------------------------------------
// Welch test (regularized incomplete beta via continued fraction)

namespace {

double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 200;
    constexpr double kEps = 3e-14, kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

double betai(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                               a * std::log(x) + b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

std::pair<double, double> mean_var(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= (n - 1.0);
    return {mean, var};
}

std::string stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

}  // namespace

double welch_p_value(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) return 1.0;
    const auto [ma, va] = mean_var(a);
    const auto [mb, vb] = mean_var(b);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double se2 = va / na + vb / nb;
    if (se2 <= 0.0) return ma == mb ? 1.0 : 0.0;
    const double t = (ma - mb) / std::sqrt(se2);
    const double df = se2 * se2 / (va * va / (na * na * (na - 1.0)) +
                                   vb * vb / (nb * nb * (nb - 1.0)));
    return betai(0.5 * df, 0.5, df / (df + t * t));
}

Scenario sample_scenario(std::uint64_t seed, int index) {
    auto rng = make_rng(seed, "mc-scenario", static_cast<std::uint64_t>(index));
    std::uniform_real_distribution<double> speed_kmh(10.0, 36.0);
    std::uniform_real_distribution<double> dist(10.0, 40.0);
    Scenario sc;
    sc.lv_speed = speed_kmh(rng) / 3.6;
    sc.lv_dist = dist(rng);
    sc.tv_speed = speed_kmh(rng) / 3.6;
    sc.tv_dist = dist(rng);
    return sc;
}

MonteCarloSummary monte_carlo(const calib::ModelParameters& params, const SimConfig& config,
                              int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("monte_carlo: n must be >= 1");
    const data::ScenarioGeometry geometry = data::make_geometry();

    constexpr int kBins = 11;  // 0..9 and >=10
    struct Acc {
        std::vector<double> sct[3], fuel[3];
        int collisions[3] = {0, 0, 0};
        int samples = 0;
    };
    std::vector<Acc> bins(kBins);
    Acc all;

    const DecisionMode modes[3] = {DecisionMode::QRE, DecisionMode::QRE0, DecisionMode::NE};
    for (int e = 0; e < n; ++e) {
        const Scenario sc = sample_scenario(seed, e);
        const double rttc0 =
            std::abs(sc.lv_dist / sc.lv_speed - sc.tv_dist / sc.tv_speed);
        const int bin = std::min(kBins - 1, static_cast<int>(std::llround(rttc0)));
        bins[bin].samples++;
        all.samples++;
        for (int m = 0; m < 3; ++m) {
            SimConfig cfg = config;
            cfg.mode = modes[m];
            const SimulationResult r = run_episode(sc, geometry, params, cfg);
            if (r.collided) {
                bins[bin].collisions[m]++;
                all.collisions[m]++;
            } else if (r.completed) {
                bins[bin].sct[m].push_back(r.completion_time);
                bins[bin].fuel[m].push_back(r.fuel_total);
                all.sct[m].push_back(r.completion_time);
                all.fuel[m].push_back(r.fuel_total);
            }
        }
    }

    auto mean_of = [](const std::vector<double>& v) {
        if (v.empty()) return 0.0;
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    auto make_row = [&](const std::string& name, const Acc& acc) {
        MonteCarloRow row;
        row.rttc_bin = name;
        row.samples = acc.samples;
        row.sct_qre = mean_of(acc.sct[0]);
        row.sct_qre0 = mean_of(acc.sct[1]);
        row.sct_ne = mean_of(acc.sct[2]);
        row.fuel_qre = mean_of(acc.fuel[0]);
        row.fuel_qre0 = mean_of(acc.fuel[1]);
        row.fuel_ne = mean_of(acc.fuel[2]);
        row.collisions_qre = acc.collisions[0];
        row.collisions_qre0 = acc.collisions[1];
        row.collisions_ne = acc.collisions[2];
        row.sct_sig = stars(welch_p_value(acc.sct[0], acc.sct[2]));
        row.fuel_sig = stars(welch_p_value(acc.fuel[0], acc.fuel[2]));
        return row;
    };

    MonteCarloSummary summary;
    for (int b = 0; b < kBins; ++b)
        summary.rows.push_back(make_row(b < 10 ? std::to_string(b) : ">=10", bins[b]));
    summary.rows.push_back(make_row("all", all));
    return summary;
}

void save_summary_csv(const MonteCarloSummary& summary, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write summary file: " + path);
    out << "rttc,samples,sct_qre,sct_sig,sct_qre0,sct_ne,"
           "fuel_qre,fuel_sig,fuel_qre0,fuel_ne,"
           "collisions_qre,collisions_qre0,collisions_ne\n";
    out.precision(17);
    for (const MonteCarloRow& r : summary.rows)
        out << r.rttc_bin << ',' << r.samples << ',' << r.sct_qre << ',' << r.sct_sig << ','
            << r.sct_qre0 << ',' << r.sct_ne << ',' << r.fuel_qre << ',' << r.fuel_sig << ','
            << r.fuel_qre0 << ',' << r.fuel_ne << ',' << r.collisions_qre << ','
            << r.collisions_qre0 << ',' << r.collisions_ne << '\n';
}

void save_result_json(const SimulationResult& result, const std::string& path) {
    json steps = json::array();
    for (const StepRecord& s : result.steps)
        steps.push_back({{"t", s.t},
                         {"lv", {{"d_conf", s.lv_d_conf}, {"speed", s.lv_speed},
                                 {"accel", s.lv_accel}, {"p", s.p_lv}}},
                         {"tv", {{"d_conf", s.tv_d_conf}, {"speed", s.tv_speed},
                                 {"accel", s.tv_accel}, {"p", s.p_tv}}}});
    json j{{"completed", result.completed},
           {"completion_time", result.completion_time},
           {"collided", result.collided},
           {"pet_valid", result.pet_valid},
           {"pet", result.pet},
           {"fuel_total_ml", result.fuel_total},
           {"qre_flagged", result.qre_flagged},
           {"steps", steps}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write result file: " + path);
    out << j.dump(2) << "\n";
}

void save_profile_csv(const SimulationResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write profile file: " + path);
    out << "t,lv_speed,lv_accel,lv_d_conf,tv_speed,tv_accel,tv_d_conf,"
           "p_lv_0,p_lv_1,p_lv_2,p_tv_0,p_tv_1,p_tv_2,p_tv_3,p_tv_4\n";
    out.precision(17);
    for (const StepRecord& s : result.steps) {
        out << s.t << ',' << s.lv_speed << ',' << s.lv_accel << ',' << s.lv_d_conf << ','
            << s.tv_speed << ',' << s.tv_accel << ',' << s.tv_d_conf;
        for (std::size_t i = 0; i < kLvActionCount; ++i)
            out << ',' << (i < s.p_lv.size() ? std::to_string(s.p_lv[i]) : "");
        for (std::size_t i = 0; i < kTvActionCount; ++i)
            out << ',' << (i < s.p_tv.size() ? std::to_string(s.p_tv[i]) : "");
        out << '\n';
    }
}

}  // namespace lt::sim
