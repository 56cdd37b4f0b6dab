#include "lt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lt::data {

namespace {

double eval_cubic(const std::array<double, 4>& c, double x) {
    return c[0] + x * (c[1] + x * (c[2] + x * c[3]));
}

double eval_cubic_deriv(const std::array<double, 4>& c, double x) {
    return c[1] + x * (2.0 * c[2] + 3.0 * c[3] * x);
}

// Solves the 4x4 normal equations by Gaussian elimination with partial
// pivoting. Throws on (near) rank deficiency.
std::array<double, 4> solve_normal_equations(double ata[4][4], double atb[4]) {
    constexpr int n = 4;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(ata[r][col]) > std::abs(ata[pivot][col])) pivot = r;
        if (std::abs(ata[pivot][col]) < 1e-12)
            throw std::runtime_error("fit_path: rank-deficient system");
        if (pivot != col) {
            std::swap(ata[pivot], ata[col]);
            std::swap(atb[pivot], atb[col]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = ata[r][col] / ata[col][col];
            for (int k = col; k < n; ++k) ata[r][k] -= f * ata[col][k];
            atb[r] -= f * atb[col];
        }
    }
    std::array<double, 4> out{};
    for (int r = n - 1; r >= 0; --r) {
        double v = atb[r];
        for (int k = r + 1; k < n; ++k) v -= ata[r][k] * out[k];
        out[r] = v / ata[r][r];
    }
    return out;
}

}  // namespace

std::pair<double, double> PathModel::point_at(double arc) const {
    if (s.size() < 2) throw std::runtime_error("PathModel: empty arc table");
    if (arc <= s.front()) {
        const double dx = x[1] - x[0], dy = y[1] - y[0];
        const double ds = s[1] - s[0];
        const double u = (arc - s.front()) / ds;
        return {x[0] + u * dx, y[0] + u * dy};
    }
    if (arc >= s.back()) {
        const std::size_t n = s.size();
        const double dx = x[n - 1] - x[n - 2], dy = y[n - 1] - y[n - 2];
        const double ds = s[n - 1] - s[n - 2];
        const double u = (arc - s.back()) / ds;
        return {x[n - 1] + u * dx, y[n - 1] + u * dy};
    }
    const auto it = std::lower_bound(s.begin(), s.end(), arc);
    const std::size_t hi = static_cast<std::size_t>(it - s.begin());
    const std::size_t lo = hi - 1;
    const double u = (arc - s[lo]) / (s[hi] - s[lo]);
    return {x[lo] + u * (x[hi] - x[lo]), y[lo] + u * (y[hi] - y[lo])};
}

double PathModel::heading_at(double arc) const {
    if (s.size() < 2) throw std::runtime_error("PathModel: empty arc table");
    std::size_t hi;
    if (arc <= s.front())
        hi = 1;
    else if (arc >= s.back())
        hi = s.size() - 1;
    else
        hi = static_cast<std::size_t>(std::lower_bound(s.begin(), s.end(), arc) - s.begin());
    const std::size_t lo = hi - 1;
    return std::atan2(y[hi] - y[lo], x[hi] - x[lo]);
}

double PathModel::arc_of_point(double wx, double wy) const {
    if (s.size() < 2) throw std::runtime_error("PathModel: empty arc table");
    // Nearest sample, refined by projecting onto the adjacent segments.
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double dx = x[i] - wx, dy = y[i] - wy;
        const double d2 = dx * dx + dy * dy;
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    double out = s[best];
    double out_d2 = best_d2;
    const std::size_t lo = best == 0 ? 0 : best - 1;
    const std::size_t hi = std::min(best + 1, s.size() - 1);
    for (std::size_t i = lo; i < hi; ++i) {
        const double ex = x[i + 1] - x[i], ey = y[i + 1] - y[i];
        const double len2 = ex * ex + ey * ey;
        if (len2 <= 0.0) continue;
        double u = ((wx - x[i]) * ex + (wy - y[i]) * ey) / len2;
        u = std::clamp(u, 0.0, 1.0);
        const double px = x[i] + u * ex, py = y[i] + u * ey;
        const double d2 = (px - wx) * (px - wx) + (py - wy) * (py - wy);
        if (d2 < out_d2) {
            out_d2 = d2;
            out = s[i] + u * (s[i + 1] - s[i]);
        }
    }
    return out;
}

PathModel fit_path(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 4) throw std::invalid_argument("fit_path: need at least 4 points");

    PathModel m;
    m.origin_x = points.front().first;
    m.origin_y = points.front().second;
    const double dx = points.back().first - m.origin_x;
    const double dy = points.back().second - m.origin_y;
    const double chord = std::hypot(dx, dy);
    if (chord < 1e-9) throw std::runtime_error("fit_path: degenerate point span");
    m.cos_r = dx / chord;
    m.sin_r = dy / chord;

    double ata[4][4] = {};
    double atb[4] = {};
    double xl_min = std::numeric_limits<double>::infinity();
    double xl_max = -std::numeric_limits<double>::infinity();
    for (const auto& [wx, wy] : points) {
        const double px = wx - m.origin_x, py = wy - m.origin_y;
        const double xl = m.cos_r * px + m.sin_r * py;
        const double yl = -m.sin_r * px + m.cos_r * py;
        xl_min = std::min(xl_min, xl);
        xl_max = std::max(xl_max, xl);
        double basis[4] = {1.0, xl, xl * xl, xl * xl * xl};
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) ata[r][c] += basis[r] * basis[c];
            atb[r] += basis[r] * yl;
        }
    }
    m.coeffs = solve_normal_equations(ata, atb);

    // Arc table: step x so each chord is about 0.05 m.
    const double target_step = 0.05;
    double xl = xl_min;
    double arc = 0.0;
    double prev_x = 0.0, prev_y = 0.0;
    bool first = true;
    while (true) {
        const double yl = eval_cubic(m.coeffs, xl);
        const double wx = m.origin_x + m.cos_r * xl - m.sin_r * yl;
        const double wy = m.origin_y + m.sin_r * xl + m.cos_r * yl;
        if (!first) arc += std::hypot(wx - prev_x, wy - prev_y);
        m.s.push_back(arc);
        m.x.push_back(wx);
        m.y.push_back(wy);
        prev_x = wx;
        prev_y = wy;
        first = false;
        if (xl >= xl_max) break;
        const double slope = eval_cubic_deriv(m.coeffs, xl);
        const double step = target_step / std::sqrt(1.0 + slope * slope);
        xl = std::min(xl + step, xl_max);
    }
    if (m.s.size() < 2) throw std::runtime_error("fit_path: degenerate arc table");
    return m;
}

std::vector<double> derive_acceleration(const std::vector<TrajectoryPoint>& track, int window) {
    if (track.size() < 2)
        throw std::invalid_argument("derive_acceleration: need at least 2 points");
    const std::size_t n = track.size();
    std::vector<double> raw(n);
    raw[0] = (track[1].speed - track[0].speed) / (track[1].t - track[0].t);
    raw[n - 1] = (track[n - 1].speed - track[n - 2].speed) / (track[n - 1].t - track[n - 2].t);
    for (std::size_t i = 1; i + 1 < n; ++i)
        raw[i] = (track[i + 1].speed - track[i - 1].speed) / (track[i + 1].t - track[i - 1].t);

    if (window <= 1) return raw;
    const int half = window / 2;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        int count = 0;
        for (int k = -half; k <= half; ++k) {
            const auto j = static_cast<std::ptrdiff_t>(i) + k;
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
            sum += raw[static_cast<std::size_t>(j)];
            ++count;
        }
        out[i] = sum / count;
    }
    return out;
}

std::size_t label_action(double accel, const ActionSet& actions) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < actions.size(); ++i) {
        const double d = std::abs(accel - actions[i]);
        // Ties (exact midpoints) resolve toward the smaller |action|.
        const bool closer = d < best_d - 1e-12;
        const bool tie_milder =
            std::abs(d - best_d) <= 1e-12 && std::abs(actions[i]) < std::abs(actions[best]);
        if (closer || tie_milder) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

namespace {

TrajectoryPoint interpolate_track(const std::vector<TrajectoryPoint>& track, double t) {
    if (track.empty() || t < track.front().t - 1e-9 || t > track.back().t + 1e-9)
        throw std::out_of_range("states_from_tracks: t outside the track span");
    const auto it = std::lower_bound(track.begin(), track.end(), t,
                                     [](const TrajectoryPoint& p, double tt) { return p.t < tt; });
    if (it == track.begin()) return track.front();
    if (it == track.end()) return track.back();
    const TrajectoryPoint& b = *it;
    const TrajectoryPoint& a = *(it - 1);
    const double u = (t - a.t) / (b.t - a.t);
    TrajectoryPoint p;
    p.t = t;
    p.x = a.x + u * (b.x - a.x);
    p.y = a.y + u * (b.y - a.y);
    p.speed = a.speed + u * (b.speed - a.speed);
    p.heading = a.heading;
    return p;
}

VehicleState state_on_path(const TrajectoryPoint& p, const PathModel& path, double s_conf,
                           double exit_leg, PlayerRole role) {
    const double arc = path.arc_of_point(p.x, p.y);
    VehicleState st;
    st.role = role;
    st.speed = std::max(0.0, p.speed);
    st.dist_to_conflict = s_conf - arc;
    st.dist_to_destination = std::max(0.0, st.dist_to_conflict + exit_leg);
    return st;
}

// Segment-segment intersection of the two arc polylines; returns the first
// crossing in path-a order.
bool intersect_paths(const PathModel& a, const PathModel& b, double& ax_s, double& bx_s,
                     double& cx, double& cy) {
    for (std::size_t i = 0; i + 1 < a.s.size(); ++i) {
        const double p0x = a.x[i], p0y = a.y[i];
        const double rx = a.x[i + 1] - p0x, ry = a.y[i + 1] - p0y;
        for (std::size_t j = 0; j + 1 < b.s.size(); ++j) {
            const double q0x = b.x[j], q0y = b.y[j];
            const double sx = b.x[j + 1] - q0x, sy = b.y[j + 1] - q0y;
            const double denom = rx * sy - ry * sx;
            if (std::abs(denom) < 1e-15) continue;
            const double qpx = q0x - p0x, qpy = q0y - p0y;
            const double u = (qpx * sy - qpy * sx) / denom;
            const double v = (qpx * ry - qpy * rx) / denom;
            if (u < -1e-9 || u > 1.0 + 1e-9 || v < -1e-9 || v > 1.0 + 1e-9) continue;
            ax_s = a.s[i] + u * (a.s[i + 1] - a.s[i]);
            bx_s = b.s[j] + v * (b.s[j + 1] - b.s[j]);
            cx = p0x + u * rx;
            cy = p0y + u * ry;
            return true;
        }
    }
    return false;
}

void build_frames(InteractionEpisode& ep, const LoadOptions& options) {
    const std::vector<double> lv_acc = derive_acceleration(ep.lv_track, options.accel_window);
    const std::vector<double> tv_acc = derive_acceleration(ep.tv_track, options.accel_window);
    const ActionSet lv_actions = ActionSet::lv();
    const ActionSet tv_actions = ActionSet::tv();

    std::int64_t frame_id = 0;
    for (std::size_t i = 0; i < ep.lv_track.size(); ++i) {
        const double t = ep.lv_track[i].t;
        if (t < ep.tv_track.front().t || t > ep.tv_track.back().t) continue;
        // Match the TV sample closest in time; skip unaligned timestamps.
        const auto it = std::lower_bound(
            ep.tv_track.begin(), ep.tv_track.end(), t,
            [](const TrajectoryPoint& p, double tt) { return p.t < tt; });
        std::size_t j = static_cast<std::size_t>(it - ep.tv_track.begin());
        if (j > 0 && (j == ep.tv_track.size() ||
                      std::abs(ep.tv_track[j - 1].t - t) < std::abs(ep.tv_track[j].t - t)))
            --j;
        if (std::abs(ep.tv_track[j].t - t) > 0.051) continue;

        const auto [lv_state, tv_state] = states_from_tracks(ep, t, options.exit_leg);
        if (lv_state.dist_to_conflict < options.frame_min_dist ||
            lv_state.dist_to_conflict > options.frame_max_dist ||
            tv_state.dist_to_conflict < options.frame_min_dist ||
            tv_state.dist_to_conflict > options.frame_max_dist)
            continue;

        calib::DecisionFrame f;
        f.lv_state = lv_state;
        f.tv_state = tv_state;
        f.lv_label = label_action(lv_acc[i], lv_actions);
        f.tv_label = label_action(tv_acc[j], tv_actions);
        f.episode_id = ep.episode_id;
        f.frame_id = frame_id++;
        ep.frames.push_back(f);
    }
}

}  // namespace

std::pair<VehicleState, VehicleState> states_from_tracks(const InteractionEpisode& episode,
                                                         double t, double exit_leg) {
    const TrajectoryPoint lv_p = interpolate_track(episode.lv_track, t);
    const TrajectoryPoint tv_p = interpolate_track(episode.tv_track, t);
    return {state_on_path(lv_p, episode.lv_path, episode.lv_s_conf, exit_leg, PlayerRole::LV),
            state_on_path(tv_p, episode.tv_path, episode.tv_s_conf, exit_leg, PlayerRole::TV)};
}

std::vector<InteractionEpisode> load_episodes(
    const std::string& path, const LoadOptions& options,
    std::vector<std::pair<std::int64_t, std::string>>* rejected) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open episode file: " + path);

    std::string line;
    if (!std::getline(in, line)) return {};
    if (line != "episode_id,role,t,x,y,speed" && line != "episode_id,role,t,x,y,speed\r")
        throw std::runtime_error(path + ": unexpected header '" + line + "'");

    std::map<std::int64_t, std::pair<std::vector<TrajectoryPoint>, std::vector<TrajectoryPoint>>>
        tracks;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 6)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 6 fields");
        try {
            const std::int64_t ep = std::stoll(cells[0]);
            const std::string& role = cells[1];
            TrajectoryPoint p;
            p.t = std::stod(cells[2]);
            p.x = std::stod(cells[3]);
            p.y = std::stod(cells[4]);
            p.speed = std::stod(cells[5]);
            if (role == "LV")
                tracks[ep].first.push_back(p);
            else if (role == "TV")
                tracks[ep].second.push_back(p);
            else
                throw std::runtime_error("role must be LV or TV");
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }

    std::vector<InteractionEpisode> out;
    for (auto& [id, pair] : tracks) {
        auto reject = [&](const std::string& reason) {
            if (rejected) rejected->emplace_back(id, reason);
        };
        if (pair.first.size() < 4 || pair.second.size() < 4) {
            reject("track too short");
            continue;
        }
        for (const auto* track : {&pair.first, &pair.second})
            for (std::size_t i = 1; i < track->size(); ++i)
                if ((*track)[i].t <= (*track)[i - 1].t)
                    throw std::runtime_error("episode " + std::to_string(id) +
                                             ": non-monotone timestamps");

        InteractionEpisode ep;
        ep.episode_id = id;
        ep.lv_track = std::move(pair.first);
        ep.tv_track = std::move(pair.second);

        std::vector<std::pair<double, double>> lv_pts, tv_pts;
        for (const auto& p : ep.lv_track) lv_pts.emplace_back(p.x, p.y);
        for (const auto& p : ep.tv_track) tv_pts.emplace_back(p.x, p.y);
        try {
            ep.lv_path = fit_path(lv_pts);
            ep.tv_path = fit_path(tv_pts);
        } catch (const std::exception& e) {
            reject(std::string("path fit failed: ") + e.what());
            continue;
        }
        if (!intersect_paths(ep.lv_path, ep.tv_path, ep.lv_s_conf, ep.tv_s_conf, ep.conflict_x,
                             ep.conflict_y)) {
            reject("paths do not intersect");
            continue;
        }
        for (auto* track : {&ep.lv_track, &ep.tv_track}) {
            const PathModel& pm = track == &ep.lv_track ? ep.lv_path : ep.tv_path;
            for (auto& p : *track) p.heading = pm.heading_at(pm.arc_of_point(p.x, p.y));
        }
        build_frames(ep, options);
        out.push_back(std::move(ep));
    }
    return out;
}

ScenarioGeometry make_geometry(const GeometryConfig& config) {
    // LV: heading +y from the south, curving left (toward -x) on a cubic
    // whose curvature radius at the crossing is the configured scale.
    // TV: straight southbound line through the crossing at the origin.
    const double x_cross = 35.0;  // local span to the crossing, m
    // Small-slope curvature 6*a*x equals 1/R at the crossing.
    const double a = 1.0 / (6.0 * config.turn_radius_scale * x_cross);
    const double lateral = a * x_cross * x_cross * x_cross;

    std::vector<std::pair<double, double>> lv_pts;
    const double x_end = x_cross + config.exit_leg;
    for (double xl = 0.0; xl <= x_end + 1e-9; xl += 0.25) {
        const double yl = a * xl * xl * xl;
        lv_pts.emplace_back(lateral - yl, -x_cross + xl);
    }
    std::vector<std::pair<double, double>> tv_pts;
    for (double yy = config.tv_approach + 5.0; yy >= -(config.exit_leg + 5.0); yy -= 0.5)
        tv_pts.emplace_back(0.0, yy);

    ScenarioGeometry g;
    g.lv_path = fit_path(lv_pts);
    g.tv_path = fit_path(tv_pts);
    if (!intersect_paths(g.lv_path, g.tv_path, g.lv_s_conf, g.tv_s_conf, g.conflict_x,
                         g.conflict_y))
        throw std::runtime_error("make_geometry: constructed paths do not intersect");
    return g;
}

std::vector<calib::DecisionFrame> collect_frames(const std::vector<InteractionEpisode>& episodes) {
    std::vector<calib::DecisionFrame> out;
    for (const auto& ep : episodes)
        out.insert(out.end(), ep.frames.begin(), ep.frames.end());
    return out;
}

void save_episodes_csv(const std::vector<InteractionEpisode>& episodes, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write episode file: " + path);
    out << "episode_id,role,t,x,y,speed\n";
    out.precision(17);
    for (const auto& ep : episodes) {
        for (const auto& p : ep.lv_track)
            out << ep.episode_id << ",LV," << p.t << ',' << p.x << ',' << p.y << ',' << p.speed
                << '\n';
        for (const auto& p : ep.tv_track)
            out << ep.episode_id << ",TV," << p.t << ',' << p.x << ',' << p.y << ',' << p.speed
                << '\n';
    }
}

void save_frames_csv(const std::vector<calib::DecisionFrame>& frames, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write frames file: " + path);
    out << "episode_id,frame_id,role,dist_conflict,dist_dest,speed,label\n";
    out.precision(17);
    for (const auto& f : frames) {
        out << f.episode_id << ',' << f.frame_id << ",LV," << f.lv_state.dist_to_conflict << ','
            << f.lv_state.dist_to_destination << ',' << f.lv_state.speed << ',' << f.lv_label
            << '\n';
        out << f.episode_id << ',' << f.frame_id << ",TV," << f.tv_state.dist_to_conflict << ','
            << f.tv_state.dist_to_destination << ',' << f.tv_state.speed << ',' << f.tv_label
            << '\n';
    }
}

std::vector<calib::DecisionFrame> load_frames_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open frames file: " + path);
    std::string line;
    if (!std::getline(in, line)) return {};
    if (line != "episode_id,frame_id,role,dist_conflict,dist_dest,speed,label" &&
        line != "episode_id,frame_id,role,dist_conflict,dist_dest,speed,label\r")
        throw std::runtime_error(path + ": unexpected header '" + line + "'");

    std::map<std::pair<std::int64_t, std::int64_t>, calib::DecisionFrame> frames;
    std::map<std::pair<std::int64_t, std::int64_t>, int> seen;  // bit 0 LV, bit 1 TV
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 7)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 7 fields");
        const std::pair<std::int64_t, std::int64_t> key{std::stoll(cells[0]),
                                                        std::stoll(cells[1])};
        calib::DecisionFrame& f = frames[key];
        f.episode_id = key.first;
        f.frame_id = key.second;
        VehicleState st;
        st.dist_to_conflict = std::stod(cells[3]);
        st.dist_to_destination = std::stod(cells[4]);
        st.speed = std::stod(cells[5]);
        const auto label = static_cast<std::size_t>(std::stoull(cells[6]));
        if (cells[2] == "LV") {
            st.role = PlayerRole::LV;
            if (label >= kLvActionCount)
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": LV label out of range");
            f.lv_state = st;
            f.lv_label = label;
            seen[key] |= 1;
        } else if (cells[2] == "TV") {
            st.role = PlayerRole::TV;
            if (label >= kTvActionCount)
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": TV label out of range");
            f.tv_state = st;
            f.tv_label = label;
            seen[key] |= 2;
        } else {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": role must be LV or TV");
        }
    }
    std::vector<calib::DecisionFrame> out;
    for (const auto& [key, f] : frames) {
        if (seen[key] != 3)
            throw std::runtime_error("frames file: incomplete frame " +
                                     std::to_string(key.first) + "/" + std::to_string(key.second));
        out.push_back(f);
    }
    return out;
}

}  // namespace lt::data
