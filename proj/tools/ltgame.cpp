#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lt/calibration.hpp"
#include "lt/data.hpp"
#include "lt/reference.hpp"
#include "lt/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "1.0.0";

std::uint64_t fnv64_bytes(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string file_hash(const std::string& path) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv64_bytes(read_file(path))));
    return buf;
}

json base_manifest(const std::string& command, const std::vector<std::string>& argv) {
    return json{{"tool", "ltgame"},
                {"version", kToolVersion},
                {"command", command},
                {"argv", argv},
                {"inputs", json::object()},
                {"outputs", json::array()}};
}

void write_manifest(const json& manifest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << manifest.dump(2) << "\n";
}

lt::calib::CalibrationConfig config_from_json(const json& j) {
    lt::calib::CalibrationConfig c;
    c.em_tol = j.value("em_tol", c.em_tol);
    c.em_max_iter = j.value("em_max_iter", c.em_max_iter);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs_per_em_iter = j.value("epochs_per_em_iter", c.epochs_per_em_iter);
    c.smoothing_sigma = j.value("smoothing_sigma", c.smoothing_sigma);
    c.seed = j.value("seed", c.seed);
    c.horizon = j.value("horizon", c.horizon);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.lambda_bin_width = j.value("lambda_bin_width", c.lambda_bin_width);
    c.lambda_max_distance = j.value("lambda_max_distance", c.lambda_max_distance);
    return c;
}

lt::sim::Scenario parse_scenario(const std::string& name) {
    lt::sim::Scenario sc;
    if (name == "table3-case1") {
        sc.lv_speed = 10.80 / 3.6;
        sc.lv_dist = 23.51;
        sc.tv_speed = 10.80 / 3.6;
        sc.tv_dist = 22.56;
        return sc;
    }
    if (name == "table3-case2") {
        sc.lv_speed = 14.40 / 3.6;
        sc.lv_dist = 15.50;
        sc.tv_speed = 28.80 / 3.6;
        sc.tv_dist = 33.72;
        return sc;
    }
    const json j = json::parse(read_file(name));
    sc.lv_speed = j.at("lv").at("speed_kmh").get<double>() / 3.6;
    sc.lv_dist = j.at("lv").at("dist_m").get<double>();
    sc.tv_speed = j.at("tv").at("speed_kmh").get<double>() / 3.6;
    sc.tv_dist = j.at("tv").at("dist_m").get<double>();
    return sc;
}

std::vector<lt::calib::DecisionFrame> load_data_any(const std::string& path) {
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    in.close();
    if (header.rfind("episode_id,frame_id,role", 0) == 0)
        return lt::data::load_frames_csv(path);
    std::vector<std::pair<std::int64_t, std::string>> rejected;
    const auto episodes = lt::data::load_episodes(path, {}, &rejected);
    for (const auto& [id, reason] : rejected)
        std::cerr << "episode " << id << " rejected: " << reason << "\n";
    return lt::data::collect_frames(episodes);
}

int run(const std::vector<std::string>& argv);

int cmd_rerun(const std::string& manifest_path) {
    const json m = json::parse(read_file(manifest_path));
    return run(m.at("argv").get<std::vector<std::string>>());
}

int run(const std::vector<std::string>& argv) {
    CLI::App app{"Two-player left-turn interaction model: QRE solving, EM calibration, "
                 "and kinematic simulation"};
    app.require_subcommand(1);

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "Fit payoff weights and rationality profiles");
    std::string cal_data, cal_config, cal_out;
    cal->add_option("--data", cal_data, "episode or frames CSV")->required();
    cal->add_option("--config", cal_config, "calibration config JSON");
    cal->add_option("--out", cal_out, "output directory")->required();

    // simulate
    auto* simc = app.add_subcommand("simulate", "Run one interaction episode");
    std::string sim_params, sim_scenario, sim_mode = "qre", sim_out;
    simc->add_option("--params", sim_params, "parameter JSON")->required();
    simc->add_option("--scenario", sim_scenario,
                     "scenario JSON path, or table3-case1 / table3-case2")
        ->required();
    simc->add_option("--mode", sim_mode, "qre | qre0 | ne");
    simc->add_option("--out", sim_out, "output directory")->required();

    // batch
    auto* bat = app.add_subcommand("batch", "Paired Monte-Carlo comparison of all modes");
    std::string bat_params, bat_out;
    int bat_n = 1000;
    std::uint64_t bat_seed = 0;
    bat->add_option("--params", bat_params, "parameter JSON")->required();
    bat->add_option("--n", bat_n, "number of scenario draws");
    bat->add_option("--seed", bat_seed, "master seed");
    bat->add_option("--out", bat_out, "output directory")->required();

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic labeled dataset");
    std::string gen_params, gen_out;
    int gen_n = 50;
    std::uint64_t gen_seed = 0;
    gen->add_option("--params", gen_params, "generator parameter JSON")->required();
    gen->add_option("--n", gen_n, "number of episodes");
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("--out", gen_out, "output episode CSV path")->required();

    // init-params
    auto* init = app.add_subcommand("init-params", "Write the reference parameter file");
    std::string init_out;
    init->add_option("--out", init_out, "output parameter JSON path")->required();

    // rerun
    auto* rer = app.add_subcommand("rerun", "Re-execute a recorded run manifest");
    std::string rer_manifest;
    rer->add_option("--manifest", rer_manifest, "manifest JSON")->required();

    try {
        std::vector<std::string> reversed(argv.rbegin(), argv.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) {
            std::cerr << e.what() << "\n";
            return 1;
        }
        return app.exit(e);  // --help
    }

    if (rer->parsed()) return cmd_rerun(rer_manifest);

    if (cal->parsed()) {
        if (!fs::exists(cal_data)) {
            std::cerr << "data file not found: " << cal_data << "\n";
            return 2;
        }
        lt::calib::CalibrationConfig config;
        std::string config_text = "{}";
        if (!cal_config.empty()) {
            config_text = read_file(cal_config);
            config = config_from_json(json::parse(config_text));
        }
        std::vector<lt::calib::DecisionFrame> frames;
        try {
            frames = load_data_any(cal_data);
            if (frames.empty()) throw std::runtime_error("no frames in " + cal_data);
        } catch (const std::exception& e) {
            std::cerr << e.what() << "\n";
            return 2;
        }
        lt::calib::CalibrationResult result;
        try {
            result = lt::calib::em_calibrate(frames, config);
        } catch (const std::exception& e) {
            std::cerr << e.what() << "\n";
            return 3;
        }
        result.params.config_hash = std::to_string(fnv64_bytes(config_text));
        fs::create_directories(cal_out);
        lt::calib::save_params(result.params, cal_out + "/params.json");
        lt::calib::save_history(result.history, cal_out + "/history.csv");
        json m = base_manifest("calibrate", argv);
        m["inputs"][cal_data] = file_hash(cal_data);
        if (!cal_config.empty()) m["inputs"][cal_config] = file_hash(cal_config);
        m["seed"] = config.seed;
        m["outputs"] = {cal_out + "/params.json", cal_out + "/history.csv"};
        write_manifest(m, cal_out + "/manifest.json");
        std::cout << "converged=" << (result.converged ? "yes" : "no")
                  << " iterations=" << result.history.size() << "\n";
        return 0;
    }

    if (simc->parsed()) {
        const auto params = lt::calib::load_params(sim_params);
        lt::sim::SimConfig config;
        config.mode = lt::sim::mode_from_string(sim_mode);  // throws -> usage error
        const lt::sim::Scenario sc = parse_scenario(sim_scenario);
        lt::sim::SimulationResult result;
        try {
            result = lt::sim::run_episode(sc, lt::data::make_geometry(), params, config);
        } catch (const std::domain_error& e) {
            std::cerr << e.what() << "\n";
            return 4;
        }
        fs::create_directories(sim_out);
        lt::sim::save_result_json(result, sim_out + "/result.json");
        lt::sim::save_profile_csv(result, sim_out + "/profile.csv");
        json m = base_manifest("simulate", argv);
        m["inputs"][sim_params] = file_hash(sim_params);
        if (fs::exists(sim_scenario)) m["inputs"][sim_scenario] = file_hash(sim_scenario);
        m["outputs"] = {sim_out + "/result.json", sim_out + "/profile.csv"};
        write_manifest(m, sim_out + "/manifest.json");
        std::cout << "collided=" << (result.collided ? "yes" : "no");
        if (result.completed) std::cout << " sct=" << result.completion_time;
        if (result.pet_valid) std::cout << " pet=" << result.pet;
        std::cout << " fuel_ml=" << result.fuel_total << "\n";
        return 0;
    }

    if (bat->parsed()) {
        if (bat_n < 1) {
            std::cerr << "--n must be >= 1\n";
            return 1;
        }
        const auto params = lt::calib::load_params(bat_params);
        const lt::sim::MonteCarloSummary summary =
            lt::sim::monte_carlo(params, lt::sim::SimConfig{}, bat_n, bat_seed);
        fs::create_directories(bat_out);
        lt::sim::save_summary_csv(summary, bat_out + "/summary.csv");
        json m = base_manifest("batch", argv);
        m["inputs"][bat_params] = file_hash(bat_params);
        m["seed"] = bat_seed;
        m["outputs"] = {bat_out + "/summary.csv"};
        write_manifest(m, bat_out + "/manifest.json");
        return 0;
    }

    if (gen->parsed()) {
        if (gen_n < 1) {
            std::cerr << "--n must be >= 1\n";
            return 1;
        }
        const auto params = lt::calib::load_params(gen_params);
        const auto episodes = lt::data::generate_synthetic(params, gen_n, gen_seed);
        lt::data::save_episodes_csv(episodes, gen_out);
        lt::data::save_frames_csv(lt::data::collect_frames(episodes), gen_out + ".frames.csv");
        json m = base_manifest("gen", argv);
        m["inputs"][gen_params] = file_hash(gen_params);
        m["seed"] = gen_seed;
        m["outputs"] = {gen_out, gen_out + ".frames.csv"};
        write_manifest(m, gen_out + ".manifest.json");
        return 0;
    }

    if (init->parsed()) {
        lt::calib::save_params(lt::reference_parameters(), init_out);
        return 0;
    }

    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
