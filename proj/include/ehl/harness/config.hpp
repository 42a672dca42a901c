#pragma once

// Experiment configuration, loaded from a JSON document with five optional
// sections. Missing keys keep their defaults; unknown keys are rejected so a
// typo cannot silently fall back to a default.
//
//   {
//     "system":     { "bandwidth_hz", "noise_dbm", "arrival_rate_bps", "p0_max_w", "p1_w",
//                     "battery_capacity_j", "slot_s", "penalty_nu", "zeta0", "zeta1",
//                     "reward_mode" ("literal" | "hinge"), "battery_hard_clip",
//                     "channel_coherence_slots" },
//     "rl":         { "learning_rate", "n_traj", "horizon", "divergence_bound", "policy_std",
//                     "gamma", "discounted", "use_baseline", "curvature_eps", "curvature_floor" },
//     "lifelong":   { "mu1", "mu2", "eta", "latent_dim", "lasso_tol", "lasso_max_iter",
//                     "pinv_rcond", "basis_init_range", "train_iterations", "probe_budget",
//                     "normalize_curvature" },
//     "lyapunov":   { "V", "grid_p0", "grid_alpha", "battery_target_j" },
//     "experiment": { "n_train_tasks", "test_profiles" ([{task_id, zeta_eh, lambda_eff}]),
//                     "test_iterations", "seeds", "master_seed", "output_dir", "threads",
//                     "convergence_fraction", "window" }
//   }
//
// Precedence for output_dir and threads: command line, then EHL_OUT_DIR /
// EHL_THREADS, then the file.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehl/baselines.hpp"
#include "ehl/env.hpp"
#include "ehl/harness/metrics.hpp"
#include "ehl/harness/tasks.hpp"
#include "ehl/lifelong.hpp"
#include "ehl/rl.hpp"

namespace ehl::harness {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    SystemConfig system;
    RlHyperparams rl;
    LifelongHyperparams lifelong;
    LyapunovConfig lyapunov = LyapunovConfig::defaults_for(SystemConfig{});

    std::size_t n_train_tasks = 25;
    std::vector<TaskProfile> test_profiles = test_tasks();
    std::size_t test_iterations = 200;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::uint64_t master_seed = 20240601;
    std::string output_dir = "out";
    std::size_t threads = 0; // 0: one per hardware thread
    double convergence_fraction = 0.9;
    std::size_t window = kDefaultWindow;

    void validate() const {
        try {
            system.validate();
            lifelong.validate();
            lyapunov.validate();
            for (const TaskProfile& t : test_profiles) t.validate();
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        if (!(rl.learning_rate > 0.0) || rl.n_traj < 1 || rl.horizon < 1 || !(rl.divergence_bound > 0.0)) {
            throw ConfigError("rl: learning_rate, n_traj, horizon and divergence_bound must be positive");
        }
        if (!(rl.gamma > 0.0 && rl.gamma <= 1.0)) throw ConfigError("rl: gamma must lie in (0, 1]");
        if (!(rl.curvature_eps > 0.0) || !(rl.curvature_floor >= 0.0)) {
            throw ConfigError("rl: curvature_eps must be positive and curvature_floor non-negative");
        }
        if (n_train_tasks < 1) throw ConfigError("experiment: n_train_tasks must be >= 1");
        if (test_profiles.empty()) throw ConfigError("experiment: test_profiles is empty");
        std::set<int> ids;
        for (const TaskProfile& t : test_profiles) {
            if (!ids.insert(t.task_id).second) throw ConfigError("experiment: duplicate test task_id");
        }
        if (seeds.empty()) throw ConfigError("experiment: seeds is empty");
        if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
            throw ConfigError("experiment: duplicate seeds");
        }
        if (test_iterations <= lifelong.probe_budget) {
            throw ConfigError("experiment: test_iterations must exceed lifelong.probe_budget");
        }
        if (!(convergence_fraction > 0.0 && convergence_fraction <= 1.0)) {
            throw ConfigError("experiment: convergence_fraction must lie in (0, 1]");
        }
        if (window < 1) throw ConfigError("experiment: window must be >= 1");
    }
};

namespace detail {

/// Reads keys out of one JSON object and remembers which were consumed.
class Section {
public:
    Section(const nlohmann::json& root, std::string name) : name_(std::move(name)) {
        if (root.contains(name_)) {
            node_ = &root.at(name_);
            if (!node_->is_object()) throw ConfigError("config: section '" + name_ + "' must be an object");
        }
    }

    template <class T>
    void get(const char* key, T& out) {
        if (node_ == nullptr || !node_->contains(key)) return;
        seen_.insert(key);
        try {
            out = node_->at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config: " + name_ + "." + key + ": " + e.what());
        }
    }

    bool has(const char* key) const { return node_ != nullptr && node_->contains(key); }

    const nlohmann::json& raw(const char* key) {
        seen_.insert(key);
        return node_->at(key);
    }

    void finish() const {
        if (node_ == nullptr) return;
        for (const auto& item : node_->items()) {
            if (!seen_.count(item.key())) throw ConfigError("config: unknown key " + name_ + "." + item.key());
        }
    }

private:
    std::string name_;
    const nlohmann::json* node_ = nullptr;
    std::set<std::string> seen_;
};

inline std::size_t parse_count(const std::string& text, const char* what) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || text.front() == '-') {
        throw ConfigError(std::string(what) + ": expected a non-negative integer, got '" + text + "'");
    }
    return static_cast<std::size_t>(v);
}

} // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& root) {
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    for (const auto& item : root.items()) {
        static const std::set<std::string> known = {"system", "rl", "lifelong", "lyapunov", "experiment"};
        if (!known.count(item.key())) throw ConfigError("config: unknown section '" + item.key() + "'");
    }
    ExperimentConfig c;

    detail::Section sys(root, "system");
    sys.get("bandwidth_hz", c.system.bandwidth_W);
    if (sys.has("noise_dbm")) {
        double dbm = 0.0;
        sys.get("noise_dbm", dbm);
        c.system.noise_N0 = dbm_to_watts(dbm);
    }
    sys.get("arrival_rate_bps", c.system.arrival_rate);
    sys.get("p0_max_w", c.system.P0_max);
    sys.get("p1_w", c.system.P1_fixed);
    sys.get("battery_capacity_j", c.system.battery_cap_B);
    sys.get("slot_s", c.system.slot_duration);
    sys.get("penalty_nu", c.system.penalty_nu);
    sys.get("zeta0", c.system.zeta0);
    sys.get("zeta1", c.system.zeta1);
    if (sys.has("reward_mode")) {
        std::string mode;
        sys.get("reward_mode", mode);
        if (mode == "literal") c.system.reward_mode = RewardMode::literal;
        else if (mode == "hinge") c.system.reward_mode = RewardMode::hinge;
        else throw ConfigError("config: system.reward_mode must be 'literal' or 'hinge'");
    }
    sys.get("battery_hard_clip", c.system.battery_hard_clip);
    sys.get("channel_coherence_slots", c.system.channel_coherence_slots);
    sys.finish();

    detail::Section rl(root, "rl");
    rl.get("learning_rate", c.rl.learning_rate);
    rl.get("n_traj", c.rl.n_traj);
    rl.get("horizon", c.rl.horizon);
    rl.get("divergence_bound", c.rl.divergence_bound);
    if (rl.has("policy_std")) {
        double sd = 0.0;
        rl.get("policy_std", sd);
        if (!(sd > 0.0)) throw ConfigError("config: rl.policy_std must be positive");
        c.rl.log_std = std::log(sd);
    }
    rl.get("gamma", c.rl.gamma);
    rl.get("discounted", c.rl.discounted);
    rl.get("use_baseline", c.rl.use_baseline);
    rl.get("curvature_eps", c.rl.curvature_eps);
    rl.get("curvature_floor", c.rl.curvature_floor);
    rl.finish();

    detail::Section lf(root, "lifelong");
    lf.get("mu1", c.lifelong.mu1);
    lf.get("mu2", c.lifelong.mu2);
    lf.get("eta", c.lifelong.eta);
    lf.get("latent_dim", c.lifelong.latent_dim);
    lf.get("lasso_tol", c.lifelong.lasso_tol);
    lf.get("lasso_max_iter", c.lifelong.lasso_max_iter);
    lf.get("pinv_rcond", c.lifelong.pinv_rcond);
    lf.get("basis_init_range", c.lifelong.basis_init_range);
    lf.get("train_iterations", c.lifelong.train_iterations);
    lf.get("probe_budget", c.lifelong.probe_budget);
    lf.get("normalize_curvature", c.lifelong.normalize_curvature);
    lf.finish();

    // Lyapunov defaults follow the configured battery capacity.
    c.lyapunov = LyapunovConfig::defaults_for(c.system);
    detail::Section ly(root, "lyapunov");
    ly.get("V", c.lyapunov.V);
    ly.get("grid_p0", c.lyapunov.grid_p0);
    ly.get("grid_alpha", c.lyapunov.grid_alpha);
    ly.get("battery_target_j", c.lyapunov.battery_target);
    ly.finish();

    detail::Section ex(root, "experiment");
    ex.get("n_train_tasks", c.n_train_tasks);
    if (ex.has("test_profiles")) {
        const nlohmann::json& list = ex.raw("test_profiles");
        if (!list.is_array()) throw ConfigError("config: experiment.test_profiles must be an array");
        c.test_profiles.clear();
        for (const nlohmann::json& item : list) {
            TaskProfile t;
            try {
                for (const auto& kv : item.items()) {
                    if (kv.key() != "task_id" && kv.key() != "zeta_eh" && kv.key() != "lambda_eff") {
                        throw ConfigError("config: unknown key in test profile: " + kv.key());
                    }
                }
                t.task_id = item.at("task_id").get<int>();
                t.zeta_eh = item.at("zeta_eh").get<double>();
                t.lambda_eff = item.at("lambda_eff").get<double>();
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string("config: bad test profile: ") + e.what());
            }
            c.test_profiles.push_back(t);
        }
    }
    ex.get("test_iterations", c.test_iterations);
    ex.get("seeds", c.seeds);
    ex.get("master_seed", c.master_seed);
    ex.get("output_dir", c.output_dir);
    ex.get("threads", c.threads);
    ex.get("convergence_fraction", c.convergence_fraction);
    ex.get("window", c.window);
    ex.finish();

    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path.string());
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(is, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    return config_from_json(root);
}

/// Applies EHL_OUT_DIR and EHL_THREADS when they are set and non-empty.
inline void apply_env_overrides(ExperimentConfig& c) {
    if (const char* dir = std::getenv("EHL_OUT_DIR"); dir != nullptr && *dir != '\0') {
        c.output_dir = dir;
    }
    if (const char* th = std::getenv("EHL_THREADS"); th != nullptr && *th != '\0') {
        c.threads = detail::parse_count(th, "EHL_THREADS");
    }
}

/// The parameters that shape results, for embedding in outputs. Output
/// location and thread count are left out so they cannot perturb metric files.
inline nlohmann::ordered_json describe(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["system"] = {{"bandwidth_hz", c.system.bandwidth_W},
                   {"noise_w", c.system.noise_N0},
                   {"arrival_rate_bps", c.system.arrival_rate},
                   {"p0_max_w", c.system.P0_max},
                   {"p1_w", c.system.P1_fixed},
                   {"battery_capacity_j", c.system.battery_cap_B},
                   {"slot_s", c.system.slot_duration},
                   {"penalty_nu", c.system.penalty_nu},
                   {"zeta0", c.system.zeta0},
                   {"zeta1", c.system.zeta1},
                   {"reward_mode", c.system.reward_mode == RewardMode::literal ? "literal" : "hinge"},
                   {"battery_hard_clip", c.system.battery_hard_clip},
                   {"channel_coherence_slots", c.system.channel_coherence_slots}};
    j["rl"] = {{"learning_rate", c.rl.learning_rate},
               {"n_traj", c.rl.n_traj},
               {"horizon", c.rl.horizon},
               {"divergence_bound", c.rl.divergence_bound},
               {"policy_std", std::exp(c.rl.log_std)},
               {"gamma", c.rl.gamma},
               {"discounted", c.rl.discounted},
               {"use_baseline", c.rl.use_baseline},
               {"curvature_eps", c.rl.curvature_eps},
               {"curvature_floor", c.rl.curvature_floor}};
    j["lifelong"] = {{"mu1", c.lifelong.mu1},
                     {"mu2", c.lifelong.mu2},
                     {"eta", c.lifelong.eta},
                     {"latent_dim", c.lifelong.latent_dim},
                     {"lasso_tol", c.lifelong.lasso_tol},
                     {"lasso_max_iter", c.lifelong.lasso_max_iter},
                     {"pinv_rcond", c.lifelong.pinv_rcond},
                     {"basis_init_range", c.lifelong.basis_init_range},
                     {"train_iterations", c.lifelong.train_iterations},
                     {"probe_budget", c.lifelong.probe_budget},
                     {"normalize_curvature", c.lifelong.normalize_curvature}};
    j["lyapunov"] = {{"V", c.lyapunov.V},
                     {"grid_p0", c.lyapunov.grid_p0},
                     {"grid_alpha", c.lyapunov.grid_alpha},
                     {"battery_target_j", c.lyapunov.battery_target}};
    nlohmann::ordered_json profiles = nlohmann::ordered_json::array();
    for (const TaskProfile& t : c.test_profiles) {
        profiles.push_back({{"task_id", t.task_id}, {"zeta_eh", t.zeta_eh}, {"lambda_eff", t.lambda_eff}});
    }
    j["experiment"] = {{"n_train_tasks", c.n_train_tasks},
                       {"test_profiles", profiles},
                       {"test_iterations", c.test_iterations},
                       {"seeds", c.seeds},
                       {"master_seed", c.master_seed},
                       {"convergence_fraction", c.convergence_fraction},
                       {"window", c.window}};
    return j;
}

} // namespace ehl::harness
