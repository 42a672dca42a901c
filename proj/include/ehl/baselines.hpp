#pragma once

// Comparison methods: policy gradient from a cold start, and a per-slot
// drift-plus-penalty controller that never learns across tasks.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ehl/env.hpp"
#include "ehl/rl.hpp"
#include "ehl/rng.hpp"

namespace ehl {

inline std::vector<double> vanilla_rl(const TaskProfile& task, const SystemConfig& cfg, std::size_t iterations,
                                      const RlHyperparams& hp, Rng& rng) {
    const Eigen::Index dim = static_cast<Eigen::Index>(FeatureMap::kFeatures) * kActionDims;
    return train_task(Eigen::VectorXd::Zero(dim), task, cfg, iterations, hp, rng).return_curve;
}

struct LyapunovConfig {
    double V = 50.0;              // penalty weight; 10 * B at the default capacity
    std::size_t grid_p0 = 9;
    std::size_t grid_alpha = 9;
    double battery_target = 2.5;  // J; B / 2 at the default capacity

    static LyapunovConfig defaults_for(const SystemConfig& cfg) {
        LyapunovConfig l;
        l.V = 10.0 * cfg.battery_cap_B;
        l.battery_target = 0.5 * cfg.battery_cap_B;
        return l;
    }

    void validate() const {
        if (!(V > 0.0)) throw std::invalid_argument("LyapunovConfig: V must be positive");
        if (grid_p0 < 2 || grid_alpha < 2) throw std::invalid_argument("LyapunovConfig: grids need >= 2 points");
        if (!(battery_target >= 0.0)) throw std::invalid_argument("LyapunovConfig: battery target must be >= 0");
    }
};

namespace detail {

/// Bits per unit slot share at power p over gain h.
inline double bits_per_share(double p, double h, const SystemConfig& cfg) {
    return cfg.bandwidth_W * std::log2(1.0 + p * h / cfg.noise_N0) * cfg.slot_duration;
}

/// Joules per unit harvest share when TX0 keeps p0 for data.
inline double joules_per_share(double p0, const SystemState& s, const TaskProfile& task, const SystemConfig& cfg) {
    return task.lambda_eff * (cfg.P0_max - p0) * s.h_eh * cfg.slot_duration;
}

inline double drift_plus_penalty(const SystemState& s, const ControlAction& a, double bits0, double bits1,
                                 double joules, const SystemConfig& cfg, const LyapunovConfig& lyap) {
    const double energy = a.p0 * a.alpha0 + cfg.P1_fixed * a.alpha1;
    const double battery_gap = lyap.battery_target - s.b;
    return lyap.V * energy - s.q0 * (bits0 * a.alpha0) - s.q1 * (bits1 * a.alpha1) -
           battery_gap * (joules * a.alpha_eh - cfg.P1_fixed * a.alpha1 * cfg.slot_duration);
}

} // namespace detail

/// V * energy - q0 d0 - q1 d1 - (target - b) * (harvested energy - TX1 drain).
inline double lyapunov_surrogate(const SystemState& s, const ControlAction& a, const TaskProfile& task,
                                 const SystemConfig& cfg, const LyapunovConfig& lyap) {
    return detail::drift_plus_penalty(s, a, detail::bits_per_share(a.p0, s.h0, cfg),
                                      detail::bits_per_share(cfg.P1_fixed, s.h1, cfg),
                                      detail::joules_per_share(a.p0, s, task, cfg), cfg, lyap);
}

/// Candidate actions in lexicographic (p0, alpha0, alpha1, alpha_eh) order,
/// restricted to alpha0 + alpha1 + alpha_eh <= 1.
inline std::vector<ControlAction> lyapunov_grid(const SystemConfig& cfg, const LyapunovConfig& lyap) {
    const std::size_t np = lyap.grid_p0, na = lyap.grid_alpha, top = na - 1;
    auto level = [](std::size_t k, std::size_t n) { return static_cast<double>(k) / static_cast<double>(n - 1); };
    std::vector<ControlAction> grid;
    for (std::size_t ip = 0; ip < np; ++ip) {
        const double p0 = ip + 1 == np ? cfg.P0_max : cfg.P0_max * level(ip, np);
        for (std::size_t i0 = 0; i0 <= top; ++i0) {
            for (std::size_t i1 = 0; i0 + i1 <= top; ++i1) {
                for (std::size_t ie = 0; i0 + i1 + ie <= top; ++ie) {
                    ControlAction a{p0, level(i0, na), level(i1, na), level(ie, na)};
                    while (a.alpha0 + a.alpha1 + a.alpha_eh > 1.0) {
                        a.alpha_eh = std::nextafter(a.alpha_eh, 0.0);
                    }
                    grid.push_back(a);
                }
            }
        }
    }
    return grid;
}

/// Exhaustive minimization of the drift-plus-penalty surrogate over the
/// grid. Ties go to lower energy, then to the earlier grid point.
inline ControlAction lyapunov_controller(const SystemState& s, const TaskProfile& task, const SystemConfig& cfg,
                                         const LyapunovConfig& lyap, const std::vector<ControlAction>& grid) {
    if (!s.valid()) {
        throw std::domain_error("lyapunov_controller: invalid state");
    }
    const double bits1 = detail::bits_per_share(cfg.P1_fixed, s.h1, cfg);
    double cached_p0 = std::numeric_limits<double>::quiet_NaN();
    double bits0 = 0.0, joules = 0.0;

    const ControlAction* best = nullptr;
    double best_value = std::numeric_limits<double>::infinity();
    double best_energy = std::numeric_limits<double>::infinity();
    for (const ControlAction& a : grid) {
        if (a.p0 != cached_p0) {
            cached_p0 = a.p0;
            bits0 = detail::bits_per_share(a.p0, s.h0, cfg);
            joules = detail::joules_per_share(a.p0, s, task, cfg);
        }
        const double value = detail::drift_plus_penalty(s, a, bits0, bits1, joules, cfg, lyap);
        const double energy = a.p0 * a.alpha0 + cfg.P1_fixed * a.alpha1;
        if (value < best_value || (value == best_value && energy < best_energy)) {
            best = &a;
            best_value = value;
            best_energy = energy;
        }
    }
    if (best == nullptr) {
        throw std::logic_error("lyapunov_controller: empty grid");
    }
    return *best;
}

inline ControlAction lyapunov_controller(const SystemState& s, const TaskProfile& task, const SystemConfig& cfg,
                                         const LyapunovConfig& lyap) {
    return lyapunov_controller(s, task, cfg, lyap, lyapunov_grid(cfg, lyap));
}

struct LyapunovTrace {
    std::vector<double> rewards;
    std::vector<double> q0, q1, b; // pre-decision state per slot
    std::vector<ControlAction> actions;

    double mean_reward() const {
        double sum = 0.0;
        for (double r : rewards) sum += r;
        return rewards.empty() ? 0.0 : sum / static_cast<double>(rewards.size());
    }
};

/// One episode of `horizon` slots from an empty system.
inline LyapunovTrace run_lyapunov(const TaskProfile& task, const SystemConfig& cfg, const LyapunovConfig& lyap,
                                  std::size_t horizon, Rng& rng) {
    if (horizon < 1) {
        throw std::invalid_argument("run_lyapunov: horizon must be >= 1");
    }
    lyap.validate();
    const std::vector<ControlAction> grid = lyapunov_grid(cfg, lyap);
    LyapunovTrace trace;
    trace.rewards.reserve(horizon);
    SystemState s = initial_state(task, cfg, rng);
    for (std::size_t t = 0; t < horizon; ++t) {
        const ControlAction a = lyapunov_controller(s, task, cfg, lyap, grid);
        const bool redraw = (t + 1) % cfg.channel_coherence_slots == 0;
        const StepOutcome out = step(s, a, task, cfg, rng, redraw);
        trace.q0.push_back(s.q0);
        trace.q1.push_back(s.q1);
        trace.b.push_back(s.b);
        trace.actions.push_back(a);
        trace.rewards.push_back(out.reward);
        s = out.next_state;
    }
    return trace;
}

/// Mean per-slot reward of `episodes` independent episodes, one point per
/// episode, so the controller's record lines up with the learners' curves.
inline std::vector<double> lyapunov_curve(const TaskProfile& task, const SystemConfig& cfg,
                                          const LyapunovConfig& lyap, std::size_t horizon, std::size_t episodes,
                                          Rng& rng) {
    std::vector<double> curve;
    curve.reserve(episodes);
    for (std::size_t e = 0; e < episodes; ++e) {
        curve.push_back(run_lyapunov(task, cfg, lyap, horizon, rng).mean_reward());
    }
    return curve;
}

} // namespace ehl
