#pragma once

// Two-pair energy-harvesting sensor network: TX0 runs from mains power and
// splits its budget between data to RX0 and wireless power transfer to TX1;
// TX1 transmits at fixed power from a harvested-energy battery.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ehl/rng.hpp"

namespace ehl {

inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }

enum class RewardMode {
    literal, // signed penalty terms, evaluated as written
    hinge,   // each penalty term passed through max(., 0)
};

struct SystemConfig {
    double bandwidth_W = 5e6;                 // Hz
    double noise_N0 = dbm_to_watts(-120.0);   // effective noise power, W
    double arrival_rate = 1000.0;             // bits/s per transmitter
    double P0_max = 0.03;                     // W
    double P1_fixed = 0.01;                   // W
    double battery_cap_B = 5.0;               // J
    double slot_duration = 1.0;               // s
    double penalty_nu = 1.0;
    double zeta0 = 1.0;                       // Rayleigh scale, TX0 -> RX0
    double zeta1 = 1.0;                       // Rayleigh scale, TX1 -> RX1
    RewardMode reward_mode = RewardMode::literal;
    bool battery_hard_clip = false;           // clip b at B after each update
    std::size_t channel_coherence_slots = 1;  // redraw gains every k slots

    void validate() const {
        auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
        if (!positive(bandwidth_W) || !positive(noise_N0) || !positive(P0_max) ||
            !positive(P1_fixed) || !positive(battery_cap_B) || !positive(slot_duration)) {
            throw std::invalid_argument("SystemConfig: W, N0, P0, P1, B and slot duration must be positive");
        }
        if (!(arrival_rate >= 0.0) || !std::isfinite(arrival_rate)) {
            throw std::invalid_argument("SystemConfig: arrival rate must be non-negative");
        }
        if (!(penalty_nu >= 0.0) || !std::isfinite(penalty_nu)) {
            throw std::invalid_argument("SystemConfig: penalty_nu must be non-negative");
        }
        if (!positive(zeta0) || !positive(zeta1)) {
            throw std::invalid_argument("SystemConfig: link Rayleigh scales must be positive");
        }
        if (channel_coherence_slots == 0) {
            throw std::invalid_argument("SystemConfig: channel_coherence_slots must be >= 1");
        }
    }
};

/// One stationary energy-harvesting condition.
struct TaskProfile {
    int task_id = 0;
    double zeta_eh = 1.0;    // Rayleigh scale of the TX0 -> TX1 power link
    double lambda_eff = 0.5; // RF-to-DC conversion efficiency, (0, 1]

    void validate() const {
        if (task_id < 0) {
            throw std::invalid_argument("TaskProfile: task_id must be >= 0");
        }
        if (!(zeta_eh > 0.0) || !std::isfinite(zeta_eh)) {
            throw std::invalid_argument("TaskProfile: zeta_eh must be positive");
        }
        if (!(lambda_eff > 0.0 && lambda_eff <= 1.0)) {
            throw std::invalid_argument("TaskProfile: lambda_eff must lie in (0, 1]");
        }
    }

    friend bool operator==(const TaskProfile&, const TaskProfile&) = default;
};

struct SystemState {
    double q0 = 0.0;   // bits
    double q1 = 0.0;   // bits
    double b = 0.0;    // J, may exceed B unless hard clipping is on
    double h0 = 0.0;
    double h1 = 0.0;
    double h_eh = 0.0;

    bool valid() const {
        for (double v : {q0, q1, b, h0, h1, h_eh}) {
            if (!(v >= 0.0) || !std::isfinite(v)) return false;
        }
        return true;
    }

    friend bool operator==(const SystemState&, const SystemState&) = default;
};

struct ControlAction {
    double p0 = 0.0;       // W
    double alpha0 = 0.0;   // slot share for TX0 data
    double alpha1 = 0.0;   // slot share for TX1 data
    double alpha_eh = 0.0; // slot share for power transfer

    bool feasible(const SystemConfig& cfg) const {
        auto unit = [](double a) { return a >= 0.0 && a <= 1.0; };
        return p0 >= 0.0 && p0 <= cfg.P0_max && unit(alpha0) && unit(alpha1) && unit(alpha_eh) &&
               alpha0 + alpha1 + alpha_eh <= 1.0;
    }

    friend bool operator==(const ControlAction&, const ControlAction&) = default;
};

struct StepOutcome {
    SystemState next_state;
    double reward = 0.0;
    double d0 = 0.0; // bits
    double d1 = 0.0; // bits
    double harvested_energy = 0.0; // J
    bool battery_over_capacity = false;
    bool queue0_underserved = false;
    bool queue1_underserved = false;

    friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

/// Bits delivered in one slot: W log2(1 + p h / N0) * alpha * slot.
inline double transmitted_data(double p, double h, double alpha, const SystemConfig& cfg) {
    if (!(p >= 0.0) || !(h >= 0.0) || !(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::domain_error("transmitted_data: need p >= 0, h >= 0, alpha in [0, 1]");
    }
    return cfg.bandwidth_W * std::log2(1.0 + p * h / cfg.noise_N0) * alpha * cfg.slot_duration;
}

/// Power reaching TX1's harvester when TX0 keeps p0 for data.
inline double harvested_power(double p0, double h_eh, const TaskProfile& task, const SystemConfig& cfg) {
    if (!(p0 >= 0.0) || p0 > cfg.P0_max) {
        throw std::domain_error("harvested_power: p0 must lie in [0, P0_max]");
    }
    if (!(h_eh >= 0.0)) {
        throw std::domain_error("harvested_power: channel gain must be non-negative");
    }
    return task.lambda_eff * (cfg.P0_max - p0) * h_eh;
}

inline double queue_update(double q, double d, double a) {
    return std::max(q - d, 0.0) + a;
}

inline double battery_update(double b, double p1, double alpha1, double p_eh, double alpha_eh,
                             double slot_duration) {
    return std::max(b - p1 * alpha1 * slot_duration, 0.0) + p_eh * alpha_eh * slot_duration;
}

/// Per-slot reward. `d0`, `d1` are this slot's deliveries; `state` is the
/// pre-update state, so the battery and queue terms see b_t and q_t.
inline double reward(const SystemState& state, const ControlAction& action, double d0, double d1,
                     const SystemConfig& cfg) {
    const double energy = action.p0 * action.alpha0 + cfg.P1_fixed * action.alpha1;
    double battery = state.b - cfg.battery_cap_B;
    double backlog0 = state.q0 - d0;
    double backlog1 = state.q1 - d1;
    if (cfg.reward_mode == RewardMode::hinge) {
        battery = std::max(battery, 0.0);
        backlog0 = std::max(backlog0, 0.0);
        backlog1 = std::max(backlog1, 0.0);
    }
    return -energy - cfg.penalty_nu * (battery + backlog0 + backlog1);
}

/// Raw action: (p0 logit, TX0 share logit, TX1 share logit, harvest share logit).
using RawAction = Eigen::Vector4d;

/// Share logits saturate here so the idle share never underflows to zero.
inline constexpr double kMaxShareLogit = 30.0;

/// Maps an unconstrained 4-vector onto the feasible action set. p0 goes
/// through a scaled sigmoid; the three time shares are a softmax over the
/// three logits plus a fixed zero logit for the idle remainder.
inline ControlAction project_action(const RawAction& raw, const SystemConfig& cfg) {
    if (!raw.allFinite()) {
        throw std::domain_error("project_action: raw action must be finite");
    }
    ControlAction a;
    a.p0 = cfg.P0_max / (1.0 + std::exp(-raw[0]));

    double logits[4];
    for (int i = 0; i < 3; ++i) {
        logits[i] = std::clamp(raw[i + 1], -kMaxShareLogit, kMaxShareLogit);
    }
    logits[3] = 0.0;
    const double m = *std::max_element(logits, logits + 4);
    double e[4];
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
        e[i] = std::exp(logits[i] - m);
        sum += e[i];
    }
    a.alpha0 = e[0] / sum;
    a.alpha1 = e[1] / sum;
    a.alpha_eh = e[2] / sum;
    return a;
}

/// Fresh episode start: empty queues and battery, gains drawn for slot 0.
inline SystemState initial_state(const TaskProfile& task, const SystemConfig& cfg, Rng& rng) {
    SystemState s;
    s.h0 = sample_channel(cfg.zeta0, rng);
    s.h1 = sample_channel(cfg.zeta1, rng);
    s.h_eh = sample_channel(task.zeta_eh, rng);
    return s;
}

/// Advances one slot. Draw order from `rng` is fixed: arrivals at TX0, TX1,
/// then (when `redraw_channels`) gains h0, h1, h_eh.
inline StepOutcome step(const SystemState& state, const ControlAction& action, const TaskProfile& task,
                        const SystemConfig& cfg, Rng& rng, bool redraw_channels = true) {
    if (!state.valid()) {
        throw std::domain_error("step: state has negative or non-finite fields");
    }
    if (!action.feasible(cfg)) {
        throw std::domain_error("step: action violates the scheduling or power constraints");
    }

    StepOutcome out;
    out.d0 = transmitted_data(action.p0, state.h0, action.alpha0, cfg);
    out.d1 = transmitted_data(cfg.P1_fixed, state.h1, action.alpha1, cfg);
    const double p_eh = harvested_power(action.p0, state.h_eh, task, cfg);
    out.harvested_energy = p_eh * action.alpha_eh * cfg.slot_duration;
    out.reward = reward(state, action, out.d0, out.d1, cfg);
    out.battery_over_capacity = state.b > cfg.battery_cap_B;
    out.queue0_underserved = state.q0 > out.d0;
    out.queue1_underserved = state.q1 > out.d1;

    const double a0 = sample_arrivals(cfg.arrival_rate, cfg.slot_duration, rng);
    const double a1 = sample_arrivals(cfg.arrival_rate, cfg.slot_duration, rng);

    SystemState& next = out.next_state;
    next.q0 = queue_update(state.q0, out.d0, a0);
    next.q1 = queue_update(state.q1, out.d1, a1);
    next.b = battery_update(state.b, cfg.P1_fixed, action.alpha1, p_eh, action.alpha_eh, cfg.slot_duration);
    if (cfg.battery_hard_clip) {
        next.b = std::min(next.b, cfg.battery_cap_B);
    }
    if (redraw_channels) {
        next.h0 = sample_channel(cfg.zeta0, rng);
        next.h1 = sample_channel(cfg.zeta1, rng);
        next.h_eh = sample_channel(task.zeta_eh, rng);
    } else {
        next.h0 = state.h0;
        next.h1 = state.h1;
        next.h_eh = state.h_eh;
    }
    return out;
}

/// Slots first, first + 1, ..., first + length - 1.
struct SlotInterval {
    std::size_t first = 0;
    std::size_t length = 0;

    std::size_t last() const { return first + length - 1; }
    bool contains(std::size_t t) const { return t >= first && t < first + length; }
};

inline std::vector<SlotInterval> make_task_schedule(std::size_t slots_per_task, std::size_t num_tasks) {
    if (slots_per_task < 1 || num_tasks < 1) {
        throw std::invalid_argument("make_task_schedule: need T >= 1 and at least one task");
    }
    std::vector<SlotInterval> schedule;
    schedule.reserve(num_tasks);
    for (std::size_t j = 0; j < num_tasks; ++j) {
        schedule.push_back({j * slots_per_task, slots_per_task});
    }
    return schedule;
}

} // namespace ehl
