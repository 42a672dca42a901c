#pragma once

// Linear-Gaussian policy over the 4-dimensional raw action and the plain
// REINFORCE learner that produces per-task optima and their curvature.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ehl/env.hpp"
#include "ehl/rng.hpp"

namespace ehl {

inline constexpr int kActionDims = 4;

/// Normalized state features plus a constant bias, in the order
/// (q0, q1, b, h0, h1, h_eh, 1).
struct FeatureMap {
    static constexpr int kFeatures = 7;

    double queue_scale = 1.0;
    double battery_scale = 1.0;
    double h0_scale = 1.0;
    double h1_scale = 1.0;
    double h_eh_scale = 1.0;

    /// Queues by ten slots of mean arrivals, battery by capacity, gains by
    /// their Rayleigh means. The EH gain uses a task-independent reference
    /// scale so the feature still reveals how strong the power link is.
    static FeatureMap from_config(const SystemConfig& cfg, double eh_reference_scale = 1.0) {
        const double rayleigh_mean = std::sqrt(std::numbers::pi / 2.0);
        FeatureMap f;
        f.queue_scale = std::max(cfg.arrival_rate * cfg.slot_duration * 10.0, 1.0);
        f.battery_scale = cfg.battery_cap_B;
        f.h0_scale = cfg.zeta0 * rayleigh_mean;
        f.h1_scale = cfg.zeta1 * rayleigh_mean;
        f.h_eh_scale = eh_reference_scale * rayleigh_mean;
        return f;
    }

    Eigen::VectorXd operator()(const SystemState& s) const {
        Eigen::VectorXd f(kFeatures);
        f << s.q0 / queue_scale, s.q1 / queue_scale, s.b / battery_scale, s.h0 / h0_scale, s.h1 / h1_scale,
            s.h_eh / h_eh_scale, 1.0;
        return f;
    }
};

/// theta is vec(Theta) for the 4 x n_features mean map, column-major.
struct PolicyParams {
    Eigen::VectorXd theta;
    Eigen::Vector4d log_std = Eigen::Vector4d::Constant(std::log(0.5));

    static PolicyParams zeros(int n_features = FeatureMap::kFeatures) {
        PolicyParams p;
        p.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_features) * kActionDims);
        return p;
    }

    Eigen::Index n_features() const { return theta.size() / kActionDims; }
    Eigen::Index dim() const { return theta.size(); }
};

namespace detail {

inline Eigen::Map<const Eigen::Matrix<double, kActionDims, Eigen::Dynamic>>
mean_map(const Eigen::VectorXd& theta, Eigen::Index n_features) {
    if (theta.size() != n_features * kActionDims) {
        throw std::invalid_argument("policy: theta length must be 4 * n_features");
    }
    return {theta.data(), kActionDims, n_features};
}

} // namespace detail

inline RawAction policy_mean(const Eigen::VectorXd& theta, const Eigen::VectorXd& features) {
    return detail::mean_map(theta, features.size()) * features;
}

inline RawAction sample_action(const Eigen::VectorXd& theta, const Eigen::VectorXd& features,
                               const Eigen::Vector4d& log_std, Rng& rng) {
    std::normal_distribution<double> normal;
    RawAction raw = policy_mean(theta, features);
    for (int i = 0; i < kActionDims; ++i) {
        raw[i] += std::exp(log_std[i]) * normal(rng);
    }
    return raw;
}

inline double log_density(const Eigen::VectorXd& theta, const Eigen::VectorXd& features,
                          const RawAction& raw, const Eigen::Vector4d& log_std) {
    const RawAction z = ((raw - policy_mean(theta, features)).array() / log_std.array().exp()).matrix();
    const double log2pi = std::log(2.0 * std::numbers::pi);
    return -0.5 * z.squaredNorm() - log_std.sum() - 0.5 * kActionDims * log2pi;
}

/// Score of the Gaussian policy with respect to theta, laid out like theta.
inline Eigen::VectorXd log_prob_grad(const Eigen::VectorXd& theta, const Eigen::VectorXd& features,
                                     const RawAction& raw, const Eigen::Vector4d& log_std) {
    const Eigen::Vector4d weighted =
        ((raw - policy_mean(theta, features)).array() * (-2.0 * log_std.array()).exp()).matrix();
    Eigen::VectorXd g(theta.size());
    Eigen::Map<Eigen::Matrix<double, kActionDims, Eigen::Dynamic>>(g.data(), kActionDims, features.size()) =
        weighted * features.transpose();
    return g;
}

struct Transition {
    SystemState state;
    RawAction raw_action;
    double reward = 0.0;
};

struct Trajectory {
    std::vector<Transition> steps;
    std::uint64_t seed = 0;
};

/// Simulates `horizon` slots from an empty system, sampling raw actions from
/// the policy and feeding them through project_action.
inline Trajectory rollout(const PolicyParams& policy, const TaskProfile& task, const SystemConfig& cfg,
                          std::size_t horizon, Rng& rng) {
    if (horizon < 1) {
        throw std::invalid_argument("rollout: horizon must be >= 1");
    }
    const FeatureMap features = FeatureMap::from_config(cfg);
    Trajectory traj;
    traj.steps.reserve(horizon);
    SystemState s = initial_state(task, cfg, rng);
    for (std::size_t t = 0; t < horizon; ++t) {
        const RawAction raw = sample_action(policy.theta, features(s), policy.log_std, rng);
        const ControlAction a = project_action(raw, cfg);
        const bool redraw = (t + 1) % cfg.channel_coherence_slots == 0;
        StepOutcome out = step(s, a, task, cfg, rng, redraw);
        traj.steps.push_back({s, raw, out.reward});
        s = out.next_state;
    }
    return traj;
}

/// Average reward over the trajectory. With discount < 1 the average is
/// weighted by discount^t and normalized by the weight sum.
inline double trajectory_return(const Trajectory& traj, double discount = 1.0) {
    if (traj.steps.empty()) {
        throw std::invalid_argument("trajectory_return: empty trajectory");
    }
    if (discount == 1.0) {
        double sum = 0.0;
        for (const auto& tr : traj.steps) sum += tr.reward;
        return sum / static_cast<double>(traj.steps.size());
    }
    double sum = 0.0, weight = 0.0, w = 1.0;
    for (const auto& tr : traj.steps) {
        sum += w * tr.reward;
        weight += w;
        w *= discount;
    }
    return sum / weight;
}

inline Eigen::VectorXd score_sum(const PolicyParams& policy, const Trajectory& traj, const FeatureMap& features) {
    Eigen::VectorXd total = Eigen::VectorXd::Zero(policy.dim());
    for (const auto& tr : traj.steps) {
        total += log_prob_grad(policy.theta, features(tr.state), tr.raw_action, policy.log_std);
    }
    return total;
}

/// One trajectory's contribution to a REINFORCE estimate.
struct ScoredReturn {
    double ret = 0.0;
    Eigen::VectorXd score;
};

struct GradientEstimate {
    Eigen::VectorXd grad;
    std::size_t n_trajectories = 0;
    double baseline_value = 0.0;
    double mean_return = 0.0;
};

/// (1/n) sum_i (ret_i - baseline) * score_i, with the mean return as the
/// baseline when `use_baseline` is set and zero otherwise.
inline GradientEstimate reinforce(const std::vector<ScoredReturn>& samples, bool use_baseline = true) {
    if (samples.empty()) {
        throw std::invalid_argument("reinforce: need at least one trajectory");
    }
    const auto n = static_cast<double>(samples.size());
    GradientEstimate est;
    est.n_trajectories = samples.size();
    for (const auto& s : samples) est.mean_return += s.ret;
    est.mean_return /= n;
    est.baseline_value = use_baseline ? est.mean_return : 0.0;
    est.grad = Eigen::VectorXd::Zero(samples.front().score.size());
    for (const auto& s : samples) {
        est.grad += (s.ret - est.baseline_value) * s.score;
    }
    est.grad /= n;
    return est;
}

struct RlHyperparams {
    double learning_rate = 1e-2;
    std::size_t n_traj = 8;
    std::size_t horizon = 500;   // slots per trajectory (the task period T)
    double divergence_bound = 1e3;
    double log_std = std::log(0.5);
    double gamma = 0.99;         // reported; only used when `discounted` is set
    bool discounted = false;
    bool use_baseline = true;
    double curvature_eps = 0.05;
    double curvature_floor = 1e-6;

    double discount() const { return discounted ? gamma : 1.0; }

    PolicyParams policy(const Eigen::VectorXd& theta) const {
        PolicyParams p;
        p.theta = theta;
        p.log_std = Eigen::Vector4d::Constant(log_std);
        return p;
    }
};

/// REINFORCE gradient of the expected trajectory return. Each trajectory
/// runs on its own engine seeded from one draw of `rng`.
inline GradientEstimate estimate_policy_gradient(const PolicyParams& policy, const TaskProfile& task,
                                                 const SystemConfig& cfg, const RlHyperparams& hp, Rng& rng) {
    if (hp.n_traj < 1) {
        throw std::invalid_argument("estimate_policy_gradient: n_traj must be >= 1");
    }
    const FeatureMap features = FeatureMap::from_config(cfg);
    std::vector<ScoredReturn> samples;
    samples.reserve(hp.n_traj);
    for (std::size_t i = 0; i < hp.n_traj; ++i) {
        const std::uint64_t seed = rng();
        Rng traj_rng(seed);
        Trajectory traj = rollout(policy, task, cfg, hp.horizon, traj_rng);
        traj.seed = seed;
        samples.push_back({trajectory_return(traj, hp.discount()), score_sum(policy, traj, features)});
    }
    return reinforce(samples, hp.use_baseline);
}

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainResult {
    PolicyParams beta;
    std::vector<double> return_curve; // mean return of the policy before each update
};

/// Gradient ascent theta <- theta + lr * grad for `iterations` updates.
/// `grad_fn(policy, rng)` returns a GradientEstimate.
template <class GradFn>
TrainResult gradient_ascent(PolicyParams policy, GradFn&& grad_fn, std::size_t iterations, double learning_rate,
                            double divergence_bound, Rng& rng) {
    if (iterations < 1) {
        throw std::invalid_argument("train: iterations must be >= 1");
    }
    TrainResult result;
    result.return_curve.reserve(iterations);
    for (std::size_t it = 0; it < iterations; ++it) {
        const GradientEstimate est = grad_fn(static_cast<const PolicyParams&>(policy), rng);
        result.return_curve.push_back(est.mean_return);
        policy.theta += learning_rate * est.grad;
        if (!policy.theta.allFinite() || policy.theta.lpNorm<Eigen::Infinity>() > divergence_bound) {
            throw DivergenceError("train: policy parameters left the divergence bound");
        }
    }
    result.beta = std::move(policy);
    return result;
}

inline TrainResult train_task(const Eigen::VectorXd& theta_init, const TaskProfile& task, const SystemConfig& cfg,
                              std::size_t iterations, const RlHyperparams& hp, Rng& rng) {
    return gradient_ascent(
        hp.policy(theta_init),
        [&](const PolicyParams& p, Rng& r) { return estimate_policy_gradient(p, task, cfg, hp, r); }, iterations,
        hp.learning_rate, hp.divergence_bound, rng);
}

struct CurvatureEstimate {
    Eigen::MatrixXd Q;
    bool psd_projected = false;
};

/// Symmetrizes and clamps eigenvalues at `floor`.
inline CurvatureEstimate project_psd(const Eigen::MatrixXd& M, double floor) {
    CurvatureEstimate out;
    const Eigen::MatrixXd sym = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    Eigen::VectorXd values = eig.eigenvalues();
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values[i] < floor) {
            values[i] = floor;
            out.psd_projected = true;
        }
    }
    const Eigen::MatrixXd rebuilt = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    out.Q = 0.5 * (rebuilt + rebuilt.transpose());
    return out;
}

/// Negative Hessian of the expected return at `beta` by central differences
/// of `grad_fn(policy, rng)`. Every evaluation replays the same engine state
/// so the differences see common random numbers.
template <class GradFn>
CurvatureEstimate estimate_curvature(const PolicyParams& beta, GradFn&& grad_fn, Rng& rng, double eps,
                                     double floor = 1e-6) {
    if (!(eps > 0.0)) {
        throw std::invalid_argument("estimate_curvature: epsilon must be positive");
    }
    const Rng common(rng());
    const Eigen::Index d = beta.dim();
    Eigen::MatrixXd hessian(d, d);
    PolicyParams probe = beta;
    for (Eigen::Index k = 0; k < d; ++k) {
        probe.theta[k] = beta.theta[k] + eps;
        Rng r_plus = common;
        const Eigen::VectorXd g_plus = grad_fn(static_cast<const PolicyParams&>(probe), r_plus).grad;
        probe.theta[k] = beta.theta[k] - eps;
        Rng r_minus = common;
        const Eigen::VectorXd g_minus = grad_fn(static_cast<const PolicyParams&>(probe), r_minus).grad;
        probe.theta[k] = beta.theta[k];
        hessian.col(k) = (g_plus - g_minus) / (2.0 * eps);
    }
    return project_psd(-hessian, floor);
}

inline CurvatureEstimate estimate_curvature(const PolicyParams& beta, const TaskProfile& task,
                                            const SystemConfig& cfg, const RlHyperparams& hp, Rng& rng) {
    return estimate_curvature(
        beta, [&](const PolicyParams& p, Rng& r) { return estimate_policy_gradient(p, task, cfg, hp, r); }, rng,
        hp.curvature_eps, hp.curvature_floor);
}

} // namespace ehl
