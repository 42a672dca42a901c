#pragma once

// Shared-basis lifelong learner. Each task's optimum beta is coded sparsely
// over a knowledge base G (theta = G v); exponentially averaged moments of
// (v v^T, beta v^T) refit G after every task.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ehl/env.hpp"
#include "ehl/rl.hpp"
#include "ehl/rng.hpp"

namespace ehl {

struct LifelongHyperparams {
    double mu1 = 0.01;          // L1 weight on encodings
    double mu2 = 0.01;          // ridge on the refit; 0 selects the plain pseudoinverse
    double eta = 0.2;           // EMA rate of the moment statistics
    int latent_dim = 4;         // Z
    double lasso_tol = 1e-8;
    std::size_t lasso_max_iter = 10000;
    double pinv_rcond = 1e-10;
    double basis_init_range = 0.1;   // G entries start uniform in [-r, r]
    std::size_t train_iterations = 200;
    std::size_t probe_budget = 2;    // policy updates before test-time encoding
    bool normalize_curvature = true; // rescale Q to unit mean eigenvalue before encoding

    void validate() const {
        if (!(mu1 >= 0.0) || !(mu2 >= 0.0)) throw std::invalid_argument("lifelong: mu1, mu2 must be >= 0");
        if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("lifelong: eta must lie in (0, 1)");
        if (latent_dim < 1) throw std::invalid_argument("lifelong: latent dimension must be >= 1");
        if (!(lasso_tol > 0.0) || lasso_max_iter < 1) throw std::invalid_argument("lifelong: bad lasso limits");
        if (train_iterations < 1 || probe_budget < 1) {
            throw std::invalid_argument("lifelong: iteration budgets must be >= 1");
        }
    }
};

struct KnowledgeBase {
    Eigen::MatrixXd basis;         // G, d x Z
    Eigen::MatrixXd code_moment;   // X, Z x Z, EMA of v v^T
    Eigen::MatrixXd cross_moment;  // Y, d x Z, EMA of beta v^T
    Eigen::VectorXd encoding_mean; // arithmetic mean of all training encodings
    double eta = 0.2;
    std::size_t tasks_seen = 0;

    static KnowledgeBase init(Eigen::Index dim, Eigen::Index latent_dim, double eta, double init_range, Rng& rng) {
        KnowledgeBase kb;
        kb.basis.resize(dim, latent_dim);
        for (Eigen::Index j = 0; j < latent_dim; ++j) {
            for (Eigen::Index i = 0; i < dim; ++i) {
                kb.basis(i, j) = init_range * (2.0 * uniform01(rng) - 1.0);
            }
        }
        kb.code_moment = Eigen::MatrixXd::Zero(latent_dim, latent_dim);
        kb.cross_moment = Eigen::MatrixXd::Zero(dim, latent_dim);
        kb.encoding_mean = Eigen::VectorXd::Zero(latent_dim);
        kb.eta = eta;
        return kb;
    }

    Eigen::Index dim() const { return basis.rows(); }
    Eigen::Index latent_dim() const { return basis.cols(); }

    friend bool operator==(const KnowledgeBase& a, const KnowledgeBase& b) {
        auto same = [](const auto& x, const auto& y) {
            return x.rows() == y.rows() && x.cols() == y.cols() && (x.array() == y.array()).all();
        };
        return a.eta == b.eta && a.tasks_seen == b.tasks_seen && same(a.basis, b.basis) &&
               same(a.code_moment, b.code_moment) && same(a.cross_moment, b.cross_moment) &&
               same(a.encoding_mean, b.encoding_mean);
    }
};

// ---------------------------------------------------------------------------
// Sparse coding

struct TaskEncoding {
    Eigen::VectorXd v;
    double objective_value = 0.0;
    std::vector<Eigen::Index> active_set;
    std::size_t sweeps = 0;
};

struct LassoNonConvergence : std::runtime_error {
    TaskEncoding best;
    double kkt_violation;

    LassoNonConvergence(TaskEncoding best_iterate, double violation)
        : std::runtime_error("encode_task: coordinate descent hit the sweep limit"),
          best(std::move(best_iterate)),
          kkt_violation(violation) {}
};

/// min_v (beta - G v)^T Q (beta - G v) + mu1 |v|_1, expanded as
/// v^T H v - 2 c^T v + const with H = G^T Q G, c = G^T Q beta.
class QuadraticLasso {
public:
    static constexpr double kCurvatureFloor = 1e-12;

    QuadraticLasso(const Eigen::VectorXd& beta, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& G, double mu1)
        : beta_(beta), Q_(Q), G_(G), mu1_(mu1) {
        if (Q.rows() != Q.cols() || Q.rows() != beta.size() || G.rows() != beta.size()) {
            throw std::invalid_argument("encode_task: dimension mismatch among beta, Q, G");
        }
        if (!(mu1 >= 0.0)) {
            throw std::invalid_argument("encode_task: mu1 must be >= 0");
        }
        const Eigen::MatrixXd QG = Q * G;
        H_ = G.transpose() * QG;
        H_ = 0.5 * (H_ + H_.transpose());
        c_ = QG.transpose() * beta;
    }

    Eigen::Index size() const { return G_.cols(); }

    double objective(const Eigen::VectorXd& v) const {
        const Eigen::VectorXd r = beta_ - G_ * v;
        return r.dot(Q_ * r) + mu1_ * v.lpNorm<1>();
    }

    /// One cyclic pass of exact coordinate minimization.
    void sweep(Eigen::VectorXd& v) const {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double hii = H_(i, i);
            const double partial = c_[i] - H_.row(i).dot(v) + hii * v[i];
            const double shrunk = soft_threshold(partial, 0.5 * mu1_);
            v[i] = shrunk == 0.0 ? 0.0 : shrunk / std::max(hii, kCurvatureFloor);
        }
    }

    /// Largest violation of the subgradient optimality conditions.
    double kkt_violation(const Eigen::VectorXd& v) const {
        const Eigen::VectorXd grad = 2.0 * (H_ * v - c_);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double viol = v[i] != 0.0 ? std::abs(grad[i] + mu1_ * (v[i] > 0.0 ? 1.0 : -1.0))
                                            : std::max(std::abs(grad[i]) - mu1_, 0.0);
            worst = std::max(worst, viol);
        }
        return worst;
    }

    /// Smallest mu1 at which v = 0 is optimal.
    double shutdown_threshold() const { return 2.0 * c_.lpNorm<Eigen::Infinity>(); }

private:
    static double soft_threshold(double x, double t) {
        if (x > t) return x - t;
        if (x < -t) return x + t;
        return 0.0;
    }

    Eigen::VectorXd beta_;
    Eigen::MatrixXd Q_;
    Eigen::MatrixXd G_;
    double mu1_;
    Eigen::MatrixXd H_;
    Eigen::VectorXd c_;
};

inline double min_eigenvalue(const Eigen::MatrixXd& sym) {
    if (sym.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (sym + sym.transpose()), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

/// Q / (trace(Q) / d). The L1 weight then acts on a fit whose scale does
/// not depend on the reward's units. A zero matrix is returned unchanged.
inline Eigen::MatrixXd normalize_curvature(const Eigen::MatrixXd& Q) {
    const double mean_eig = Q.size() == 0 ? 0.0 : Q.trace() / static_cast<double>(Q.rows());
    return mean_eig > 0.0 ? Eigen::MatrixXd(Q / mean_eig) : Q;
}

inline TaskEncoding encode_task(const Eigen::VectorXd& beta, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& G,
                                double mu1, double tol, std::size_t max_iter) {
    const QuadraticLasso problem(beta, Q, G, mu1);
    if (min_eigenvalue(Q) < -1e-8) {
        throw std::domain_error("encode_task: curvature matrix is not positive semidefinite");
    }
    auto finish = [&](Eigen::VectorXd v, std::size_t sweeps) {
        TaskEncoding enc;
        enc.objective_value = problem.objective(v);
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (v[i] != 0.0) enc.active_set.push_back(i);
        }
        enc.v = std::move(v);
        enc.sweeps = sweeps;
        return enc;
    };

    Eigen::VectorXd v = Eigen::VectorXd::Zero(G.cols());
    double violation = problem.kkt_violation(v);
    std::size_t sweeps = 0;
    while (violation > tol) {
        if (sweeps == max_iter) {
            throw LassoNonConvergence(finish(std::move(v), sweeps), violation);
        }
        problem.sweep(v);
        ++sweeps;
        violation = problem.kkt_violation(v);
    }
    return finish(std::move(v), sweeps);
}

// ---------------------------------------------------------------------------
// Moment statistics and the basis refit

struct TaskStatistics {
    Eigen::MatrixXd code;  // v v^T
    Eigen::MatrixXd cross; // beta v^T
};

inline TaskStatistics task_statistics(const Eigen::VectorXd& v, const Eigen::VectorXd& beta) {
    return {v * v.transpose(), beta * v.transpose()};
}

inline void update_statistics(KnowledgeBase& kb, const TaskStatistics& stats) {
    if (!(kb.eta > 0.0 && kb.eta < 1.0)) {
        throw std::invalid_argument("update_statistics: eta must lie in (0, 1)");
    }
    kb.code_moment = (1.0 - kb.eta) * kb.code_moment + kb.eta * stats.code;
    kb.cross_moment = (1.0 - kb.eta) * kb.cross_moment + kb.eta * stats.cross;
    ++kb.tasks_seen;
}

/// Folds one more encoding into the running mean; call after update_statistics.
inline void record_encoding(KnowledgeBase& kb, const Eigen::VectorXd& v) {
    const double n = static_cast<double>(std::max<std::size_t>(kb.tasks_seen, 1));
    kb.encoding_mean += (v - kb.encoding_mean) / n;
}

/// SVD pseudoinverse; singular values at or below rcond * sigma_max are
/// treated as zero.
inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& M, double rcond = 1e-10) {
    if (!M.allFinite()) {
        throw std::domain_error("pinv: matrix has non-finite entries");
    }
    if (M.size() == 0) {
        return Eigen::MatrixXd(M.cols(), M.rows());
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    const double cutoff = rcond * sigma.maxCoeff();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sigma.size());
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (sigma[i] > cutoff) inv[i] = 1.0 / sigma[i];
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// G <- Y X^+ when mu2 == 0, otherwise the ridge solution Y (X + mu2 I)^-1.
inline void refit_kb(KnowledgeBase& kb, double mu2 = 0.0, double rcond = 1e-10) {
    if (kb.tasks_seen < 1) {
        throw std::logic_error("refit_kb: no task statistics absorbed yet");
    }
    if (mu2 == 0.0) {
        kb.basis = kb.cross_moment * pinv(kb.code_moment, rcond);
        return;
    }
    const Eigen::Index z = kb.code_moment.rows();
    const Eigen::MatrixXd regularized = kb.code_moment + mu2 * Eigen::MatrixXd::Identity(z, z);
    kb.basis = regularized.ldlt().solve(kb.cross_moment.transpose()).transpose();
}

// ---------------------------------------------------------------------------
// Test-time adaptation

struct WarmStart {
    Eigen::VectorXd theta;            // G v, always in range(G)
    TaskEncoding encoding;
    std::vector<double> probe_curve;  // returns seen during the probe updates
};

struct ProbeResult {
    Eigen::VectorXd beta;
    Eigen::MatrixXd Q;
    std::vector<double> curve;
};

/// Encodes the probe's rough optimum over the frozen basis. `probe(theta0)`
/// starts at G * encoding_mean and returns a ProbeResult.
template <class Probe>
WarmStart warm_start(const KnowledgeBase& kb, const LifelongHyperparams& hp, Probe&& probe) {
    if (kb.tasks_seen == 0) {
        throw std::logic_error("warm_start: knowledge base has not been trained");
    }
    const Eigen::VectorXd start = kb.basis * kb.encoding_mean;
    ProbeResult rough = probe(start);
    if (hp.normalize_curvature) {
        rough.Q = normalize_curvature(rough.Q);
    }
    WarmStart ws;
    ws.encoding = encode_task(rough.beta, rough.Q, kb.basis, hp.mu1, hp.lasso_tol, hp.lasso_max_iter);
    ws.theta = kb.basis * ws.encoding.v;
    ws.probe_curve = std::move(rough.curve);
    return ws;
}

inline WarmStart warm_start(const KnowledgeBase& kb, const LifelongHyperparams& hp, const TaskProfile& task,
                            const SystemConfig& cfg, const RlHyperparams& rl_hp, Rng& rng) {
    return warm_start(kb, hp, [&](const Eigen::VectorXd& theta0) {
        TrainResult probe = train_task(theta0, task, cfg, hp.probe_budget, rl_hp, rng);
        CurvatureEstimate curv = estimate_curvature(probe.beta, task, cfg, rl_hp, rng);
        return ProbeResult{std::move(probe.beta.theta), std::move(curv.Q), std::move(probe.return_curve)};
    });
}

// ---------------------------------------------------------------------------
// Full training recursion

struct TaskFailure {
    int task_id = 0;
    std::string message;
};

struct LifelongRun {
    KnowledgeBase kb;
    std::vector<int> task_ids;                      // tasks that completed, in stream order
    std::vector<TaskEncoding> encodings;            // aligned with task_ids
    std::vector<Eigen::VectorXd> betas;             // aligned with task_ids
    std::vector<std::vector<double>> return_curves; // aligned with task_ids
    std::vector<TaskFailure> failures;
};

/// Per task: train from a cold start, estimate curvature at the result,
/// encode over the current basis, absorb the moments, refit the basis.
/// Engines: "g-init" seeds the basis, "train/task<id>" each task's learner.
inline LifelongRun run_mt_l2rl(const std::vector<TaskProfile>& tasks, const SystemConfig& cfg,
                               const LifelongHyperparams& hp, const RlHyperparams& rl_hp, std::uint64_t master_seed,
                               std::ostream* log = nullptr) {
    if (tasks.empty()) {
        throw std::invalid_argument("run_mt_l2rl: empty task stream");
    }
    hp.validate();
    const Eigen::Index dim = static_cast<Eigen::Index>(FeatureMap::kFeatures) * kActionDims;

    LifelongRun run;
    Rng init_rng = substream(master_seed, "g-init");
    run.kb = KnowledgeBase::init(dim, hp.latent_dim, hp.eta, hp.basis_init_range, init_rng);

    for (const TaskProfile& task : tasks) {
        try {
            task.validate();
            Rng rng = substream(master_seed, "train/task" + std::to_string(task.task_id));
            TrainResult trained =
                train_task(Eigen::VectorXd::Zero(dim), task, cfg, hp.train_iterations, rl_hp, rng);
            CurvatureEstimate curv = estimate_curvature(trained.beta, task, cfg, rl_hp, rng);
            if (hp.normalize_curvature) {
                curv.Q = normalize_curvature(curv.Q);
            }
            TaskEncoding enc =
                encode_task(trained.beta.theta, curv.Q, run.kb.basis, hp.mu1, hp.lasso_tol, hp.lasso_max_iter);

            update_statistics(run.kb, task_statistics(enc.v, trained.beta.theta));
            record_encoding(run.kb, enc.v);
            refit_kb(run.kb, hp.mu2, hp.pinv_rcond);

            if (log) {
                *log << "task " << task.task_id << ": final return " << trained.return_curve.back()
                     << ", active atoms " << enc.active_set.size() << "\n";
            }
            run.task_ids.push_back(task.task_id);
            run.encodings.push_back(std::move(enc));
            run.betas.push_back(std::move(trained.beta.theta));
            run.return_curves.push_back(std::move(trained.return_curve));
        } catch (const std::exception& e) {
            if (log) *log << "task " << task.task_id << " skipped: " << e.what() << "\n";
            run.failures.push_back({task.task_id, e.what()});
        }
    }
    return run;
}

} // namespace ehl
