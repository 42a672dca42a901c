#pragma once

// Training / testing protocol and its on-disk outputs.
//
// Output directory layout:
//   kb.bin               knowledge-base snapshot after training
//   training_tasks.csv   task_id,zeta_eh,lambda_eff,active_atoms,status
//   training_curves.csv  task_id,iteration,return
//   curves.csv           method,task_id,seed,iteration,return
//   runs.csv             one row per (test task, seed, method)
//   mean_curves.csv      method,task_id,iteration,mean_return,std_return,n
//   summary.json         per-task convergence / final-return statistics
//   timing.json          wall-clock only; the one file that varies run to run
//
// Engines: "task-gen" draws the training stream; each test run uses
// "test/task<id>/seed<s>/{probe,learner,lyapunov}". The learner engine is
// shared by the MT-L2RL adaptation and the cold-start baseline.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehl/baselines.hpp"
#include "ehl/harness/config.hpp"
#include "ehl/harness/kb_io.hpp"
#include "ehl/harness/metrics.hpp"
#include "ehl/harness/tasks.hpp"
#include "ehl/lifelong.hpp"

namespace ehl::harness {

namespace fs = std::filesystem;

inline const std::vector<std::string>& method_order() {
    static const std::vector<std::string> order = {method::mt_l2rl, method::vanilla_rl, method::lyapunov};
    return order;
}

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Keeps free text inside one CSV field.
inline std::string csv_safe(std::string s) {
    for (char& ch : s) {
        if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ';';
    }
    return s;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

/// Sample standard deviation; 0 for fewer than two values.
inline double std_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

inline std::string run_prefix(int task_id, std::uint64_t seed) {
    return "test/task" + std::to_string(task_id) + "/seed" + std::to_string(seed);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Training

struct TrainingResult {
    std::vector<TaskProfile> tasks;
    LifelongRun run;
};

inline std::vector<TaskProfile> training_stream(const ExperimentConfig& cfg) {
    Rng rng = substream(cfg.master_seed, "task-gen");
    return generate_training_tasks(cfg.n_train_tasks, rng);
}

inline TrainingResult run_training(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
    TrainingResult r;
    r.tasks = training_stream(cfg);
    r.run = run_mt_l2rl(r.tasks, cfg.system, cfg.lifelong, cfg.rl, cfg.master_seed, log);
    if (r.run.task_ids.empty()) {
        throw std::runtime_error("training: every task in the stream failed");
    }
    return r;
}

inline KbLineage lineage_of(const ExperimentConfig& cfg, const TrainingResult& r) {
    return {cfg.master_seed, r.run.task_ids};
}

inline void write_training_outputs(const fs::path& dir, const ExperimentConfig& cfg, const TrainingResult& r) {
    save_kb(r.run.kb, dir / "kb.bin", lineage_of(cfg, r));

    std::string tasks = "task_id,zeta_eh,lambda_eff,active_atoms,status\n";
    for (const TaskProfile& t : r.tasks) {
        tasks += std::to_string(t.task_id) + "," + detail::fmt(t.zeta_eh) + "," + detail::fmt(t.lambda_eff) + ",";
        const auto it = std::find(r.run.task_ids.begin(), r.run.task_ids.end(), t.task_id);
        if (it != r.run.task_ids.end()) {
            tasks += std::to_string(r.run.encodings[it - r.run.task_ids.begin()].active_set.size()) + ",ok\n";
        } else {
            std::string why;
            for (const TaskFailure& f : r.run.failures) {
                if (f.task_id == t.task_id) why = f.message;
            }
            tasks += ",failed: " + detail::csv_safe(why) + "\n";
        }
    }
    write_atomic(dir / "training_tasks.csv", tasks);

    std::string curves = "task_id,iteration,return\n";
    for (std::size_t k = 0; k < r.run.task_ids.size(); ++k) {
        const std::vector<double>& c = r.run.return_curves[k];
        for (std::size_t i = 0; i < c.size(); ++i) {
            curves += std::to_string(r.run.task_ids[k]) + "," + std::to_string(i) + "," + detail::fmt(c[i]) + "\n";
        }
    }
    write_atomic(dir / "training_curves.csv", curves);
}

// ---------------------------------------------------------------------------
// Testing

struct TestJob {
    TaskProfile task;
    std::uint64_t seed = 0;
    std::string method;
};

/// Jobs in canonical order: test task, then seed, then method.
inline std::vector<TestJob> test_jobs(const ExperimentConfig& cfg) {
    std::vector<TestJob> jobs;
    for (const TaskProfile& t : cfg.test_profiles) {
        for (std::uint64_t s : cfg.seeds) {
            for (const std::string& m : method_order()) jobs.push_back({t, s, m});
        }
    }
    return jobs;
}

inline void finalize_record(RunRecord& rec, const ExperimentConfig& cfg) {
    for (double v : rec.curve) {
        if (!std::isfinite(v)) {
            rec.error = "non-finite return in curve";
            break;
        }
    }
    if (rec.ok() && !rec.curve.empty()) {
        rec.convergence_iteration = convergence_iteration(rec.curve, cfg.convergence_fraction, cfg.window);
        rec.final_return = final_value(rec.curve, cfg.window);
    } else if (rec.ok()) {
        rec.error = "empty curve";
    }
}

/// One test run. The knowledge base is only read.
inline RunRecord run_test_job(const TestJob& job, const KnowledgeBase& kb, const ExperimentConfig& cfg) {
    RunRecord rec;
    rec.method = job.method;
    rec.task_id = job.task.task_id;
    rec.seed = job.seed;
    const auto start = std::chrono::steady_clock::now();
    const std::string prefix = detail::run_prefix(job.task.task_id, job.seed);
    try {
        if (job.method == method::mt_l2rl) {
            Rng probe_rng = substream(cfg.master_seed, prefix + "/probe");
            WarmStart ws = warm_start(kb, cfg.lifelong, job.task, cfg.system, cfg.rl, probe_rng);
            Rng learner = substream(cfg.master_seed, prefix + "/learner");
            TrainResult adapted = train_task(ws.theta, job.task, cfg.system,
                                             cfg.test_iterations - ws.probe_curve.size(), cfg.rl, learner);
            rec.curve = std::move(ws.probe_curve);
            rec.curve.insert(rec.curve.end(), adapted.return_curve.begin(), adapted.return_curve.end());
        } else if (job.method == method::vanilla_rl) {
            Rng learner = substream(cfg.master_seed, prefix + "/learner");
            rec.curve = vanilla_rl(job.task, cfg.system, cfg.test_iterations, cfg.rl, learner);
        } else if (job.method == method::lyapunov) {
            Rng rng = substream(cfg.master_seed, prefix + "/lyapunov");
            rec.curve = lyapunov_curve(job.task, cfg.system, cfg.lyapunov, cfg.rl.horizon, cfg.test_iterations, rng);
        } else {
            throw std::invalid_argument("unknown method " + job.method);
        }
    } catch (const std::exception& e) {
        rec.curve.clear();
        rec.error = e.what();
    }
    finalize_record(rec, cfg);
    rec.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

inline std::size_t resolve_threads(std::size_t requested) {
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs every job on a fixed pool; results come back in job order.
inline std::vector<RunRecord> run_test_phase(const KnowledgeBase& kb, const ExperimentConfig& cfg,
                                             std::ostream* log = nullptr) {
    const std::vector<TestJob> jobs = test_jobs(cfg);
    std::vector<RunRecord> records(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            records[i] = run_test_job(jobs[i], kb, cfg);
            if (log) {
                std::lock_guard lock(log_mutex);
                const RunRecord& r = records[i];
                *log << r.method << " task " << r.task_id << " seed " << r.seed << ": ";
                if (r.ok()) *log << "converged at " << r.convergence_iteration << ", final " << r.final_return;
                else *log << "failed: " << r.error;
                *log << " (" << r.wall_clock_s << " s)\n";
            }
        }
    };
    const std::size_t n = std::min(resolve_threads(cfg.threads), std::max<std::size_t>(jobs.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& th : pool) th.join();
    return records;
}

// ---------------------------------------------------------------------------
// Summary

struct SummaryContext {
    nlohmann::ordered_json config;      // describe(cfg)
    std::string kb_hash_before;
    std::string kb_hash_after;
    std::size_t kb_tasks_seen = 0;
};

inline nlohmann::ordered_json make_summary(const std::vector<RunRecord>& records,
                                           const std::vector<TaskProfile>& profiles, const SummaryContext& ctx) {
    nlohmann::ordered_json s;
    s["format"] = "ehl-summary";
    s["version"] = 1;
    s["config"] = ctx.config;
    s["knowledge_base"] = {{"hash_before_test", ctx.kb_hash_before},
                           {"hash_after_test", ctx.kb_hash_after},
                           {"unchanged", ctx.kb_hash_before == ctx.kb_hash_after},
                           {"tasks_seen", ctx.kb_tasks_seen}};

    std::size_t failed = 0;
    for (const RunRecord& r : records) failed += r.ok() ? 0 : 1;
    s["runs"] = {{"total", records.size()}, {"failed", failed}};

    nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
    std::vector<double> speedups_vanilla;
    std::size_t faster = 0, beats_lyapunov = 0;
    for (const TaskProfile& t : profiles) {
        nlohmann::ordered_json tj;
        tj["task_id"] = t.task_id;
        tj["zeta_eh"] = t.zeta_eh;
        tj["lambda_eff"] = t.lambda_eff;
        std::map<std::string, std::pair<double, double>> conv_final; // mean convergence, mean final
        std::map<std::string, bool> present;
        double lyap_per_slot = 0.0;
        nlohmann::ordered_json methods;
        for (const std::string& m : method_order()) {
            std::vector<double> conv, fin, per_slot;
            std::size_t n_failed = 0;
            for (const RunRecord& r : records) {
                if (r.method != m || r.task_id != t.task_id) continue;
                if (!r.ok()) {
                    ++n_failed;
                    continue;
                }
                conv.push_back(static_cast<double>(r.convergence_iteration));
                fin.push_back(r.final_return);
                per_slot.push_back(detail::mean_of(r.curve));
            }
            nlohmann::ordered_json mj;
            mj["n"] = conv.size();
            mj["failed"] = n_failed;
            if (!conv.empty()) {
                mj["mean_convergence_iteration"] = detail::mean_of(conv);
                mj["std_convergence_iteration"] = detail::std_of(conv);
                mj["mean_final_return"] = detail::mean_of(fin);
                mj["std_final_return"] = detail::std_of(fin);
                mj["mean_return_over_curve"] = detail::mean_of(per_slot);
                conv_final[m] = {detail::mean_of(conv), detail::mean_of(fin)};
                present[m] = true;
                if (m == method::lyapunov) lyap_per_slot = detail::mean_of(per_slot);
            } else {
                mj["mean_convergence_iteration"] = nullptr;
                mj["std_convergence_iteration"] = nullptr;
                mj["mean_final_return"] = nullptr;
                mj["std_final_return"] = nullptr;
                mj["mean_return_over_curve"] = nullptr;
            }
            methods[m] = mj;
        }
        tj["methods"] = methods;

        auto ratio = [&](const std::string& base) -> nlohmann::ordered_json {
            if (!present[method::mt_l2rl] || !present[base] || conv_final[method::mt_l2rl].first <= 0.0) {
                return nullptr;
            }
            return conv_final[base].first / conv_final[method::mt_l2rl].first;
        };
        tj["speedup_vs_vanilla_rl"] = ratio(method::vanilla_rl);
        tj["speedup_vs_lyapunov"] = ratio(method::lyapunov);
        const bool mt_faster = present[method::mt_l2rl] && present[method::vanilla_rl] &&
                               conv_final[method::mt_l2rl].first < conv_final[method::vanilla_rl].first;
        const bool mt_ge_lyap = present[method::mt_l2rl] && present[method::lyapunov] &&
                                conv_final[method::mt_l2rl].second >= lyap_per_slot;
        tj["mt_converges_faster_than_vanilla_rl"] = mt_faster;
        tj["mt_final_at_least_lyapunov_per_slot"] = mt_ge_lyap;
        if (!tj["speedup_vs_vanilla_rl"].is_null()) {
            speedups_vanilla.push_back(tj["speedup_vs_vanilla_rl"].get<double>());
        }
        faster += mt_faster ? 1 : 0;
        beats_lyapunov += mt_ge_lyap ? 1 : 0;
        tasks.push_back(tj);
    }
    s["tasks"] = tasks;
    nlohmann::ordered_json agg;
    agg["test_tasks"] = profiles.size();
    agg["tasks_mt_faster_than_vanilla_rl"] = faster;
    agg["tasks_mt_final_at_least_lyapunov"] = beats_lyapunov;
    if (speedups_vanilla.empty()) {
        agg["mean_speedup_vs_vanilla_rl"] = nullptr;
    } else {
        agg["mean_speedup_vs_vanilla_rl"] = detail::mean_of(speedups_vanilla);
    }
    s["aggregate"] = agg;
    return s;
}

// ---------------------------------------------------------------------------
// Files

inline std::string curves_csv(const std::vector<RunRecord>& records) {
    std::string out = "method,task_id,seed,iteration,return\n";
    for (const RunRecord& r : records) {
        const std::string head = r.method + "," + std::to_string(r.task_id) + "," + std::to_string(r.seed) + ",";
        for (std::size_t i = 0; i < r.curve.size(); ++i) {
            out += head + std::to_string(i) + "," + detail::fmt(r.curve[i]) + "\n";
        }
    }
    return out;
}

inline std::string runs_csv(const std::vector<RunRecord>& records, const std::vector<TaskProfile>& profiles) {
    std::map<int, TaskProfile> by_id;
    for (const TaskProfile& t : profiles) by_id[t.task_id] = t;
    std::string out =
        "method,task_id,zeta_eh,lambda_eff,seed,iterations,convergence_iteration,final_return,status,error\n";
    for (const RunRecord& r : records) {
        const TaskProfile& t = by_id.at(r.task_id);
        out += r.method + "," + std::to_string(r.task_id) + "," + detail::fmt(t.zeta_eh) + "," +
               detail::fmt(t.lambda_eff) + "," + std::to_string(r.seed) + "," + std::to_string(r.curve.size()) + ",";
        if (r.ok()) {
            out += std::to_string(r.convergence_iteration) + "," + detail::fmt(r.final_return) + ",ok,\n";
        } else {
            out += ",,failed," + detail::csv_safe(r.error) + "\n";
        }
    }
    return out;
}

/// Seed-averaged curves for plotting.
inline std::string mean_curves_csv(const std::vector<RunRecord>& records, const std::vector<TaskProfile>& profiles) {
    std::string out = "method,task_id,iteration,mean_return,std_return,n\n";
    for (const TaskProfile& t : profiles) {
        for (const std::string& m : method_order()) {
            std::vector<const RunRecord*> group;
            std::size_t len = 0;
            for (const RunRecord& r : records) {
                if (r.ok() && r.method == m && r.task_id == t.task_id) {
                    group.push_back(&r);
                    len = std::max(len, r.curve.size());
                }
            }
            for (std::size_t i = 0; i < len; ++i) {
                std::vector<double> xs;
                for (const RunRecord* r : group) {
                    if (i < r->curve.size()) xs.push_back(r->curve[i]);
                }
                out += m + "," + std::to_string(t.task_id) + "," + std::to_string(i) + "," +
                       detail::fmt(detail::mean_of(xs)) + "," + detail::fmt(detail::std_of(xs)) + "," +
                       std::to_string(xs.size()) + "\n";
            }
        }
    }
    return out;
}

inline std::string timing_json(const std::vector<RunRecord>& records, double train_s, double test_s,
                               std::size_t threads) {
    nlohmann::ordered_json j;
    j["threads"] = threads;
    j["training_s"] = train_s;
    j["testing_s"] = test_s;
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const RunRecord& r : records) {
        runs.push_back({{"method", r.method}, {"task_id", r.task_id}, {"seed", r.seed}, {"wall_clock_s", r.wall_clock_s}});
    }
    j["runs"] = runs;
    return j.dump(2) + "\n";
}

inline void write_test_outputs(const fs::path& dir, const std::vector<RunRecord>& records,
                               const std::vector<TaskProfile>& profiles, const nlohmann::ordered_json& summary) {
    write_atomic(dir / "curves.csv", curves_csv(records));
    write_atomic(dir / "runs.csv", runs_csv(records, profiles));
    write_atomic(dir / "mean_curves.csv", mean_curves_csv(records, profiles));
    write_atomic(dir / "summary.json", summary.dump(2) + "\n");
}

/// Test phase against a given knowledge base, then every test output.
inline nlohmann::ordered_json run_testing(const KnowledgeBase& kb, const ExperimentConfig& cfg, const fs::path& out,
                                          std::ostream* log = nullptr, double train_s = 0.0) {
    SummaryContext ctx;
    ctx.config = describe(cfg);
    ctx.kb_hash_before = detail::hex64(kb_hash(kb));
    ctx.kb_tasks_seen = kb.tasks_seen;
    const auto start = std::chrono::steady_clock::now();
    const std::vector<RunRecord> records = run_test_phase(kb, cfg, log);
    const double test_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ctx.kb_hash_after = detail::hex64(kb_hash(kb));

    const nlohmann::ordered_json summary = make_summary(records, cfg.test_profiles, ctx);
    write_test_outputs(out, records, cfg.test_profiles, summary);
    write_atomic(out / "timing.json", timing_json(records, train_s, test_s, resolve_threads(cfg.threads)));
    return summary;
}

/// Training followed by testing, everything into `out`.
inline nlohmann::ordered_json run_all(const ExperimentConfig& cfg, const fs::path& out, std::ostream* log = nullptr) {
    const auto start = std::chrono::steady_clock::now();
    const TrainingResult trained = run_training(cfg, log);
    const double train_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_training_outputs(out, cfg, trained);
    return run_testing(trained.run.kb, cfg, out, log, train_s);
}

// ---------------------------------------------------------------------------
// Report: rebuild the summary from the CSVs of an earlier test phase

struct LoadedRuns {
    std::vector<RunRecord> records;
    std::vector<TaskProfile> profiles; // first-seen order
};

inline LoadedRuns load_runs(const fs::path& dir) {
    LoadedRuns out;
    std::map<std::tuple<std::string, int, std::uint64_t>, std::size_t> index;

    std::istringstream runs(read_file(dir / "runs.csv"));
    std::string line;
    std::getline(runs, line);
    while (std::getline(runs, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = detail::split_csv(line);
        if (f.size() != 10) throw std::runtime_error("runs.csv: malformed row: " + line);
        RunRecord r;
        r.method = f[0];
        r.task_id = std::stoi(f[1]);
        r.seed = std::stoull(f[4]);
        if (f[8] != "ok") r.error = f[9].empty() ? "failed" : f[9];
        const TaskProfile t{r.task_id, std::stod(f[2]), std::stod(f[3])};
        if (std::none_of(out.profiles.begin(), out.profiles.end(),
                         [&](const TaskProfile& p) { return p.task_id == t.task_id; })) {
            out.profiles.push_back(t);
        }
        index[{r.method, r.task_id, r.seed}] = out.records.size();
        out.records.push_back(std::move(r));
    }

    std::istringstream curves(read_file(dir / "curves.csv"));
    std::getline(curves, line);
    while (std::getline(curves, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = detail::split_csv(line);
        if (f.size() != 5) throw std::runtime_error("curves.csv: malformed row: " + line);
        const auto it = index.find({f[0], std::stoi(f[1]), std::stoull(f[2])});
        if (it == index.end()) throw std::runtime_error("curves.csv: row without a run: " + line);
        RunRecord& r = out.records[it->second];
        if (std::stoull(f[3]) != r.curve.size()) throw std::runtime_error("curves.csv: iterations out of order");
        r.curve.push_back(std::strtod(f[4].c_str(), nullptr));
    }
    return out;
}

/// Recomputes summary.json and mean_curves.csv in `dir` and returns the summary.
inline nlohmann::ordered_json run_report(const fs::path& dir) {
    const nlohmann::ordered_json previous = nlohmann::ordered_json::parse(read_file(dir / "summary.json"));
    SummaryContext ctx;
    ctx.config = previous.at("config");
    ctx.kb_hash_before = previous.at("knowledge_base").at("hash_before_test").get<std::string>();
    ctx.kb_hash_after = previous.at("knowledge_base").at("hash_after_test").get<std::string>();
    ctx.kb_tasks_seen = previous.at("knowledge_base").at("tasks_seen").get<std::size_t>();
    const double fraction = ctx.config.at("experiment").at("convergence_fraction").get<double>();
    const std::size_t window = ctx.config.at("experiment").at("window").get<std::size_t>();

    LoadedRuns loaded = load_runs(dir);
    ExperimentConfig metric_cfg;
    metric_cfg.convergence_fraction = fraction;
    metric_cfg.window = window;
    for (RunRecord& r : loaded.records) {
        if (r.ok()) finalize_record(r, metric_cfg);
    }
    const nlohmann::ordered_json summary = make_summary(loaded.records, loaded.profiles, ctx);
    write_atomic(dir / "summary.json", summary.dump(2) + "\n");
    write_atomic(dir / "mean_curves.csv", mean_curves_csv(loaded.records, loaded.profiles));
    return summary;
}

/// Human-readable table of a summary.
inline void print_summary(const nlohmann::ordered_json& s, std::ostream& os) {
    char buf[256];
    os << "knowledge base " << s["knowledge_base"]["hash_before_test"].get<std::string>()
       << (s["knowledge_base"]["unchanged"].get<bool>() ? " (unchanged by testing)" : " (CHANGED during testing)")
       << "\n";
    os << "runs: " << s["runs"]["total"] << " total, " << s["runs"]["failed"] << " failed\n";
    std::snprintf(buf, sizeof buf, "%-6s %-12s %10s %10s %14s %14s\n", "task", "method", "conv.mean", "conv.std",
                  "final.mean", "final.std");
    os << buf;
    auto num = [](const nlohmann::ordered_json& v) { return v.is_null() ? std::nan("") : v.get<double>(); };
    for (const auto& t : s["tasks"]) {
        for (const std::string& m : method_order()) {
            const auto& mj = t["methods"][m];
            std::snprintf(buf, sizeof buf, "%-6d %-12s %10.1f %10.1f %14.6g %14.6g\n", t["task_id"].get<int>(),
                          m.c_str(), num(mj["mean_convergence_iteration"]), num(mj["std_convergence_iteration"]),
                          num(mj["mean_final_return"]), num(mj["std_final_return"]));
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "       speedup vs vanilla-rl %.3f, vs lyapunov %.3f\n",
                      num(t["speedup_vs_vanilla_rl"]), num(t["speedup_vs_lyapunov"]));
        os << buf;
    }
    const auto& a = s["aggregate"];
    std::snprintf(buf, sizeof buf,
                  "mt-l2rl faster than vanilla-rl on %zu/%zu tasks, mean speedup %.3f; final >= lyapunov on %zu/%zu\n",
                  a["tasks_mt_faster_than_vanilla_rl"].get<std::size_t>(), a["test_tasks"].get<std::size_t>(),
                  num(a["mean_speedup_vs_vanilla_rl"]), a["tasks_mt_final_at_least_lyapunov"].get<std::size_t>(),
                  a["test_tasks"].get<std::size_t>());
    os << buf;
}

} // namespace ehl::harness
