#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ehl/ehl.hpp"

using namespace ehl;
using namespace ehl::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ehl_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.system.penalty_nu = 5e-10;
    c.rl.learning_rate = 5.0;
    c.rl.n_traj = 2;
    c.rl.horizon = 20;
    c.lifelong.train_iterations = 4;
    c.lyapunov.grid_p0 = 3;
    c.lyapunov.grid_alpha = 3;
    c.n_train_tasks = 1;
    c.test_profiles = {{1, 1.0, 0.45}};
    c.test_iterations = 12;
    c.seeds = {1};
    c.master_seed = 5;
    c.threads = 1;
    return c;
}

KnowledgeBase trained_kb() {
    const ExperimentConfig c = tiny_config();
    return run_training(c).run.kb;
}

} // namespace

TEST(TrainingTasks, TwentyFiveInRange) {
    Rng rng(1);
    const auto tasks = generate_training_tasks(25, rng);
    ASSERT_EQ(tasks.size(), 25u);
    for (std::size_t j = 0; j < tasks.size(); ++j) {
        EXPECT_EQ(tasks[j].task_id, static_cast<int>(j));
        EXPECT_GE(tasks[j].zeta_eh, 0.5);
        EXPECT_LE(tasks[j].zeta_eh, 1.5);
        EXPECT_GE(tasks[j].lambda_eff, 0.3);
        EXPECT_LE(tasks[j].lambda_eff, 0.6);
    }
}

TEST(TrainingTasks, FixedSeedGivesTheSameList) {
    Rng a(2), b(2);
    EXPECT_EQ(generate_training_tasks(10, a), generate_training_tasks(10, b));
}

TEST(TrainingTasks, EmpiricalMeansOfALargeStream) {
    Rng rng(3);
    const auto tasks = generate_training_tasks(10000, rng);
    double z = 0, l = 0;
    for (const auto& t : tasks) {
        z += t.zeta_eh;
        l += t.lambda_eff;
    }
    EXPECT_NEAR(z / 10000, 1.0, 0.02 * 1.0);
    EXPECT_NEAR(l / 10000, 0.45, 0.02 * 0.45);
    EXPECT_THROW(generate_training_tasks(0, rng), std::invalid_argument);
}

TEST(TestTasks, FourPositionalPairs) {
    const auto t = test_tasks();
    ASSERT_EQ(t.size(), 4u);
    EXPECT_EQ(t[3], (TaskProfile{3, 1.8, 0.65}));
    const double z[] = {0.6, 1.0, 1.4, 1.8}, l[] = {0.35, 0.45, 0.55, 0.65};
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(t[i].zeta_eh, z[i]);
        EXPECT_EQ(t[i].lambda_eff, l[i]);
    }
}

TEST(ConvergenceIteration, ConstantCurveConvergesAtTheFirstFullWindow) {
    EXPECT_EQ(convergence_iteration(std::vector<double>(50, 3.0), 0.9), 9u);
    EXPECT_EQ(convergence_iteration(std::vector<double>(50, -3.0), 0.9), 9u);
}

TEST(ConvergenceIteration, LinearRampConvergesNearNinetyPercent) {
    const std::size_t n = 200;
    std::vector<double> ramp(n);
    for (std::size_t i = 0; i < n; ++i) ramp[i] = 4.0 * static_cast<double>(i + 1) / n;
    const double k = static_cast<double>(convergence_iteration(ramp, 0.9));
    EXPECT_LE(std::abs(k - 0.9 * n), 10.0);
}

TEST(ConvergenceIteration, NeverReachingCurveReturnsTheLength) {
    std::vector<double> c(30, 1.0);
    c.back() = std::nan("");
    EXPECT_EQ(convergence_iteration(c, 0.9), 30u);
}

TEST(ConvergenceIteration, LooserFractionIsNeverLater) {
    Rng rng(4);
    for (int inst = 0; inst < 200; ++inst) {
        std::vector<double> c(60);
        double level = -1.0;
        for (double& v : c) {
            level += 0.05 * uniform01(rng);
            v = level + 0.1 * (uniform01(rng) - 0.5);
        }
        std::size_t prev = convergence_iteration(c, 1.0);
        for (double f : {0.95, 0.9, 0.7, 0.5, 0.2}) {
            const std::size_t now = convergence_iteration(c, f);
            ASSERT_LE(now, prev);
            prev = now;
        }
    }
}

TEST(ConvergenceIteration, NegativeFinalUsesTheAbsoluteBand) {
    std::vector<double> c(40, -10.0);
    for (std::size_t i = 20; i < 40; ++i) c[i] = -1.0;
    // final -1, band to -1.1: only windows fully in the second half qualify.
    EXPECT_EQ(convergence_iteration(c, 0.9), 29u);
}

TEST(ConvergenceIteration, RejectsBadInput) {
    EXPECT_THROW(convergence_iteration({}, 0.9), std::invalid_argument);
    EXPECT_THROW(convergence_iteration({1.0}, 0.0), std::invalid_argument);
    EXPECT_THROW(convergence_iteration({1.0}, 1.5), std::invalid_argument);
    EXPECT_EQ(convergence_iteration({1.0, 2.0}, 0.9), 1u); // window shrinks to the curve
}

TEST(KbIo, RoundTripIsExact) {
    const KnowledgeBase kb = trained_kb();
    const fs::path dir = scratch_dir("kb_roundtrip");
    save_kb(kb, dir / "kb.bin", {5, {0}});
    KbLineage lineage;
    const KnowledgeBase back = load_kb(dir / "kb.bin", &lineage);
    EXPECT_TRUE(back == kb);
    EXPECT_EQ(lineage.master_seed, 5u);
    EXPECT_EQ(lineage.trained_task_ids, std::vector<int>{0});
    EXPECT_EQ(kb_hash(back), kb_hash(kb));
    EXPECT_FALSE(fs::exists(dir / "kb.bin.tmp"));
}

TEST(KbIo, CorruptedPayloadIsASchemaError) {
    const std::string good = serialize_kb(trained_kb());
    std::string bad = good;
    bad[bad.size() / 2] ^= 0x40;
    EXPECT_THROW(deserialize_kb(bad), KbSchemaError);
    EXPECT_THROW(deserialize_kb(good.substr(0, good.size() - 9)), KbSchemaError);
    EXPECT_THROW(deserialize_kb("not a knowledge base"), KbSchemaError);

    const fs::path dir = scratch_dir("kb_corrupt");
    write_atomic(dir / "kb.bin", bad);
    KnowledgeBase untouched;
    untouched.eta = 0.123;
    try {
        untouched = load_kb(dir / "kb.bin");
        FAIL() << "expected KbSchemaError";
    } catch (const KbSchemaError&) {
    }
    EXPECT_EQ(untouched.eta, 0.123);
    EXPECT_EQ(untouched.basis.size(), 0);
}

TEST(KbIo, VersionMismatchIsAVersionError) {
    std::string bytes = serialize_kb(trained_kb());
    bytes[8] = 2; // container version field, little-endian
    EXPECT_THROW(deserialize_kb(bytes), KbVersionError);
}

TEST(KbIo, HashTracksContent) {
    KnowledgeBase kb = trained_kb();
    const std::uint64_t h = kb_hash(kb);
    kb.basis(0, 0) = std::nextafter(kb.basis(0, 0), 1e9);
    EXPECT_NE(kb_hash(kb), h);
}

TEST(Config, DefaultsMatchTheStatedProtocol) {
    const ExperimentConfig c = config_from_json(nlohmann::json::object());
    EXPECT_EQ(c.n_train_tasks, 25u);
    EXPECT_EQ(c.rl.horizon, 500u);
    EXPECT_EQ(c.rl.gamma, 0.99);
    EXPECT_EQ(c.lifelong.mu1, 0.01);
    EXPECT_EQ(c.lifelong.mu2, 0.01);
    EXPECT_EQ(c.test_profiles.size(), 4u);
    EXPECT_EQ(c.seeds.size(), 10u);
    EXPECT_EQ(c.lyapunov.V, 50.0);
    EXPECT_EQ(describe(c)["rl"]["gamma"], 0.99);
}

TEST(Config, ParsesSectionsAndRejectsUnknownKeys) {
    const auto j = nlohmann::json::parse(R"({
        "system": {"noise_dbm": -110, "reward_mode": "hinge", "battery_capacity_j": 8},
        "rl": {"policy_std": 1.0, "n_traj": 3},
        "experiment": {"test_profiles": [{"task_id": 9, "zeta_eh": 1.1, "lambda_eff": 0.4}], "seeds": [4, 5]}
    })");
    const ExperimentConfig c = config_from_json(j);
    EXPECT_NEAR(c.system.noise_N0, 1e-14, 1e-26);
    EXPECT_EQ(c.system.reward_mode, RewardMode::hinge);
    EXPECT_EQ(c.rl.log_std, 0.0);
    EXPECT_EQ(c.rl.n_traj, 3u);
    EXPECT_EQ(c.lyapunov.V, 80.0); // follows capacity when not given
    EXPECT_EQ(c.test_profiles, (std::vector<TaskProfile>{{9, 1.1, 0.4}}));
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4, 5}));

    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"rl": {"learning_rat": 1}})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"extra": {}})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"system": {"reward_mode": "other"}})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"experiment": {"seeds": []}})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"rl": {"n_traj": "eight"}})")), ConfigError);
}

TEST(Config, ShippedConfigsLoad) {
    for (const char* name : {"desk_scale.json", "smoke.json"}) {
        EXPECT_NO_THROW(load_config(fs::path(EHL_SOURCE_DIR) / "configs" / name)) << name;
    }
}

TEST(Config, EnvironmentOverrides) {
    ExperimentConfig c;
    ::setenv("EHL_OUT_DIR", "/tmp/somewhere", 1);
    ::setenv("EHL_THREADS", "3", 1);
    apply_env_overrides(c);
    EXPECT_EQ(c.output_dir, "/tmp/somewhere");
    EXPECT_EQ(c.threads, 3u);
    ::setenv("EHL_THREADS", "three", 1);
    EXPECT_THROW(apply_env_overrides(c), ConfigError);
    ::unsetenv("EHL_OUT_DIR");
    ::unsetenv("EHL_THREADS");
}

TEST(Experiment, SmokeRunWritesEveryFile) {
    const fs::path dir = scratch_dir("smoke");
    const auto summary = run_all(tiny_config(), dir);
    for (const char* f : {"kb.bin", "training_tasks.csv", "training_curves.csv", "curves.csv", "runs.csv",
                          "mean_curves.csv", "summary.json", "timing.json"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    EXPECT_TRUE(summary["knowledge_base"]["unchanged"].get<bool>());
    EXPECT_EQ(summary["runs"]["total"], 3);
    std::ifstream curves(dir / "curves.csv");
    std::string header;
    std::getline(curves, header);
    EXPECT_EQ(header, "method,task_id,seed,iteration,return");
}

TEST(Experiment, RepeatedRunsAreByteIdentical) {
    const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
    ExperimentConfig c = tiny_config();
    c.seeds = {1, 2};
    run_all(c, a);
    c.threads = 3; // scheduling must not leak into the results
    run_all(c, b);
    for (const char* f : {"kb.bin", "training_curves.csv", "curves.csv", "runs.csv", "mean_curves.csv", "summary.json"}) {
        EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
    }
}

TEST(Experiment, EveryTripleHasExactlyOneRecord) {
    ExperimentConfig c = tiny_config();
    c.seeds = {3, 4};
    c.test_profiles = {{0, 0.6, 0.35}, {2, 1.4, 0.55}};
    const KnowledgeBase kb = run_training(c).run.kb;
    const std::uint64_t before = kb_hash(kb);
    const std::vector<RunRecord> records = run_test_phase(kb, c);
    EXPECT_EQ(kb_hash(kb), before);
    ASSERT_EQ(records.size(), 2u * 2u * 3u);
    std::set<std::tuple<std::string, int, std::uint64_t>> seen;
    for (const RunRecord& r : records) {
        EXPECT_TRUE(r.ok()) << r.error;
        EXPECT_TRUE(seen.insert({r.method, r.task_id, r.seed}).second);
        EXPECT_EQ(r.curve.size(), c.test_iterations);
        EXPECT_LE(r.convergence_iteration, r.curve.size());
    }
}

TEST(Experiment, MtAndVanillaShareTheLearnerStream) {
    // With a zero basis the warm start is the cold start, so after the probe
    // the adaptation replays the baseline's first iterations exactly.
    ExperimentConfig c = tiny_config();
    Rng rng(1);
    KnowledgeBase kb = KnowledgeBase::init(28, 4, 0.2, 0.0, rng);
    kb.tasks_seen = 1;
    const TaskProfile task = c.test_profiles[0];
    const RunRecord mt = run_test_job({task, 1, method::mt_l2rl}, kb, c);
    const RunRecord van = run_test_job({task, 1, method::vanilla_rl}, kb, c);
    ASSERT_TRUE(mt.ok() && van.ok());
    const std::size_t probe = c.lifelong.probe_budget;
    for (std::size_t i = 0; i + probe < c.test_iterations; ++i) EXPECT_EQ(mt.curve[probe + i], van.curve[i]);
}

TEST(Experiment, ReportRebuildsTheSameSummary) {
    const fs::path dir = scratch_dir("report");
    run_all(tiny_config(), dir);
    const std::string summary = read_file(dir / "summary.json");
    const std::string means = read_file(dir / "mean_curves.csv");
    run_report(dir);
    EXPECT_EQ(read_file(dir / "summary.json"), summary);
    EXPECT_EQ(read_file(dir / "mean_curves.csv"), means);
}

TEST(Summary, SpeedupsFromSyntheticRecords) {
    const std::vector<TaskProfile> profiles = {{0, 1.0, 0.5}};
    std::vector<RunRecord> recs;
    auto add = [&](const char* m, std::size_t conv, double fin, std::vector<double> curve) {
        RunRecord r;
        r.method = m;
        r.curve = std::move(curve);
        r.convergence_iteration = conv;
        r.final_return = fin;
        recs.push_back(r);
    };
    add(method::mt_l2rl, 10, 1.0, {1.0});
    add(method::mt_l2rl, 20, 1.2, {1.0});
    add(method::vanilla_rl, 30, 1.1, {1.0});
    add(method::vanilla_rl, 50, 1.1, {1.0});
    add(method::lyapunov, 9, 0.9, {0.8, 1.0});
    SummaryContext ctx;
    ctx.kb_hash_before = ctx.kb_hash_after = "00";
    const auto s = make_summary(recs, profiles, ctx);
    const auto& t = s["tasks"][0];
    EXPECT_DOUBLE_EQ(t["methods"]["mt-l2rl"]["mean_convergence_iteration"].get<double>(), 15.0);
    EXPECT_DOUBLE_EQ(t["speedup_vs_vanilla_rl"].get<double>(), 40.0 / 15.0);
    EXPECT_DOUBLE_EQ(t["methods"]["lyapunov"]["mean_return_over_curve"].get<double>(), 0.9);
    EXPECT_TRUE(t["mt_converges_faster_than_vanilla_rl"].get<bool>());
    EXPECT_TRUE(t["mt_final_at_least_lyapunov_per_slot"].get<bool>());
    EXPECT_EQ(s["aggregate"]["tasks_mt_faster_than_vanilla_rl"], 1);
}
