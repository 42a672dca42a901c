#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ehl/env.hpp"
#include "ehl/rng.hpp"

using namespace ehl;

namespace {

SystemConfig unit_noise_config() {
    SystemConfig cfg;
    cfg.noise_N0 = 1e-15;
    return cfg;
}

void expect_rel(double actual, double expected, double rel) {
    EXPECT_LE(std::abs(actual - expected), rel * std::abs(expected)) << actual << " vs " << expected;
}

} // namespace

TEST(Rng, SubstreamsAreStableAndDistinct) {
    EXPECT_EQ(substream_seed(1, "a"), substream_seed(1, "a"));
    EXPECT_NE(substream_seed(1, "a"), substream_seed(1, "b"));
    EXPECT_NE(substream_seed(1, "a"), substream_seed(2, "a"));
    Rng x = substream(9, "train/task0"), y = substream(9, "train/task0");
    for (int i = 0; i < 10; ++i) EXPECT_EQ(x(), y());
}

TEST(Rng, Uniform01StaysInHalfOpenUnitInterval) {
    Rng rng(3);
    for (int i = 0; i < 100000; ++i) {
        const double u = uniform01(rng);
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(SampleChannel, RayleighMomentsAtOneMillionDraws) {
    Rng rng(11);
    const int n = 1000000;
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double h = sample_channel(1.0, rng);
        ASSERT_GE(h, 0.0);
        m1 += h;
        m2 += h * h;
    }
    expect_rel(m1 / n, 1.2533141373155003, 0.01);
    expect_rel(m2 / n, 2.0, 0.01);
}

TEST(SampleChannel, ScaleMultipliesTheDraw) {
    Rng a(5), b(5);
    EXPECT_DOUBLE_EQ(sample_channel(2.5, a), 2.5 * sample_channel(1.0, b));
}

TEST(SampleChannel, RejectsNonPositiveScale) {
    Rng rng(1);
    EXPECT_THROW(sample_channel(0.0, rng), std::domain_error);
    EXPECT_THROW(sample_channel(-1.0, rng), std::domain_error);
}

TEST(SampleArrivals, PoissonMomentsAtOneMillionSlots) {
    Rng rng(12);
    const int n = 1000000;
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double a = sample_arrivals(1000.0, 1.0, rng);
        ASSERT_GE(a, 0.0);
        ASSERT_EQ(a, std::floor(a));
        m1 += a;
        m2 += a * a;
    }
    m1 /= n;
    m2 /= n;
    expect_rel(m1, 1000.0, 0.01);
    expect_rel(m2 - m1 * m1, 1000.0, 0.01); // variance equals the mean
    expect_rel(m2, 1000.0 + 1000.0 * 1000.0, 0.01);
}

TEST(SampleArrivals, ZeroRateIsAlwaysZero) {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_arrivals(0.0, 1.0, rng), 0.0);
}

TEST(SampleArrivals, NegativeRateThrows) {
    Rng rng(1);
    EXPECT_THROW(sample_arrivals(-1.0, 1.0, rng), std::domain_error);
}

TEST(TransmittedData, UnitSnrGivesExactlyBandwidthBits) {
    SystemConfig cfg = unit_noise_config();
    EXPECT_DOUBLE_EQ(transmitted_data(1e-15, 1.0, 1.0, cfg), cfg.bandwidth_W);
}

TEST(TransmittedData, ZeroPowerGivesZeroBits) {
    const SystemConfig cfg = unit_noise_config();
    for (double alpha : {0.0, 0.3, 1.0}) EXPECT_EQ(transmitted_data(0.0, 1.7, alpha, cfg), 0.0);
}

TEST(TransmittedData, HalfSlotAtFullPower) {
    expect_rel(transmitted_data(0.03, 1.0, 0.5, unit_noise_config()), 111925069.33564228698, 1e-12);
}

TEST(TransmittedData, SlotDurationScalesBits) {
    SystemConfig cfg = unit_noise_config();
    const double one = transmitted_data(0.02, 0.8, 0.4, cfg);
    cfg.slot_duration = 0.25;
    expect_rel(transmitted_data(0.02, 0.8, 0.4, cfg), 0.25 * one, 1e-15);
}

TEST(TransmittedData, MonotoneInEachArgument) {
    const SystemConfig cfg = unit_noise_config();
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
        const double p = 0.03 * uniform01(rng), h = 3 * uniform01(rng), a = uniform01(rng);
        const double base = transmitted_data(p, h, a, cfg);
        EXPECT_LE(base, transmitted_data(std::min(p + 1e-3, 0.03), h, a, cfg));
        EXPECT_LE(base, transmitted_data(p, h + 0.1, a, cfg));
        EXPECT_LE(base, transmitted_data(p, h, std::min(a + 0.05, 1.0), cfg));
    }
}

TEST(TransmittedData, RejectsOutOfRangeInputs) {
    const SystemConfig cfg;
    EXPECT_THROW(transmitted_data(-0.1, 1.0, 0.5, cfg), std::domain_error);
    EXPECT_THROW(transmitted_data(0.1, -1.0, 0.5, cfg), std::domain_error);
    EXPECT_THROW(transmitted_data(0.1, 1.0, 1.5, cfg), std::domain_error);
}

TEST(HarvestedPower, FullDataPowerLeavesNothing) {
    const SystemConfig cfg;
    EXPECT_EQ(harvested_power(cfg.P0_max, 2.3, {0, 1.0, 0.9}, cfg), 0.0);
}

TEST(HarvestedPower, HandComputedValue) {
    expect_rel(harvested_power(0.01, 1.0, {0, 1.0, 0.45}, SystemConfig{}), 0.009, 1e-12);
}

TEST(HarvestedPower, ZeroChannelGivesZero) {
    EXPECT_EQ(harvested_power(0.01, 0.0, {0, 1.0, 0.45}, SystemConfig{}), 0.0);
}

TEST(HarvestedPower, PowerAboveBudgetThrows) {
    const SystemConfig cfg;
    EXPECT_THROW(harvested_power(cfg.P0_max * 1.01, 1.0, {}, cfg), std::domain_error);
    EXPECT_THROW(harvested_power(-0.001, 1.0, {}, cfg), std::domain_error);
}

TEST(QueueUpdate, Examples) {
    EXPECT_EQ(queue_update(10, 4, 2), 8);
    EXPECT_EQ(queue_update(3, 5, 1), 1);
    EXPECT_EQ(queue_update(0, 0, 0), 0);
}

TEST(BatteryUpdate, Examples) {
    expect_rel(battery_update(1.0, 0.01, 1.0, 0.0, 0.0, 1.0), 0.99, 1e-12);
    EXPECT_EQ(battery_update(0.005, 0.01, 1.0, 0.009, 0.0, 1.0), 0.0);
    expect_rel(battery_update(0.0, 0.0, 0.0, 0.009, 0.5, 1.0), 0.0045, 1e-12);
}

TEST(Updates, NeverNegative) {
    Rng rng(8);
    for (int i = 0; i < 10000; ++i) {
        const double u1 = uniform01(rng), u2 = uniform01(rng), u3 = uniform01(rng);
        EXPECT_GE(queue_update(100 * u1, 200 * u2, 50 * u3), 0.0);
        EXPECT_GE(battery_update(u1, 0.01, u2, 0.03 * u3, 1.0 - u2, 1.0), 0.0);
    }
}

TEST(Reward, EmptySystemLiteralFormIsPlusNuB) {
    SystemConfig cfg;
    EXPECT_DOUBLE_EQ(reward(SystemState{}, ControlAction{}, 0, 0, cfg), 5.0);
}

TEST(Reward, PureEnergyTerm) {
    SystemConfig cfg;
    cfg.penalty_nu = 0.0;
    EXPECT_DOUBLE_EQ(reward(SystemState{}, {0.03, 1.0, 0.0, 0.0}, 0, 0, cfg), -0.03);
}

TEST(Reward, BatteryExcessPenalty) {
    SystemConfig cfg;
    SystemState s;
    s.b = 6.0;
    s.q0 = 7.0;
    s.q1 = 2.0;
    EXPECT_DOUBLE_EQ(reward(s, ControlAction{}, 7.0, 2.0, cfg), -1.0);
}

TEST(Reward, HingeModeIgnoresSlack) {
    SystemConfig cfg;
    cfg.reward_mode = RewardMode::hinge;
    EXPECT_EQ(reward(SystemState{}, ControlAction{}, 0, 0, cfg), 0.0);
    SystemState s;
    s.b = 6.0;
    s.q0 = 10.0;
    EXPECT_DOUBLE_EQ(reward(s, ControlAction{}, 4.0, 100.0, cfg), -(1.0 + 6.0));
}

TEST(ProjectAction, ZeroLogitsSplitEvenly) {
    const SystemConfig cfg;
    const ControlAction a = project_action(RawAction::Zero(), cfg);
    EXPECT_DOUBLE_EQ(a.p0, cfg.P0_max / 2);
    EXPECT_DOUBLE_EQ(a.alpha0, 0.25);
    EXPECT_DOUBLE_EQ(a.alpha1, 0.25);
    EXPECT_DOUBLE_EQ(a.alpha_eh, 0.25);
}

TEST(ProjectAction, VeryNegativePowerLogitGivesZeroPower) {
    EXPECT_LT(project_action(RawAction(-800, 0, 0, 0), SystemConfig{}).p0, 1e-300);
}

TEST(ProjectAction, AlwaysFeasibleWithPositiveIdleShare) {
    const SystemConfig cfg;
    Rng rng(2);
    std::normal_distribution<double> normal(0.0, 20.0);
    for (int i = 0; i < 10000; ++i) {
        const RawAction raw(normal(rng), normal(rng), normal(rng), normal(rng));
        const ControlAction a = project_action(raw, cfg);
        ASSERT_TRUE(a.feasible(cfg));
        ASSERT_LT(a.alpha0 + a.alpha1 + a.alpha_eh, 1.0);
    }
    const ControlAction sat = project_action(RawAction(0, 1e6, 1e6, 1e6), cfg);
    EXPECT_LT(sat.alpha0 + sat.alpha1 + sat.alpha_eh, 1.0);
}

TEST(ProjectAction, NonFiniteThrows) {
    EXPECT_THROW(project_action(RawAction(0, std::nan(""), 0, 0), SystemConfig{}), std::domain_error);
    EXPECT_THROW(project_action(RawAction(std::numeric_limits<double>::infinity(), 0, 0, 0), SystemConfig{}),
                 std::domain_error);
}

TEST(Step, ZeroActionZeroArrivalsEmptySystem) {
    SystemConfig cfg;
    cfg.arrival_rate = 0.0;
    Rng rng(1);
    const StepOutcome out = step(SystemState{}, ControlAction{}, {0, 1.0, 0.5}, cfg, rng);
    EXPECT_EQ(out.next_state.q0, 0.0);
    EXPECT_EQ(out.next_state.q1, 0.0);
    EXPECT_EQ(out.next_state.b, 0.0);
    EXPECT_DOUBLE_EQ(out.reward, cfg.penalty_nu * cfg.battery_cap_B);
}

TEST(Step, FullHarvestSlotChargesBatteryExactly) {
    SystemConfig cfg;
    const TaskProfile task{0, 1.0, 0.45};
    SystemState s;
    s.h_eh = 1.3;
    Rng rng(1);
    const StepOutcome out = step(s, {0.0, 0.0, 0.0, 1.0}, task, cfg, rng);
    const double expected = task.lambda_eff * cfg.P0_max * s.h_eh * cfg.slot_duration;
    EXPECT_EQ(out.harvested_energy, harvested_power(0.0, s.h_eh, task, cfg) * 1.0 * cfg.slot_duration);
    expect_rel(out.harvested_energy, expected, 1e-15);
    EXPECT_EQ(out.next_state.b, s.b + out.harvested_energy);
}

TEST(Step, RewardUsesPreUpdateState) {
    SystemConfig cfg;
    SystemState s;
    s.q0 = 5000;
    s.q1 = 300;
    s.b = 2.0;
    s.h0 = 0.7;
    s.h1 = 1.1;
    s.h_eh = 0.9;
    const ControlAction a{0.02, 0.1, 0.2, 0.3};
    Rng rng(6);
    const StepOutcome out = step(s, a, {0, 1.0, 0.5}, cfg, rng);
    const double d0 = transmitted_data(a.p0, s.h0, a.alpha0, cfg);
    const double d1 = transmitted_data(cfg.P1_fixed, s.h1, a.alpha1, cfg);
    EXPECT_EQ(out.d0, d0);
    EXPECT_EQ(out.d1, d1);
    EXPECT_EQ(out.reward, reward(s, a, d0, d1, cfg));
}

TEST(Step, TrajectoryIsBitIdenticalForAFixedSeed) {
    const SystemConfig cfg;
    const TaskProfile task{2, 1.4, 0.55};
    auto run = [&] {
        Rng rng(99);
        SystemState s = initial_state(task, cfg, rng);
        std::vector<StepOutcome> trace;
        for (int t = 0; t < 500; ++t) {
            const double u = uniform01(rng);
            const ControlAction a{0.03 * u, 0.3 * u, 0.2, 0.4 * (1 - u)};
            trace.push_back(step(s, a, task, cfg, rng));
            s = trace.back().next_state;
        }
        return trace;
    };
    EXPECT_EQ(run(), run());
}

TEST(Step, HardClipKeepsBatteryAtCapacity) {
    SystemConfig cfg;
    cfg.battery_hard_clip = true;
    SystemState s;
    s.b = cfg.battery_cap_B;
    s.h_eh = 50.0;
    Rng rng(1);
    EXPECT_EQ(step(s, {0, 0, 0, 1.0}, {0, 1.0, 1.0}, cfg, rng).next_state.b, cfg.battery_cap_B);
    cfg.battery_hard_clip = false;
    Rng rng2(1);
    EXPECT_GT(step(s, {0, 0, 0, 1.0}, {0, 1.0, 1.0}, cfg, rng2).next_state.b, cfg.battery_cap_B);
}

TEST(Step, RejectsInfeasibleAction) {
    Rng rng(1);
    EXPECT_THROW(step(SystemState{}, {0.0, 0.6, 0.6, 0.0}, {}, SystemConfig{}, rng), std::domain_error);
}

TEST(TaskSchedule, Examples) {
    const auto first = make_task_schedule(500, 1);
    EXPECT_EQ(first[0].first, 0u);
    EXPECT_EQ(first[0].last(), 499u);
    const auto unit = make_task_schedule(1, 3);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(unit[j].first, j);
        EXPECT_EQ(unit[j].length, 1u);
    }
}

TEST(TaskSchedule, IntervalsPartitionTheHorizon) {
    const auto sched = make_task_schedule(7, 5);
    for (std::size_t t = 0; t < 35; ++t) {
        int owners = 0;
        for (const auto& iv : sched) owners += iv.contains(t) ? 1 : 0;
        EXPECT_EQ(owners, 1) << "slot " << t;
    }
    EXPECT_FALSE(sched.back().contains(35));
}

TEST(Config, DefaultsMatchTheStatedSystem) {
    const SystemConfig cfg;
    EXPECT_EQ(cfg.bandwidth_W, 5e6);
    expect_rel(cfg.noise_N0, 1e-15, 1e-12);
    EXPECT_EQ(cfg.arrival_rate, 1000.0);
    EXPECT_EQ(cfg.P0_max, 0.03);
    EXPECT_EQ(cfg.P1_fixed, 0.01);
    EXPECT_EQ(cfg.battery_cap_B, 5.0);
    EXPECT_NO_THROW(cfg.validate());
    SystemConfig bad = cfg;
    bad.zeta0 = 0.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(TaskProfileValidate, Bounds) {
    EXPECT_NO_THROW((TaskProfile{0, 1.0, 1.0}).validate());
    EXPECT_THROW((TaskProfile{0, 1.0, 0.0}).validate(), std::invalid_argument);
    EXPECT_THROW((TaskProfile{0, 0.0, 0.5}).validate(), std::invalid_argument);
    EXPECT_THROW((TaskProfile{-1, 1.0, 0.5}).validate(), std::invalid_argument);
}
