#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "thermomag/driver.hpp"
#include "thermomag/verify.hpp"

using namespace thermomag;

namespace {

SimConfig short_config(int steps_per_cycle = 20) {
    SimConfig c = verify::experiment1();
    c.tau = 0.1;
    c.waveform.period = steps_per_cycle * c.tau;
    c.cycles = 1;
    return c;
}

}  // namespace

TEST(Waveform, Values) {
    const Waveform wf;
    EXPECT_EQ(field_at(0.0, wf), Vec2(0.0, 0.0));
    EXPECT_NEAR((field_at(2.5, wf) - Vec2(300.0, 0.0)).norm(), 0.0, 1e-12);
    EXPECT_NEAR(wave_profile(5.0, wf), 0.0, 1e-12);
    EXPECT_NEAR(wave_profile(7.5, wf), -1.0, 1e-12);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(0.0, 100.0);
    for (int i = 0; i < 20; ++i) {
        const double t = U(rng);
        EXPECT_NEAR((field_at(t + 10.0, wf) - field_at(t, wf)).norm(), 0.0, 1e-9);
    }
    Waveform s;
    s.kind = WaveKind::sinusoidal;
    EXPECT_NEAR(wave_profile(2.5, s), 1.0, 1e-15);
}

TEST(Driver, StepGrid) {
    const SimConfig c;
    EXPECT_EQ(c.steps_per_cycle(), 100);
    EXPECT_EQ(c.num_steps(), 800);
    SimConfig bad;
    bad.tau = 0.3;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Driver, EquilibriumFixedPoint) {
    SimConfig c = short_config(10);
    c.waveform.amplitude = 0.0;
    c.material.theta_ext = c.theta0;
    const RunResult r = Simulation(c).run();
    ASSERT_EQ(r.series.size(), 11u);
    for (const auto& s : r.series) {
        EXPECT_LE(std::hypot(s.mean_mx, s.mean_my), 1e-8) << "step " << s.step;
        EXPECT_NEAR(s.mean_theta, c.theta0, 1e-6) << "step " << s.step;
        EXPECT_NEAR(s.magnetic_residual, 0.0, 1e-9);
        EXPECT_NEAR(s.thermal_residual, 0.0, 1e-9);
    }
}

TEST(Driver, BaseCaseResiduals) {
    const RunResult r = Simulation(short_config()).run();
    EXPECT_EQ(magnetic_balance_residual(r.series, 0).residual, 0.0);
    EXPECT_EQ(magnetic_balance_residual(r.series, 0, true).residual, 0.0);
    EXPECT_EQ(thermal_balance_residual(r.series, 0).residual, 0.0);
}

TEST(Driver, FirstStepThermalTermSign) {
    // The first field increment moves weight toward +x while p drops with
    // heating; the coupling work sign follows a . dlambda.
    const RunResult r = Simulation(short_config()).run();
    const auto& s = r.series.at(1);
    EXPECT_GT(s.step_dissipation, 0.0);
    EXPECT_TRUE(std::isfinite(s.thermal_rhs));
    EXPECT_DOUBLE_EQ(s.thermal_residual, s.cumulative_dissipation - s.thermal_rhs);
}

TEST(Driver, ObserverSnapshotsAndDeterminism) {
    SimConfig c = short_config();
    c.snapshot_every = 10;
    int seen = 0;
    const Simulation sim(c);
    const RunResult a = sim.run([&](const StepView& v) {
        EXPECT_EQ(v.step, seen);
        ++seen;
    });
    EXPECT_EQ(seen, 21);
    ASSERT_EQ(a.snapshots.size(), 3u);
    EXPECT_EQ(a.snapshots[2].first, 20);
    const RunResult b = Simulation(c).run();
    ASSERT_EQ(a.series.size(), b.series.size());
    for (std::size_t k = 0; k < a.series.size(); ++k) {
        EXPECT_EQ(a.series[k].mean_mx, b.series[k].mean_mx);
        EXPECT_EQ(a.series[k].mean_theta, b.series[k].mean_theta);
        EXPECT_EQ(a.series[k].cumulative_dissipation, b.series[k].cumulative_dissipation);
        EXPECT_EQ(a.series[k].iterations, b.series[k].iterations);
    }
    EXPECT_EQ(a.final_state.weights.xi, b.final_state.weights.xi);
}

TEST(Driver, LaggedCouplingLeavesMismatch) {
    // One minimize + heat pass per step: p trails the new temperature. A weak
    // field keeps the lagged scheme away from its oscillatory regime.
    SimConfig c = short_config(10);
    c.p_update = PUpdate::lagged;
    c.waveform.amplitude = 0.1;
    const RunResult r = Simulation(c).run();
    ASSERT_EQ(r.series.size(), 11u);
    for (std::size_t k = 1; k < r.series.size(); ++k) {
        EXPECT_EQ(r.series[k].coupling_iterations, 1);
        EXPECT_GT(r.series[k].coupling_residual, 1e-6);
    }
}

TEST(Driver, ImplicitCouplingSettles) {
    const RunResult r = Simulation(short_config()).run();
    for (std::size_t k = 1; k < r.series.size(); ++k) EXPECT_LE(r.series[k].coupling_residual, 1e-6) << "step " << k;
}

TEST(Driver, ErrorsCarryStepIndex) {
    SimConfig c = short_config();
    c.solver.max_iterations = 1;
    c.solver.gradient_tolerance = 1e-15;
    try {
        Simulation(c).run();
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
    }
}

TEST(LoopArea, CounterclockwiseCircle) {
    TimeSeries s;
    const int n = 400;
    for (int k = 0; k <= n; ++k) {
        StepRecord r;
        const double a = 2.0 * std::numbers::pi * k / n;
        r.h_x = std::cos(a);
        r.mean_mx = std::sin(a);
        r.mean_theta = 1000.0 + k;
        s.push_back(r);
    }
    EXPECT_NEAR(loop_area(s, n, 1), std::numbers::pi, 1e-3);
    EXPECT_NEAR(cycle_mean_theta(s, n, 1), 1000.0 + (n + 1) / 2.0, 1e-9);
    EXPECT_THROW(loop_area(s, n, 2), Error);
}
