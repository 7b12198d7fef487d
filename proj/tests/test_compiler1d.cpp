#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "resnet_synth/compiler1d.hpp"
#include "resnet_synth/verify.hpp"

using namespace resnet_synth;

namespace {

double run_blocks(std::span<const ResidualBlock> blocks, double x) {
    double s[1] = {x};
    for (const auto& b : blocks) b.apply(s);
    return s[0];
}

std::vector<ResidualBlock> first_stage(double a0, double a1, double H, double delta) {
    std::vector<ResidualBlock> bs;
    for (const auto& b : init_blocks(a0, H, delta)) bs.push_back(b);
    for (const auto& b : induction_step(0, a0, a1, H, delta)) bs.push_back(b);
    return bs;
}

const PiecewiseConstant1D kUnit{{0.0, 1.0}, {1.0}};

}  // namespace

TEST(InitBlocks, ZeroLeftOfStart) {
    const auto b = init_blocks(0.0, 1.0, 0.25);
    EXPECT_EQ(run_blocks(b, -5.0), 0.0);
}

TEST(InitBlocks, DescendingTail) {
    const auto b = init_blocks(0.0, 1.0, 0.25);
    EXPECT_NEAR(run_blocks(b, 0.5), -(1.0 / 0.25) * 0.5, 1e-12);
}

TEST(InductionStep, PlateauRampAndTail) {
    const auto bs = first_stage(0.0, 1.0, 1.0, 0.25);
    EXPECT_NEAR(run_blocks(bs, 0.5), 2.0, 1e-12);
    EXPECT_NEAR(run_blocks(bs, 0.125), 8.0 * 0.125, 1e-12);
    EXPECT_NEAR(run_blocks(bs, 1.25), -8.0 * 0.25, 1e-12);
}

TEST(InductionStep, RejectsNarrowInterval) {
    try {
        induction_step(3, 0.0, 0.4, 1.0, 0.25);
        FAIL();
    } catch (const PreconditionError& e) {
        ASSERT_TRUE(e.interval().has_value());
        EXPECT_EQ(*e.interval(), 3u);
    }
}

TEST(TailRemoval, ZeroRightOfSupport) {
    auto bs = first_stage(0.0, 1.0, 1.0, 0.25);
    bs.push_back(tail_removal());
    EXPECT_EQ(run_blocks(bs, 2.0), 0.0);
}

TEST(AdjustmentStep, Examples) {
    auto bs = first_stage(0.0, 1.0, 1.0, 0.25);
    bs.push_back(tail_removal());
    bs.push_back(adjustment_step(1, 1.0, 1.0));
    EXPECT_NEAR(run_blocks(bs, 0.5), 1.0, 1e-12);
    EXPECT_EQ(run_blocks(bs, -0.5), 0.0);
    // R_1^*(0.1875) = 1.5 on the ramp; 1.5 - [1.5 - 1]_+ = 1
    EXPECT_NEAR(run_blocks(std::span(bs).first(bs.size() - 1), 0.1875), 1.5, 1e-12);
    EXPECT_NEAR(run_blocks(bs, 0.1875), 1.0, 1e-12);
}

TEST(Compile1D, WorkedExample) {
    const auto c = compile_1d(kUnit, 0.25);
    EXPECT_EQ(c.net.size(), 8u);
    EXPECT_NEAR(eval_network(c.net, 0.5), 1.0, 1e-12);
    EXPECT_NEAR(eval_network(c.net, -1.0), 0.0, 1e-12);
    EXPECT_NEAR(eval_network(c.net, 2.0), 0.0, 1e-12);
    EXPECT_NEAR(eval_network(c.net, 0.0625), 0.5, 1e-12);
    EXPECT_EQ(c.net.out_weights(), std::vector<double>{1.0});
    EXPECT_EQ(c.net.out_bias(), 0.0);
}

TEST(Compile1D, CheckpointsArePrefixes) {
    const PiecewiseConstant1D t{{-1.0, 0.0, 0.5, 2.0}, {1.0, -2.0, 0.5}};
    const auto c = compile_1d(t, 0.1);
    ASSERT_EQ(c.trace.checkpoints.size(), 2 * t.cells() + 2);
    EXPECT_EQ(c.trace.checkpoints.front().blocks, 3u);
    EXPECT_EQ(c.trace.checkpoints.back().blocks, c.net.size());
    for (std::size_t i = 1; i < c.trace.checkpoints.size(); ++i)
        EXPECT_GT(c.trace.checkpoints[i].blocks, c.trace.checkpoints[i - 1].blocks);
    ASSERT_NE(c.trace.find(StageKind::Adjusted, 3), nullptr);
    EXPECT_EQ(c.trace.find(StageKind::Adjusted, 3)->blocks, 3u + 9u + 1u);
}

TEST(Compile1D, ZeroTargetGivesEmptyNet) {
    const auto c = compile_1d({{0.0, 1.0, 2.0}, {0.0, 0.0}}, 0.1);
    EXPECT_EQ(c.net.size(), 0u);
    EXPECT_EQ(eval_network(c.net, 0.5), 0.0);
}

TEST(Compile1D, RejectsBadDelta) {
    const PiecewiseConstant1D t{{0.0, 1.0, 1.3, 3.0}, {1.0, 2.0, 3.0}};
    try {
        compile_1d(t, 0.2);
        FAIL();
    } catch (const PreconditionError& e) {
        ASSERT_TRUE(e.interval().has_value());
        EXPECT_EQ(*e.interval(), 1u);
        EXPECT_NE(std::string(e.what()).find("interval 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(compile_1d(t, 0.0), PreconditionError);
    EXPECT_THROW(compile_1d(t, -1.0), PreconditionError);
}

TEST(Compile1D, RejectsMalformedTarget) {
    EXPECT_THROW(compile_1d({{0.0}, {}}, 0.1), PreconditionError);
    EXPECT_THROW(compile_1d({{0.0, 1.0}, {1.0, 2.0}}, 0.1), PreconditionError);
    EXPECT_THROW(compile_1d({{1.0, 0.0}, {1.0}}, 0.1), PreconditionError);
}

TEST(Compile1D, NegativeValues) {
    const PiecewiseConstant1D t{{0.0, 1.0, 2.0}, {-2.0, -0.5}};
    const auto c = compile_1d(t, 0.1);
    EXPECT_NEAR(eval_network(c.net, 0.5), -2.0, 1e-9);
    EXPECT_NEAR(eval_network(c.net, 1.5), -0.5, 1e-9);
    EXPECT_NEAR(eval_network(c.net, 2.5), 0.0, 1e-9);
}

TEST(Compile1D, BreakpointsCoverStructuralKinks) {
    const PiecewiseConstant1D t{{0.0, 1.0, 2.0}, {1.0, 0.5}};
    const double delta = 0.125;
    const auto c = compile_1d(t, delta);
    const auto& bp = c.trace.breakpoints;
    for (double x : {0.0, 0.125, 0.875, 1.0, 1.125, 1.875, 2.0}) {
        EXPECT_TRUE(std::any_of(bp.begin(), bp.end(), [&](double b) { return std::abs(b - x) < 1e-12; }))
            << "missing breakpoint " << x;
    }
    EXPECT_TRUE(std::is_sorted(bp.begin(), bp.end()));
}

// Properties over random targets.

TEST(Properties, MatchesAnalyticConstruction) {
    std::mt19937_64 gen(31);
    for (int trial = 0; trial < 30; ++trial) {
        const auto t = oracle::random_target_1d(gen, 1 + static_cast<std::size_t>(trial % 8));
        const double delta = 0.1 * t.min_width();
        const auto c = compile_1d(t, delta);
        EXPECT_EQ(c.net.size(), 4 * t.cells() + 4);
        std::uniform_real_distribution<double> x(t.lo() - 1.0, t.hi() + 1.0);
        for (int i = 0; i < 300; ++i) {
            const double p = x(gen);
            EXPECT_NEAR(eval_network(c.net, p), oracle::compiled_1d(t, delta, p), 1e-8) << p;
        }
    }
}

TEST(Properties, TrapezoidStagesMatchClosedForm) {
    std::mt19937_64 gen(32);
    const auto t = oracle::random_target_1d(gen, 6);
    const double delta = 0.1 * t.min_width();
    const auto c = compile_1d(t, delta);
    const double H = t.h_inf();
    for (std::size_t m = 0; m <= t.cells(); ++m) {
        const auto net = c.trace.net.prefix(c.trace.find(StageKind::Trapezoid, m)->blocks);
        for (double p : detail::linspace(t.lo() - 1.0, t.knots[m] + 0.5, 500)) {
            const double ref = oracle::trapezoid(t, H, delta, m, p);
            EXPECT_NEAR(eval_network(net, p), ref, 1e-9 * (1.0 + std::abs(ref))) << "m=" << m << " x=" << p;
        }
    }
}

TEST(Properties, StageConditionsHold) {
    std::mt19937_64 gen(33);
    for (int trial = 0; trial < 10; ++trial) {
        const auto t = oracle::random_target_1d(gen, 1 + static_cast<std::size_t>(trial));
        const auto c = compile_1d(t, 0.1 * t.min_width());
        const auto report = check_conditions_1d(c.trace, t, 200);
        EXPECT_TRUE(report.passed()) << report.to_table();
    }
}

TEST(Properties, FinalBounds) {
    std::mt19937_64 gen(34);
    for (int trial = 0; trial < 10; ++trial) {
        const auto t = oracle::random_target_1d(gen, 5);
        const double delta = 0.2 * t.min_width();
        const auto c = compile_1d(t, delta);
        const auto report = check_final_1d(c.net, t, delta, 300);
        EXPECT_TRUE(report.passed()) << report.to_table();
    }
}
