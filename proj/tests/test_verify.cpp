#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "resnet_synth/compiler1d.hpp"
#include "resnet_synth/verify.hpp"

using namespace resnet_synth;

namespace {

const PiecewiseConstant1D kUnit{{0.0, 1.0}, {1.0}};

ResNet with_weight(const ResNet& net, std::size_t block, int field, double delta) {
    auto b = net.block(block);
    if (field == 0) b.u[0] += delta;
    else if (field == 1) b.bias += delta;
    else b.v[0] += delta;
    return net.with_block(block, b);
}

}  // namespace

TEST(ExactL1, WorkedExample) {
    const auto c = compile_1d(kUnit, 0.25);
    const double l1 = exact_l1_error_1d(c.net, c.trace, kUnit);
    // the ramps reach 1 at delta/2, so two triangles of base 0.125 and height 1
    EXPECT_NEAR(l1, 2 * 0.5 * 0.125 * 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(l1_bound_1d(kUnit, 0.25), 1.0);
}

TEST(ExactL1, ZeroTargetZeroNet) {
    const PiecewiseConstant1D zero{{0.0, 1.0}, {0.0}};
    const auto c = compile_1d(zero, 0.25);
    EXPECT_EQ(exact_l1_error_1d(c.net, c.trace, zero), 0.0);
}

TEST(ExactL1, AgreesWithQuadrature) {
    std::mt19937_64 gen(51);
    for (int trial = 0; trial < 5; ++trial) {
        const auto t = oracle::random_target_1d(gen, 4);
        const double delta = 0.1 * t.min_width();
        const auto c = compile_1d(t, delta);
        const double exact = exact_l1_error_1d(c.net, c.trace, t);
        // off the delta-windows around knots the closed form is exact, so only the windows contribute
        double quad = 0.0;
        for (double a : t.knots)
            quad += oracle::midpoint_integral(
                [&](double x) { return std::abs(oracle::compiled_1d(t, delta, x) - t(x)); }, a - delta, a + delta,
                400000);
        EXPECT_NEAR(exact, quad, 1e-6 * (1.0 + quad));
        EXPECT_LE(exact, l1_bound_1d(t, delta));
    }
}

TEST(ExactL1, MissingBreakpointDetected) {
    const auto c = compile_1d(kUnit, 0.25);
    const std::vector<double> coarse{0.0, 1.0};
    EXPECT_THROW(exact_l1_error_1d(c.net, coarse, kUnit), Error);
}

TEST(ExactL1, RequiresBoundedSupport) {
    const ResNet id(1);
    EXPECT_THROW(exact_l1_error_1d(id, std::vector<double>{0.0, 1.0}, kUnit), Error);
}

TEST(ExactL1, AdditiveUnderRefinement) {
    std::mt19937_64 gen(52);
    const auto t = oracle::random_target_1d(gen, 6);
    const auto c = compile_1d(t, 0.1 * t.min_width());
    const double base = exact_l1_error_1d(c.net, c.trace, t);
    auto fine = c.trace.breakpoints;
    for (std::size_t i = 0; i + 1 < c.trace.breakpoints.size(); ++i)
        fine.push_back(0.5 * (c.trace.breakpoints[i] + c.trace.breakpoints[i + 1]));
    std::sort(fine.begin(), fine.end());
    EXPECT_NEAR(exact_l1_error_1d(c.net, fine, t), base, 1e-12);
}

TEST(ExactL1, PushforwardMatchesBreakpointSum) {
    std::mt19937_64 gen(56);
    for (std::size_t M = 1; M <= 10; ++M) {
        const auto t = oracle::random_target_1d(gen, M);
        const auto c = compile_1d(t, 0.1 * t.min_width());
        const double by_pieces = exact_l1_error_1d(c.net, std::span<const double>(c.trace.breakpoints), t);
        EXPECT_NEAR(exact_l1_error_1d(c.net, t), by_pieces, 1e-9 * (1.0 + by_pieces)) << "M=" << M;
    }
}

TEST(ExactL1, PushforwardAtEnumerationCap) {
    std::mt19937_64 gen(57);
    const auto t = oracle::random_target_1d(gen, kMaxEnumeratedCells);
    const auto c = compile_1d(t, 0.1 * t.min_width());
    ASSERT_FALSE(c.trace.breakpoints.empty());
    const double by_pieces = exact_l1_error_1d(c.net, std::span<const double>(c.trace.breakpoints), t);
    EXPECT_NEAR(exact_l1_error_1d(c.net, t), by_pieces, 1e-8 * (1.0 + by_pieces));
    const auto big = oracle::random_target_1d(gen, kMaxEnumeratedCells + 1);
    EXPECT_TRUE(compile_1d(big, 0.1 * big.min_width()).trace.breakpoints.empty());
}

TEST(ExactL1, PushforwardConservesMass) {
    const auto c = compile_1d({{0.0, 1.0, 2.0, 2.5}, {1.0, -2.0, 0.5}}, 0.05);
    std::vector<detail::MassPiece> mu{{0.0, 2.5, 2.5}};
    for (const auto& b : c.net.blocks()) mu = detail::push_block(mu, b);
    double total = 0.0;
    for (const auto& p : mu) total += p.mass;
    EXPECT_NEAR(total, 2.5, 1e-12);
}

TEST(MonteCarlo, RejectsSmallSamples) {
    const auto c = compile_1d(kUnit, 0.25);
    EXPECT_THROW(mc_l1_error(c.net, PiecewiseConstantND::from_1d(kUnit), {{0.0, 1.0}}, 50, 1), PreconditionError);
}

TEST(MonteCarlo, SelfComparisonIsZero) {
    const auto c = compile_1d(kUnit, 1e-6);
    const auto est = mc_l1_error(c.net, PiecewiseConstantND::from_1d(kUnit), {{-0.5, 1.5}}, 20000, 3);
    EXPECT_LE(est.estimate, 3.0 * est.std_error + 1e-5);
}

TEST(MonteCarlo, AgreesWithExactIn1D) {
    std::mt19937_64 gen(53);
    for (int trial = 0; trial < 10; ++trial) {
        const auto t = oracle::random_target_1d(gen, 3);
        const double delta = 0.2 * t.min_width();
        const auto c = compile_1d(t, delta);
        const double exact = exact_l1_error_1d(c.net, c.trace, t);
        const auto est = mc_l1_error(c.net, PiecewiseConstantND::from_1d(t), {{t.lo(), t.hi()}}, 40000,
                                     static_cast<std::uint64_t>(trial));
        EXPECT_LE(std::abs(est.estimate - exact), 3.0 * est.std_error + 1e-12);
    }
}

TEST(MonteCarlo, UnbiasedOverSeeds) {
    const PiecewiseConstant1D t{{0.0, 1.0, 1.5}, {1.0, -0.5}};
    const auto c = compile_1d(t, 0.2);
    const double exact = exact_l1_error_1d(c.net, c.trace, t);
    double mean = 0.0, se = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto est = mc_l1_error(c.net, PiecewiseConstantND::from_1d(t), {{0.0, 1.5}}, 4000, s);
        mean += est.estimate / 50.0;
        se += est.std_error / 50.0;
    }
    EXPECT_LE(std::abs(mean - exact), 3.0 * se / std::sqrt(50.0));
}

TEST(MonteCarlo, WorkerCountDoesNotChangeResult) {
    const auto c = compile_1d(kUnit, 0.25);
    const auto t = PiecewiseConstantND::from_1d(kUnit);
    const auto a = mc_l1_error(c.net, t, {{0.0, 1.0}}, 50000, 9, 1);
    const auto b = mc_l1_error(c.net, t, {{0.0, 1.0}}, 50000, 9, 4);
    EXPECT_EQ(a.estimate, b.estimate);
    EXPECT_EQ(a.std_error, b.std_error);
}

TEST(MonteCarlo, UnitSquareEnvelope) {
    PiecewiseConstantND sq{{{0.0, 1.0}, {0.0, 1.0}}, {1.0}};
    const auto c = compile_nd(sq, 0.1);
    const auto est = mc_l1_error(c.net, sq, sq.support(), 100000, 4);
    EXPECT_LE(est.estimate, 8 * 0.1 + 3.0 * est.std_error);
    EXPECT_LE(est.estimate, l1_envelope_nd(sq, 0.1) + 3.0 * est.std_error);
}

TEST(Lipschitz, Examples) {
    EXPECT_EQ(lipschitz_bound(ResNet(1)), 1.0);
    EXPECT_EQ(lipschitz_bound(ResNet(1, {{{1.0}, 0.0, {1.0}}}, {1.0}, 0.0)), 2.0);
}

TEST(Lipschitz, BoundsEmpiricalSlopes) {
    const auto c = compile_1d({{0.0, 1.0, 2.0}, {1.0, -1.0}}, 0.2);
    const double K = lipschitz_bound(c.net);
    std::mt19937_64 gen(54);
    std::uniform_real_distribution<double> x(-1.0, 3.0);
    for (int i = 0; i < 10000; ++i) {
        const double a = x(gen), b = x(gen);
        if (a == b) continue;
        EXPECT_LE(std::abs(eval_network(c.net, a) - eval_network(c.net, b)) / std::abs(a - b), K);
    }
}

TEST(Conditions, CompiledTargetPasses) {
    std::mt19937_64 gen(55);
    const auto t = oracle::random_target_1d(gen, 7);
    const auto c = compile_1d(t, 0.1 * t.min_width());
    const auto r = check_conditions_1d(c.trace, t);
    EXPECT_TRUE(r.passed()) << r.to_table();
    EXPECT_TRUE(r.l1_error.has_value());
    const auto j = r.to_json();
    EXPECT_EQ(j["checks"].size(), r.checks.size());
    EXPECT_TRUE(j["passed"].get<bool>());
}

TEST(Conditions, EmptyTraceEmptyReport) {
    const ConstructionTrace empty;
    const auto r = check_conditions_1d(empty, kUnit);
    EXPECT_TRUE(r.checks.empty());
    EXPECT_TRUE(r.passed());
}

TEST(Conditions, PerturbedWeightFails) {
    const PiecewiseConstant1D t{{-1.0, 0.5, 1.25, 2.0}, {1.0, -0.5, 0.75}};
    const auto c = compile_1d(t, 0.1);
    for (std::size_t b : {2u, 5u, 9u, 13u}) {
        auto trace = c.trace;
        trace.net = with_weight(c.net, b, 1, 0.1);
        trace.breakpoints = detail::clip_breakpoints(network_breakpoints(trace.net, t.lo()), t.knots);
        EXPECT_FALSE(check_conditions_1d(trace, t, 200).passed()) << "block " << b;
    }
}

TEST(FinalChecks, DetectWrongPlateau) {
    const auto c = compile_1d(kUnit, 0.25);
    const PiecewiseConstant1D other{{0.0, 1.0}, {0.5}};
    EXPECT_FALSE(check_final_1d(c.net, other, 0.25).passed());
    EXPECT_TRUE(check_final_1d(c.net, kUnit, 0.25).passed());
}
