#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "resnet_synth/compilernd.hpp"
#include "resnet_synth/verify.hpp"

using namespace resnet_synth;

namespace {

double at(const ResNet& net, std::vector<double> x) { return eval_network(net, x); }

/// Point in cell `idx` placed at fraction `f` of each delta-interior (f in [0, 1]).
std::vector<double> interior_point(const PiecewiseConstantND& t, const std::vector<std::size_t>& idx, double delta,
                                   const std::vector<double>& f) {
    std::vector<double> x(t.dims());
    for (std::size_t a = 0; a < t.dims(); ++a) {
        const double lo = t.axis_knots[a][idx[a]] + delta, hi = t.axis_knots[a][idx[a] + 1] - delta;
        x[a] = lo + f[a] * (hi - lo);
    }
    return x;
}

}  // namespace

TEST(GridIndicator, TwoByOneLevels) {
    const std::vector<std::vector<double>> knots{{0.0, 1.0, 2.0}, {0.0, 1.0}};
    const auto g = compile_grid_indicator(knots, 1.0, 0.1);
    EXPECT_NEAR(at(g.net, {0.5, 0.5}), 1.0 + 1.0 / 3.0, 1e-9);
    EXPECT_NEAR(at(g.net, {1.5, 0.5}), 1.0 + 2.0 / 3.0, 1e-9);
    EXPECT_NEAR(g.spec.level_values[0], oracle::grid_level(1, 1, 2, 1.0), 1e-15);
    EXPECT_NEAR(at(g.net, {3.0, 0.5}), 0.0, 1e-9);
    EXPECT_NEAR(at(g.net, {0.5, -2.0}), 0.0, 1e-9);
}

TEST(GridIndicator, LevelsPairwiseSeparated) {
    const std::vector<std::vector<double>> knots{{0.0, 1.0, 2.0, 3.0}, {0.0, 0.5, 1.5}};
    const double H = 2.0;
    const auto g = compile_grid_indicator(knots, H, 0.1);
    const auto& lv = g.spec.level_values;
    for (std::size_t i = 0; i < lv.size(); ++i)
        for (std::size_t j = i + 1; j < lv.size(); ++j)
            EXPECT_GE(std::abs(lv[i] - lv[j]), H / 4.0 - 1e-12);
}

TEST(GridIndicator, OneDimensionIsIncreasingTrapezoid) {
    const std::vector<std::vector<double>> knots{{0.0, 1.0, 2.5}};
    const auto g = compile_grid_indicator(knots, 1.0, 0.2);
    EXPECT_EQ(g.net.size(), 3u + 6u + 1u);
    EXPECT_NEAR(at(g.net, {0.5}), 2.0, 1e-12);
    EXPECT_NEAR(at(g.net, {1.7}), 3.0, 1e-12);
    EXPECT_NEAR(at(g.net, {-1.0}), 0.0, 1e-12);
}

TEST(GridIndicator, RejectsDeltaOnAnyAxis) {
    const std::vector<std::vector<double>> knots{{0.0, 1.0}, {0.0, 0.3, 1.0}};
    try {
        compile_grid_indicator(knots, 1.0, 0.2);
        FAIL();
    } catch (const PreconditionError& e) {
        EXPECT_NE(std::string(e.what()).find("axis 1"), std::string::npos) << e.what();
        EXPECT_EQ(e.interval(), std::optional<std::size_t>(0));
    }
}

TEST(AdjustCells, OneBlockPerCell) {
    PiecewiseConstantND t{{{0.0, 1.0, 2.0, 3.0}, {0.0, 1.0, 2.0}}, {1, -1, 2, 0.5, -2, 0}};
    const auto g = compile_grid_indicator(t.axis_knots, t.h_inf(), 0.1);
    const auto net = adjust_cells(g.net, g.spec, t);
    EXPECT_EQ(net.size() - g.net.size(), 6u);
    for (std::size_t c = 0; c < t.cell_count(); ++c) {
        EXPECT_NEAR(eval_network(net, oracle::cell_center(t, t.unflatten(c))), t.cell_values[c], 1e-9);
    }
    EXPECT_NEAR(at(net, {10.0, 10.0}), 0.0, 1e-9);
}

TEST(AdjustCells, RejectsInconsistentSpec) {
    PiecewiseConstantND t{{{0.0, 1.0}, {0.0, 1.0}}, {1.0}};
    auto g = compile_grid_indicator(t.axis_knots, 1.0, 0.1);
    auto spec = g.spec;
    spec.level_values.push_back(7.0);
    EXPECT_THROW(adjust_cells(g.net, spec, t), PreconditionError);
    PiecewiseConstantND big{{{0.0, 1.0}, {0.0, 1.0}}, {5.0}};
    EXPECT_THROW(adjust_cells(g.net, g.spec, big), PreconditionError);
}

TEST(CompileND, UnitSquare) {
    PiecewiseConstantND t{{{0.0, 1.0}, {0.0, 1.0}}, {1.0}};
    const auto c = compile_nd(t, 0.1);
    EXPECT_NEAR(at(c.net, {0.5, 0.5}), 1.0, 1e-9);
    EXPECT_NEAR(at(c.net, {2.0, 2.0}), 0.0, 1e-9);
    EXPECT_EQ(c.net.out_weights(), (std::vector<double>{1.0, 0.0}));
}

TEST(CompileND, BlockCountFormula) {
    PiecewiseConstantND t{{{0.0, 1.0, 2.0}, {0.0, 1.0, 2.0, 3.0}, {0.0, 1.0}}, std::vector<double>(6, 1.0)};
    const auto c = compile_nd(t, 0.1);
    const std::size_t cells[] = {2, 3, 1};
    EXPECT_EQ(c.net.size(), compiled_block_count(cells));
}

TEST(CompileND, ZeroTarget) {
    PiecewiseConstantND t{{{0.0, 1.0}, {0.0, 1.0}}, {0.0}};
    const auto c = compile_nd(t, 0.1);
    EXPECT_EQ(c.net.size(), 0u);
    EXPECT_EQ(at(c.net, {0.5, 0.5}), 0.0);
}

TEST(CompileND, OneDimensionMatchesCompile1D) {
    std::mt19937_64 gen(41);
    const auto t1 = oracle::random_target_1d(gen, 5);
    const double delta = 0.1 * t1.min_width();
    const auto a = compile_1d(t1, delta);
    const auto b = compile_nd(PiecewiseConstantND::from_1d(t1), delta);
    for (double x : detail::linspace(t1.lo() - 1.0, t1.hi() + 1.0, 2000))
        EXPECT_NEAR(eval_network(a.net, x), eval_network(b.net, x), 1e-9);
}

TEST(Discretize, Constant) {
    const auto t = discretize([](std::span<const double>) { return 3.0; }, {{0.0, 1.0}, {-1.0, 1.0}}, 0.3);
    for (double v : t.cell_values) EXPECT_EQ(v, 3.0);
    EXPECT_EQ(t.axis_cells(0), 4u);
    EXPECT_EQ(t.axis_cells(1), 7u);
}

TEST(Discretize, CellCenters) {
    const auto t = discretize([](std::span<const double> x) { return x[0]; }, {{0.0, 1.0}}, 0.5);
    ASSERT_EQ(t.cell_values.size(), 2u);
    EXPECT_DOUBLE_EQ(t.cell_values[0], 0.25);
    EXPECT_DOUBLE_EQ(t.cell_values[1], 0.75);
}

TEST(Discretize, CoarseResolutionWarns) {
    std::vector<std::string> warnings;
    const auto t = discretize([](std::span<const double>) { return 1.0; }, {{0.0, 1.0}}, 2.0, &warnings);
    EXPECT_EQ(t.cell_count(), 1u);
    EXPECT_EQ(warnings.size(), 1u);
    EXPECT_THROW(discretize([](std::span<const double>) { return 1.0; }, {{1.0, 0.0}}, 0.1), PreconditionError);
}

// Properties over random small targets.

TEST(Properties, CellInteriorsAndExterior) {
    std::mt19937_64 gen(42);
    std::uniform_real_distribution<double> frac(0.0, 1.0);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t d = 2 + static_cast<std::size_t>(trial % 2);
        const auto t = oracle::random_target_nd(gen, d, 3);
        const double delta = 0.1 * t.min_width();
        const auto c = compile_nd(t, delta);
        for (std::size_t cell = 0; cell < t.cell_count(); ++cell) {
            const auto idx = t.unflatten(cell);
            for (int k = 0; k < 5; ++k) {
                std::vector<double> f(d);
                for (auto& v : f) v = frac(gen);
                // double-rounded weights, amplified by the nested level gains, leave errors of a few 1e-9
                EXPECT_NEAR(eval_network(c.net, interior_point(t, idx, delta, f)), t.cell_values[cell], 1e-7);
            }
        }
        const auto box = t.support();
        for (int k = 0; k < 50; ++k) {
            std::vector<double> x(d);
            for (std::size_t a = 0; a < d; ++a) x[a] = box[a].first + frac(gen) * (box[a].second - box[a].first);
            const std::size_t axis = static_cast<std::size_t>(k) % d;
            x[axis] = (k % 2) ? box[axis].second + delta + frac(gen) : box[axis].first - delta - frac(gen);
            EXPECT_NEAR(eval_network(c.net, x), 0.0, 1e-9);
        }
    }
}

TEST(Properties, InvariantAlongConstantAxis) {
    PiecewiseConstantND t{{{0.0, 1.0, 2.0}, {-1.0, 3.0}}, {0.7, -1.3}};
    const double delta = 0.1;
    const auto c = compile_nd(t, delta);
    for (double x0 : {0.3, 1.6})
        for (double x1 : detail::linspace(-1.0 + delta, 3.0 - delta, 50))
            EXPECT_NEAR(at(c.net, {x0, x1}), at(c.net, {x0, 1.0}), 1e-9);
}

TEST(Properties, GridSeparationMargin) {
    std::mt19937_64 gen(43);
    std::uniform_real_distribution<double> frac(0.0, 1.0);
    for (int trial = 0; trial < 6; ++trial) {
        const auto t = oracle::random_target_nd(gen, 2 + static_cast<std::size_t>(trial % 2), 3);
        const double H = t.h_inf(), delta = 0.1 * t.min_width();
        const auto g = compile_grid_indicator(t.axis_knots, H, delta);
        const auto pre = g.net.prefix(g.spec.pre_cut_blocks);
        const double T = g.spec.threshold;
        const double margin = H * std::min(1.0 / static_cast<double>(t.axis_cells(0) + 1), 1.0);
        std::set<double> seen;
        for (std::size_t cell = 0; cell < t.cell_count(); ++cell) {
            EXPECT_TRUE(seen.insert(g.spec.level_values[cell]).second);
            const auto x = interior_point(t, t.unflatten(cell), delta, {frac(gen), frac(gen), frac(gen)});
            EXPECT_GE(eval_network(pre, x), T + margin - 1e-9);
        }
        const auto box = t.support();
        for (int k = 0; k < 40; ++k) {
            std::vector<double> x(t.dims());
            for (std::size_t a = 0; a < t.dims(); ++a) x[a] = box[a].first + frac(gen) * (box[a].second - box[a].first);
            x[0] = box[0].second + 0.01 + frac(gen);
            EXPECT_LE(eval_network(pre, x), T + 1e-9);
        }
    }
}
