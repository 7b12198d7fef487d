#ifndef RESNET_SYNTH_COMPILERND_HPP
#define RESNET_SYNTH_COMPILERND_HPP

// d-dimensional construction by recursion on the leading axis.
//
// A cell is J_i x K_l with J_i the i-th interval of axis 0 and K_l the l-th
// cell of the remaining axes (l = 1 + row-major index). With H = ||h||_inf:
//
//   R_{d-1}  full compilation of the (d-1)-dim target with value (l+1)H on
//            K_l, embedded on coordinates 1..d-1 (value in coordinate 1)
//   R_1      1-D compilation on coordinate 0 with value
//            (M_{2:d} + 1 + i/(M_1+1))H on J_i
//   couple   x_1 <- max{x_1, 0};  x_0 <- x_0 + [x_1]_+
//   cut      x_0 <- max{x_0, T} - T,  T = (M_{2:d} + 2)H
//
// The result is a grid indicator: (l + i/(M_1+1))H on J_i^delta x K_l^delta,
// zero outside the support, all cell levels distinct. The adjustment pass then
// visits cells from the highest level down and rescales each level set to the
// target value.
//
// Coordinate k ends up holding the running value of the sub-network built on
// axes k..d-1; the raw input x_k is consumed by that sub-network.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resnet_synth/blockops.hpp"
#include "resnet_synth/compiler1d.hpp"
#include "resnet_synth/core.hpp"

namespace resnet_synth {

/// Piecewise-constant function on a product grid. `cell_values` is row-major
/// with the last axis varying fastest.
struct PiecewiseConstantND {
    std::vector<std::vector<double>> axis_knots;
    std::vector<double> cell_values;

    std::size_t dims() const noexcept { return axis_knots.size(); }
    std::size_t axis_cells(std::size_t axis) const { return axis_knots.at(axis).size() - 1; }

    std::size_t cell_count() const {
        std::size_t n = 1;
        for (const auto& k : axis_knots) n *= k.size() - 1;
        return n;
    }

    double h_inf() const {
        double m = 0.0;
        for (double v : cell_values) m = std::max(m, std::abs(v));
        return m;
    }

    double min_width() const {
        double w = INFINITY;
        for (const auto& k : axis_knots)
            for (std::size_t j = 1; j < k.size(); ++j) w = std::min(w, k[j] - k[j - 1]);
        return w;
    }

    /// Multi-index (0-based per axis) of a flat cell index.
    std::vector<std::size_t> unflatten(std::size_t flat) const {
        std::vector<std::size_t> idx(dims());
        for (std::size_t a = dims(); a-- > 0;) {
            idx[a] = flat % axis_cells(a);
            flat /= axis_cells(a);
        }
        return idx;
    }

    std::size_t flatten(std::span<const std::size_t> idx) const {
        std::size_t flat = 0;
        for (std::size_t a = 0; a < dims(); ++a) flat = flat * axis_cells(a) + idx[a];
        return flat;
    }

    /// Cell containing x (half-open cells), or nothing when x is outside the support.
    std::optional<std::size_t> locate(std::span<const double> x) const {
        std::size_t flat = 0;
        for (std::size_t a = 0; a < dims(); ++a) {
            const auto& k = axis_knots[a];
            if (!(x[a] >= k.front() && x[a] < k.back())) return std::nullopt;
            const auto it = std::upper_bound(k.begin(), k.end(), x[a]);
            flat = flat * axis_cells(a) + (static_cast<std::size_t>(it - k.begin()) - 1);
        }
        return flat;
    }

    double operator()(std::span<const double> x) const {
        if (x.size() != dims()) throw DimensionError("target evaluated at wrong width");
        const auto c = locate(x);
        return c ? cell_values[*c] : 0.0;
    }

    void validate() const {
        if (axis_knots.empty()) throw PreconditionError("target has no axes");
        for (std::size_t a = 0; a < dims(); ++a) {
            const auto& k = axis_knots[a];
            if (k.size() < 2) {
                throw PreconditionError("axis " + std::to_string(a) + " needs at least one cell");
            }
            for (std::size_t j = 0; j < k.size(); ++j) {
                if (!std::isfinite(k[j])) throw PreconditionError("non-finite knot on axis " + std::to_string(a), j);
                if (j && !(k[j] > k[j - 1])) {
                    throw PreconditionError("knots on axis " + std::to_string(a) +
                                                " not strictly increasing at interval " +
                                                std::to_string(j),
                                            j - 1);
                }
            }
        }
        if (cell_values.size() != cell_count()) {
            throw PreconditionError("expected " + std::to_string(cell_count()) +
                                    " cell values, got " + std::to_string(cell_values.size()));
        }
        for (double v : cell_values)
            if (!std::isfinite(v)) throw PreconditionError("non-finite cell value");
    }

    /// Box of the support.
    std::vector<std::pair<double, double>> support() const {
        std::vector<std::pair<double, double>> box;
        for (const auto& k : axis_knots) box.emplace_back(k.front(), k.back());
        return box;
    }

    static PiecewiseConstantND from_1d(const PiecewiseConstant1D& t) { return {{t.knots}, t.values}; }
};

/// Level structure of a compiled grid indicator.
struct GridIndicatorSpec {
    double delta = 0.0;
    double h_inf = 0.0;
    std::vector<double> level_values;  ///< per flat cell index
    double threshold = 0.0;            ///< cut level T before the shift; 0 for d = 1
    std::size_t pre_cut_blocks = 0;    ///< prefix length ending right after the coupling block
};

struct CompiledGrid {
    ResNet net;
    GridIndicatorSpec spec;
    std::vector<Checkpoint> checkpoints;
};

namespace detail {

inline PiecewiseConstantND sub_target(const PiecewiseConstantND& t, double scale) {
    PiecewiseConstantND sub;
    sub.axis_knots.assign(t.axis_knots.begin() + 1, t.axis_knots.end());
    sub.cell_values.resize(sub.cell_count());
    for (std::size_t l = 0; l < sub.cell_values.size(); ++l)
        sub.cell_values[l] = static_cast<double>(l + 2) * scale;
    return sub;
}

inline void append_blocks(std::vector<ResidualBlock>& dst, const ResNet& src) {
    dst.insert(dst.end(), src.blocks().begin(), src.blocks().end());
}

}  // namespace detail

inline Compiled compile_nd(const PiecewiseConstantND& target, double delta);

/// Grid indicator on the product grid of `axis_knots` with base level h_inf > 0.
inline CompiledGrid compile_grid_indicator(const std::vector<std::vector<double>>& axis_knots,
                                           double h_inf, double delta) {
    if (!(h_inf > 0.0)) throw PreconditionError("grid indicator needs ||h||_inf > 0");
    if (axis_knots.empty()) throw PreconditionError("grid indicator needs at least one axis");
    for (std::size_t a = 0; a < axis_knots.size(); ++a)
        check_delta(axis_knots[a], delta, a, axis_knots.size() > 1);

    const std::size_t d = axis_knots.size();
    const std::size_t m1 = axis_knots[0].size() - 1;
    CompiledGrid out;
    out.spec.delta = delta;
    out.spec.h_inf = h_inf;

    if (d == 1) {
        // Increasing trapezoid R_M^*: level (k+1)H on cell k (1-based).
        PiecewiseConstant1D t{axis_knots[0], std::vector<double>(m1, h_inf)};
        const auto c = compile_1d(t, delta);
        const auto* top = c.trace.find(StageKind::Adjusted, m1);
        out.net = c.net.prefix(top->blocks);
        for (std::size_t k = 0; k < m1; ++k)
            out.spec.level_values.push_back(static_cast<double>(k + 2) * h_inf);
        out.spec.threshold = 0.0;
        out.spec.pre_cut_blocks = out.net.size();
        out.checkpoints.push_back({"grid d=1", StageKind::Grid, 1, out.net.size()});
        return out;
    }

    PiecewiseConstantND shape{axis_knots, {}};
    const auto sub = detail::sub_target(shape, h_inf);
    const std::size_t m_rest = sub.cell_count();
    const double m_rest_d = static_cast<double>(m_rest);

    std::vector<ResidualBlock> blocks;

    // R_{d-1} on coordinates 1..d-1.
    const auto r_sub = compile_nd(sub, delta);
    detail::append_blocks(blocks, extend_dimension(r_sub.net, d, 1));
    out.checkpoints.push_back({"R_{d-1} (axes 1.." + std::to_string(d - 1) + ")", StageKind::Grid,
                               d - 1, blocks.size()});

    // R_1 on coordinate 0.
    PiecewiseConstant1D first{axis_knots[0], {}};
    for (std::size_t i = 1; i <= m1; ++i)
        first.values.push_back((m_rest_d + 1.0 + static_cast<double>(i) / static_cast<double>(m1 + 1)) * h_inf);
    const auto r_first = compile_1d(first, delta);
    detail::append_blocks(blocks, extend_dimension(r_first.net, d, 0));
    out.checkpoints.push_back({"R_1 (axis 0)", StageKind::Grid, d, blocks.size()});

    const double cut = (m_rest_d + 2.0) * h_inf;
    blocks.push_back(max_const_block(0.0, 1, d));
    blocks.push_back(add_relu_block(1, 0, d));
    out.spec.pre_cut_blocks = blocks.size();
    out.checkpoints.push_back({"coupled", StageKind::Grid, d, blocks.size()});
    blocks.push_back(max_const_block(cut, 0, d));
    blocks.push_back(shift_block(-cut, 0, d));
    out.checkpoints.push_back({"grid indicator d=" + std::to_string(d), StageKind::Grid, d,
                               blocks.size()});

    out.net = ResNet(d, std::move(blocks), detail::unit(0, d), 0.0);
    out.spec.threshold = cut;
    out.spec.level_values.resize(m1 * m_rest);
    for (std::size_t i = 1; i <= m1; ++i)
        for (std::size_t l = 1; l <= m_rest; ++l)
            out.spec.level_values[(i - 1) * m_rest + (l - 1)] =
                (static_cast<double>(l) + static_cast<double>(i) / static_cast<double>(m1 + 1)) * h_inf;
    return out;
}

/// Appends one level-set adjustment block per cell, highest level first.
/// Cell j with level g_j and next lower level t_j (||h||_inf for the lowest)
/// gets R + ((h_j - g_j)/(g_j - t_j)) [R - t_j]_+.
inline ResNet adjust_cells(const ResNet& indicator, const GridIndicatorSpec& spec,
                           const PiecewiseConstantND& target) {
    const auto& g = spec.level_values;
    if (g.size() != target.cell_values.size()) {
        throw PreconditionError("adjust_cells: level count does not match cell count");
    }
    std::vector<std::size_t> order(g.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return g[a] > g[b]; });
    const double H = spec.h_inf;
    for (std::size_t j = 0; j < order.size(); ++j) {
        if (j + 1 < order.size() && !(g[order[j]] > g[order[j + 1]])) {
            throw PreconditionError("adjust_cells: level values not distinct", order[j]);
        }
    }
    if (!order.empty() && !(g[order.back()] > H)) {
        throw PreconditionError("adjust_cells: lowest level must exceed ||h||_inf");
    }
    if (target.h_inf() > H) throw PreconditionError("adjust_cells: target exceeds indicator base level");

    const std::size_t d = indicator.dim();
    std::vector<ResidualBlock> blocks;
    blocks.reserve(order.size());
    for (std::size_t j = 0; j < order.size(); ++j) {
        const std::size_t cell = order[j];
        const double level = g[cell];
        const double below = j + 1 < order.size() ? g[order[j + 1]] : H;
        blocks.push_back(affine_relu_block(1.0, -below,
                                           (target.cell_values[cell] - level) / (level - below), 0, d));
    }
    return compose(indicator, blocks);
}

/// Compiles a d-dimensional target; d = 1 delegates to compile_1d.
inline Compiled compile_nd(const PiecewiseConstantND& target, double delta) {
    target.validate();
    if (target.dims() == 1) {
        return compile_1d(PiecewiseConstant1D{target.axis_knots[0], target.cell_values}, delta);
    }
    for (std::size_t a = 0; a < target.dims(); ++a) check_delta(target.axis_knots[a], delta, a, true);

    const std::size_t d = target.dims();
    const double H = target.h_inf();
    ConstructionTrace trace;
    trace.delta = delta;
    trace.h_inf = H;
    if (H == 0.0) {
        trace.net = ResNet(d, {}, std::vector<double>(d, 0.0), 0.0);
        return {trace.net, trace};
    }

    auto grid = compile_grid_indicator(target.axis_knots, H, delta);
    trace.checkpoints = grid.checkpoints;
    trace.net = adjust_cells(grid.net, grid.spec, target);
    trace.checkpoints.push_back({"adjusted", StageKind::Adjusted, 0, trace.net.size()});
    return {trace.net, trace};
}

inline std::size_t compiled_block_count(std::span<const std::size_t> cells_per_axis) {
    if (cells_per_axis.size() == 1) return 4 * cells_per_axis[0] + 4;
    const std::size_t m1 = cells_per_axis[0];
    std::size_t rest = 1;
    for (std::size_t a = 1; a < cells_per_axis.size(); ++a) rest *= cells_per_axis[a];
    return compiled_block_count(cells_per_axis.subspan(1)) + (4 * m1 + 4) + 4 + m1 * rest;
}

/// Uniform discretization of f over an axis-aligned box: each axis is split
/// into ceil(side / r) equal cells (side <= r gives one cell) and every cell
/// takes f at its center. Coarse axes are reported through `warnings`.
template <class F>
PiecewiseConstantND discretize(F&& f, const std::vector<std::pair<double, double>>& box, double r,
                               std::vector<std::string>* warnings = nullptr) {
    if (!(r > 0.0) || !std::isfinite(r)) throw PreconditionError("discretize: resolution must be positive");
    if (box.empty()) throw PreconditionError("discretize: empty box");
    PiecewiseConstantND t;
    std::vector<std::size_t> n(box.size());
    for (std::size_t a = 0; a < box.size(); ++a) {
        const auto [lo, hi] = box[a];
        if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
            throw PreconditionError("discretize: degenerate box on axis " + std::to_string(a));
        }
        const double side = hi - lo;
        n[a] = static_cast<std::size_t>(std::max(1.0, std::ceil(side / r - 1e-12)));
        if (r > side && warnings) {
            warnings->push_back("axis " + std::to_string(a) + ": resolution " + std::to_string(r) +
                                " exceeds box side " + std::to_string(side) + "; using a single cell");
        }
        std::vector<double> k(n[a] + 1);
        for (std::size_t j = 0; j <= n[a]; ++j)
            k[j] = j == n[a] ? hi : lo + side * static_cast<double>(j) / static_cast<double>(n[a]);
        t.axis_knots.push_back(std::move(k));
    }
    t.cell_values.resize(t.cell_count());
    std::vector<double> center(box.size());
    for (std::size_t c = 0; c < t.cell_values.size(); ++c) {
        const auto idx = t.unflatten(c);
        for (std::size_t a = 0; a < box.size(); ++a)
            center[a] = 0.5 * (t.axis_knots[a][idx[a]] + t.axis_knots[a][idx[a] + 1]);
        t.cell_values[c] = f(std::span<const double>(center));
    }
    return t;
}

}  // namespace resnet_synth

#endif  // RESNET_SYNTH_COMPILERND_HPP
