#ifndef RESNET_SYNTH_COMPILER1D_HPP
#define RESNET_SYNTH_COMPILER1D_HPP

// One-dimensional construction.
//
// Given h = sum_k h_k 1[a_{k-1}, a_k) and 0 < 2*delta < min_k (a_k - a_{k-1}),
// the network is built in three phases, all on a single coordinate R:
//
//   init        R_0: 0 on (-inf, a_0], slope -H/delta on [a_0, inf)       3 blocks
//   induction   R_m -> R_{m+1}: flip the tail, fold at the midpoint of
//               [a_m, a_{m+1}], cut the peak at (m+2)H                    3 blocks each
//   tail        R_M^* = max{R_M, 0}                                        1 block
//   adjustment  R_{k-1}^* = R_k^* + ((h_k - (k+1)H)/H) [R_k^* - kH]_+,
//               k = M..1                                                   1 block each
//
// with H = max_k |h_k|. R_M^* is the increasing trapezoid: (k+1)H on the
// delta-interior I_k^delta = [a_{k-1}+delta, a_k-delta]. Each adjustment only
// touches the level set {kH < R <= (k+1)H}, so R_0^* = h_k on every I_k^delta,
// vanishes outside (a_0, a_M) and is bounded by H. Total 4M + 4 blocks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "resnet_synth/blockops.hpp"
#include "resnet_synth/core.hpp"
#include "resnet_synth/piecewise_linear.hpp"

namespace resnet_synth {

/// h(x) = values[k] on [knots[k], knots[k+1]), zero elsewhere.
struct PiecewiseConstant1D {
    std::vector<double> knots;
    std::vector<double> values;

    std::size_t cells() const noexcept { return values.size(); }

    double h_inf() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }

    double min_width() const {
        double w = INFINITY;
        for (std::size_t k = 1; k < knots.size(); ++k) w = std::min(w, knots[k] - knots[k - 1]);
        return w;
    }

    double lo() const { return knots.front(); }
    double hi() const { return knots.back(); }

    double operator()(double x) const {
        if (!(x >= knots.front() && x < knots.back())) return 0.0;
        const auto it = std::upper_bound(knots.begin(), knots.end(), x);
        return values[static_cast<std::size_t>(it - knots.begin()) - 1];
    }

    void validate() const {
        if (values.empty()) throw PreconditionError("target has no cells");
        if (knots.size() != values.size() + 1) {
            throw PreconditionError("target needs " + std::to_string(values.size() + 1) +
                                    " knots for " + std::to_string(values.size()) +
                                    " values, got " + std::to_string(knots.size()));
        }
        for (std::size_t k = 0; k < knots.size(); ++k) {
            if (!std::isfinite(knots[k])) throw PreconditionError("non-finite knot", k);
            if (k && !(knots[k] > knots[k - 1])) {
                throw PreconditionError("knots not strictly increasing at interval " +
                                            std::to_string(k),
                                        k - 1);
            }
        }
        for (std::size_t k = 0; k < values.size(); ++k) {
            if (!std::isfinite(values[k])) throw PreconditionError("non-finite value", k);
        }
    }
};

/// Where a checkpoint sits in the construction.
enum class StageKind {
    Trapezoid,  ///< R_m after init (m = 0) or induction step m
    Adjusted,   ///< R_k^* (k = M is the tail-removed R_M^*)
    Grid,       ///< d-dimensional recursion checkpoints
};

struct Checkpoint {
    std::string label;
    StageKind kind = StageKind::Trapezoid;
    std::size_t index = 0;   ///< m for Trapezoid, k for Adjusted, recursion level for Grid
    std::size_t blocks = 0;  ///< prefix length of the final network
};

/// Intermediate networks are prefixes of the final one, so a checkpoint stores
/// only its block count. `stage_net(i)` materializes it.
struct ConstructionTrace {
    double delta = 0.0;
    double h_inf = 0.0;
    ResNet net;
    std::vector<Checkpoint> checkpoints;
    /// Slope changes inside [a_0, a_M]. Their count roughly doubles with every
    /// cell, so they are only enumerated up to kMaxEnumeratedCells cells.
    std::vector<double> breakpoints;

    ResNet stage_net(std::size_t i) const { return net.prefix(checkpoints.at(i).blocks); }

    const Checkpoint* find(StageKind kind, std::size_t index) const {
        for (const auto& c : checkpoints)
            if (c.kind == kind && c.index == index) return &c;
        return nullptr;
    }
};

struct Compiled {
    ResNet net;
    ConstructionTrace trace;
};

/// R_0 from the identity: max{x, a_0}, shift by -a_0, then R - ((H+delta)/delta)[R]_+.
inline std::array<ResidualBlock, 3> init_blocks(double a0, double h_inf, double delta,
                                                std::size_t dim = 1, std::size_t coord = 0) {
    if (!(h_inf > 0.0)) throw PreconditionError("init_blocks: ||h||_inf must be positive");
    if (!(delta > 0.0)) throw PreconditionError("init_blocks: delta must be positive");
    return {max_const_block(a0, coord, dim), shift_block(-a0, coord, dim),
            affine_relu_block(1.0, 0.0, -(h_inf + delta) / delta, coord, dim)};
}

/// R_m -> R_{m+1} on [a_m, a_{m+1}].
inline std::array<ResidualBlock, 3> induction_step(std::size_t m, double a_m, double a_m1,
                                                   double h_inf, double delta,
                                                   std::size_t dim = 1, std::size_t coord = 0) {
    if (!(2.0 * delta < a_m1 - a_m)) {
        throw PreconditionError("delta=" + std::to_string(delta) + " violates 2*delta < width of interval " +
                                    std::to_string(m + 1),
                                m);
    }
    const double mp1 = static_cast<double>(m + 1);
    const double mp2 = static_cast<double>(m + 2);
    return {
        // (a) R + (2 + 1/(m+1)) [-R]_+ flips the negative tail.
        affine_relu_block(-1.0, 0.0, 2.0 + 1.0 / mp1, coord, dim),
        // (b) R - 2 [R - (m+2)H (a_{m+1}-a_m)/(2 delta)]_+ folds at the midpoint.
        affine_relu_block(1.0, -mp2 * h_inf * (a_m1 - a_m) / (2.0 * delta), -2.0, coord, dim),
        // (c) min{R, (m+2)H} cuts the peak.
        min_const_block(mp2 * h_inf, coord, dim),
    };
}

/// R_M^* = max{R_M, 0}.
inline ResidualBlock tail_removal(std::size_t dim = 1, std::size_t coord = 0) {
    return max_const_block(0.0, coord, dim);
}

/// R_{k-1}^* = R_k^* + ((h_k - (k+1)H)/H) [R_k^* - kH]_+.
inline ResidualBlock adjustment_step(std::size_t k, double h_k, double h_inf,
                                     std::size_t dim = 1, std::size_t coord = 0) {
    if (!(h_inf > 0.0)) throw PreconditionError("adjustment_step: ||h||_inf must be positive");
    const double kd = static_cast<double>(k);
    return affine_relu_block(1.0, -kd * h_inf, (h_k - (kd + 1.0) * h_inf) / h_inf, coord, dim);
}

/// Rejects delta unless 0 < 2*delta < every cell width; names the first bad interval.
inline void check_delta(const std::vector<double>& knots, double delta, std::size_t axis = 0,
                        bool name_axis = false) {
    if (!(delta > 0.0) || !std::isfinite(delta)) {
        throw PreconditionError("delta must be a positive finite number");
    }
    for (std::size_t k = 1; k < knots.size(); ++k) {
        if (!(2.0 * delta < knots[k] - knots[k - 1])) {
            std::string msg = "delta=" + std::to_string(delta) + " too large: 2*delta must be < width " +
                              std::to_string(knots[k] - knots[k - 1]) + " of interval " +
                              std::to_string(k) + " [" + std::to_string(knots[k - 1]) + ", " +
                              std::to_string(knots[k]) + ")";
            if (name_axis) msg += " on axis " + std::to_string(axis);
            throw PreconditionError(msg, k - 1);
        }
    }
}

namespace detail {

inline std::vector<double> clip_breakpoints(std::vector<double> xs, const std::vector<double>& knots) {
    const double lo = knots.front(), hi = knots.back();
    std::vector<double> out(knots);
    for (double x : xs)
        if (x > lo && x < hi) out.push_back(x);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace detail

inline constexpr std::size_t kMaxEnumeratedCells = 12;

/// Compiles a 1-D piecewise-constant target into a width-1 network with
/// 4M + 4 blocks. An all-zero target yields an empty network with a zero
/// read-out.
inline Compiled compile_1d(const PiecewiseConstant1D& target, double delta) {
    target.validate();
    check_delta(target.knots, delta);
    const std::size_t M = target.cells();
    const double H = target.h_inf();

    ConstructionTrace trace;
    trace.delta = delta;
    trace.h_inf = H;
    if (H == 0.0) {
        trace.net = ResNet(1, {}, {0.0}, 0.0);
        trace.breakpoints = target.knots;
        return {trace.net, trace};
    }

    std::vector<ResidualBlock> blocks;
    blocks.reserve(4 * M + 4);
    const auto mark = [&](std::string label, StageKind kind, std::size_t index) {
        trace.checkpoints.push_back({std::move(label), kind, index, blocks.size()});
    };

    for (auto& b : init_blocks(target.knots[0], H, delta)) blocks.push_back(std::move(b));
    mark("R_0", StageKind::Trapezoid, 0);
    for (std::size_t m = 0; m < M; ++m) {
        for (auto& b : induction_step(m, target.knots[m], target.knots[m + 1], H, delta))
            blocks.push_back(std::move(b));
        mark("R_" + std::to_string(m + 1), StageKind::Trapezoid, m + 1);
    }
    blocks.push_back(tail_removal());
    mark("R*_" + std::to_string(M), StageKind::Adjusted, M);
    for (std::size_t k = M; k >= 1; --k) {
        blocks.push_back(adjustment_step(k, target.values[k - 1], H));
        mark("R*_" + std::to_string(k - 1), StageKind::Adjusted, k - 1);
    }

    trace.net = ResNet(1, std::move(blocks), {1.0}, 0.0);
    if (M <= kMaxEnumeratedCells)
        trace.breakpoints =
            detail::clip_breakpoints(network_breakpoints(trace.net, target.knots[0]), target.knots);
    return {trace.net, trace};
}

}  // namespace resnet_synth

#endif  // RESNET_SYNTH_COMPILER1D_HPP
