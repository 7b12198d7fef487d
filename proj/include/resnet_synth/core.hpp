#ifndef RESNET_SYNTH_CORE_HPP
#define RESNET_SYNTH_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "resnet_synth/error.hpp"

namespace resnet_synth {

/// Running state passed between residual blocks. Its length is the network width d.
using State = std::vector<double>;

inline double relu(double z) { return z > 0.0 ? z : 0.0; }

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// One-neuron residual block x -> x + v * relu(u . x + bias).
struct ResidualBlock {
    std::vector<double> u;  ///< row map U (1 x d)
    double bias = 0.0;      ///< scalar bias u
    std::vector<double> v;  ///< column map V (d x 1)

    std::size_t dim() const noexcept { return u.size(); }

    /// Pre-activation u . x + bias.
    double activation(std::span<const double> x) const { return dot(u, x) + bias; }

    /// In-place update; no dimension checks.
    void apply(std::span<double> x) const {
        const double a = relu(activation(x));
        if (a == 0.0) return;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += v[i] * a;
    }

    friend bool operator==(const ResidualBlock&, const ResidualBlock&) = default;
};

namespace detail {

inline bool all_finite(std::span<const double> xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

inline void check_block(const ResidualBlock& b, std::size_t dim, std::size_t index) {
    const auto where = [&] { return "block " + std::to_string(index); };
    if (b.u.size() != dim || b.v.size() != dim) {
        throw DimensionError(where() + ": expected width " + std::to_string(dim) + ", got u=" +
                             std::to_string(b.u.size()) + " v=" + std::to_string(b.v.size()));
    }
    if (!all_finite(b.u) || !all_finite(b.v) || !std::isfinite(b.bias)) {
        throw Error(where() + ": non-finite weight");
    }
}

}  // namespace detail

/// L o (Id + T_N) o ... o (Id + T_0) with a scalar linear read-out
/// L(x) = out_weights . x + out_bias.
///
/// Instances are validated on construction and never mutated afterwards;
/// the `with_*` members return modified copies.
class ResNet {
public:
    ResNet() = default;

    /// Identity network of width `dim` reading out coordinate `read_coord`.
    explicit ResNet(std::size_t dim, std::size_t read_coord = 0)
        : dim_(dim), out_weights_(dim, 0.0) {
        if (dim == 0) throw DimensionError("network width must be positive");
        if (read_coord >= dim) throw DimensionError("read-out coordinate out of range");
        out_weights_[read_coord] = 1.0;
    }

    ResNet(std::size_t dim, std::vector<ResidualBlock> blocks, std::vector<double> out_weights,
           double out_bias)
        : dim_(dim), blocks_(std::move(blocks)), out_weights_(std::move(out_weights)),
          out_bias_(out_bias) {
        if (dim_ == 0) throw DimensionError("network width must be positive");
        for (std::size_t i = 0; i < blocks_.size(); ++i) detail::check_block(blocks_[i], dim_, i);
        if (out_weights_.size() != dim_) {
            throw DimensionError("output weights: expected width " + std::to_string(dim_) +
                                 ", got " + std::to_string(out_weights_.size()));
        }
        if (!detail::all_finite(out_weights_) || !std::isfinite(out_bias_)) {
            throw Error("output layer: non-finite weight");
        }
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return blocks_.size(); }
    const std::vector<ResidualBlock>& blocks() const noexcept { return blocks_; }
    const ResidualBlock& block(std::size_t i) const { return blocks_.at(i); }
    const std::vector<double>& out_weights() const noexcept { return out_weights_; }
    double out_bias() const noexcept { return out_bias_; }

    /// Runs the first `count` blocks on `x` in place.
    void propagate(std::span<double> x, std::size_t count) const {
        for (std::size_t i = 0; i < count; ++i) blocks_[i].apply(x);
    }

    double read_out(std::span<const double> x) const { return dot(out_weights_, x) + out_bias_; }

    /// Network truncated to its first `count` blocks, same read-out.
    ResNet prefix(std::size_t count) const {
        if (count > blocks_.size()) throw Error("prefix longer than network");
        return ResNet(dim_,
                      std::vector<ResidualBlock>(blocks_.begin(),
                                                 blocks_.begin() + static_cast<std::ptrdiff_t>(count)),
                      out_weights_, out_bias_);
    }

    ResNet with_block(std::size_t i, ResidualBlock b) const {
        auto blocks = blocks_;
        blocks.at(i) = std::move(b);
        return ResNet(dim_, std::move(blocks), out_weights_, out_bias_);
    }

    ResNet with_output(std::vector<double> w, double b) const {
        return ResNet(dim_, blocks_, std::move(w), b);
    }

    friend bool operator==(const ResNet&, const ResNet&) = default;

private:
    std::size_t dim_ = 1;
    std::vector<ResidualBlock> blocks_;
    std::vector<double> out_weights_ = {1.0};
    double out_bias_ = 0.0;
};

/// x + v * relu(u . x + bias); `x` is not modified.
inline State eval_block(const ResidualBlock& block, std::span<const double> x) {
    if (block.dim() != x.size() || block.v.size() != x.size()) {
        throw DimensionError("eval_block: block width " + std::to_string(block.dim()) +
                             " vs state width " + std::to_string(x.size()));
    }
    State y(x.begin(), x.end());
    block.apply(y);
    return y;
}

/// Final state after all blocks (before the read-out).
inline State eval_state(const ResNet& net, std::span<const double> x) {
    if (x.size() != net.dim()) {
        throw DimensionError("eval: network width " + std::to_string(net.dim()) +
                             " vs input width " + std::to_string(x.size()));
    }
    State s(x.begin(), x.end());
    net.propagate(s, net.size());
    return s;
}

inline double eval_network(const ResNet& net, std::span<const double> x) {
    return net.read_out(eval_state(net, x));
}

inline double eval_network(const ResNet& net, double x) {
    const double in[1] = {x};
    return eval_network(net, std::span<const double>(in, 1));
}

/// prefix.blocks ++ suffix, keeping the prefix read-out.
inline ResNet compose(const ResNet& prefix, std::span<const ResidualBlock> suffix) {
    auto blocks = prefix.blocks();
    blocks.insert(blocks.end(), suffix.begin(), suffix.end());
    return ResNet(prefix.dim(), std::move(blocks), prefix.out_weights(), prefix.out_bias());
}

/// prefix.blocks ++ suffix with an explicit read-out.
inline ResNet compose(const ResNet& prefix, std::span<const ResidualBlock> suffix,
                      std::vector<double> out_weights, double out_bias) {
    auto blocks = prefix.blocks();
    blocks.insert(blocks.end(), suffix.begin(), suffix.end());
    return ResNet(prefix.dim(), std::move(blocks), std::move(out_weights), out_bias);
}

/// Embeds a width-k network into width `dim`, its coordinates occupying
/// [coord_offset, coord_offset + k). Weights on the other coordinates are zero,
/// so those coordinates pass through the identity unchanged.
inline ResNet extend_dimension(const ResNet& net, std::size_t dim, std::size_t coord_offset) {
    if (coord_offset + net.dim() > dim) {
        throw DimensionError("extend_dimension: offset " + std::to_string(coord_offset) +
                             " + width " + std::to_string(net.dim()) + " exceeds " +
                             std::to_string(dim));
    }
    const auto pad = [&](const std::vector<double>& w) {
        std::vector<double> out(dim, 0.0);
        std::copy(w.begin(), w.end(), out.begin() + static_cast<std::ptrdiff_t>(coord_offset));
        return out;
    };
    std::vector<ResidualBlock> blocks;
    blocks.reserve(net.size());
    for (const auto& b : net.blocks()) blocks.push_back({pad(b.u), b.bias, pad(b.v)});
    return ResNet(dim, std::move(blocks), pad(net.out_weights()), net.out_bias());
}

}  // namespace resnet_synth

#endif  // RESNET_SYNTH_CORE_HPP
