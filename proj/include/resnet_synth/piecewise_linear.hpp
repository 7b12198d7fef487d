#ifndef RESNET_SYNTH_PIECEWISE_LINEAR_HPP
#define RESNET_SYNTH_PIECEWISE_LINEAR_HPP

#include <algorithm>
#include <cstddef>
#include <vector>

#include "resnet_synth/core.hpp"

namespace resnet_synth {

/// Continuous piecewise-linear function on R, stored as knots with values and
/// the slopes of the two unbounded rays. Pushing it through a width-1 residual
/// block is exact: new knots appear only where the block's ReLU argument
/// changes sign, and those roots are solved on the linear pieces.
class PiecewiseLinear {
public:
    /// The identity x -> x, anchored at `anchor`.
    static PiecewiseLinear identity(double anchor) {
        PiecewiseLinear f;
        f.xs_ = {anchor};
        f.ys_ = {anchor};
        f.slope_left_ = 1.0;
        f.slope_right_ = 1.0;
        return f;
    }

    const std::vector<double>& knots() const noexcept { return xs_; }
    const std::vector<double>& values() const noexcept { return ys_; }
    double slope_left() const noexcept { return slope_left_; }
    double slope_right() const noexcept { return slope_right_; }

    double operator()(double x) const {
        if (x <= xs_.front()) return ys_.front() + slope_left_ * (x - xs_.front());
        if (x >= xs_.back()) return ys_.back() + slope_right_ * (x - xs_.back());
        const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
        const double t = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
        return ys_[i] + t * (ys_[i + 1] - ys_[i]);
    }

    /// y -> y + out_gain * [in_gain * y + bias]_+.
    void apply(double in_gain, double bias, double out_gain) {
        if (in_gain == 0.0) {
            // Constant activation: a pure shift.
            const double a = relu(bias);
            for (double& y : ys_) y += out_gain * a;
            return;
        }
        const double level = -bias / in_gain;
        const auto z = [&](double y) { return in_gain * y + bias; };

        std::vector<double> nx, ny;
        nx.reserve(xs_.size() + 4);
        ny.reserve(xs_.size() + 4);

        // Left ray root.
        if (const double g = in_gain * slope_left_; g != 0.0) {
            const double xr = xs_.front() - z(ys_.front()) / g;
            if (xr < xs_.front()) {
                nx.push_back(xr);
                ny.push_back(level);
            }
        }
        for (std::size_t i = 0; i < xs_.size(); ++i) {
            nx.push_back(xs_[i]);
            ny.push_back(ys_[i]);
            if (i + 1 == xs_.size()) break;
            const double z0 = z(ys_[i]), z1 = z(ys_[i + 1]);
            if ((z0 < 0.0 && z1 > 0.0) || (z0 > 0.0 && z1 < 0.0)) {
                const double xr = xs_[i] + (xs_[i + 1] - xs_[i]) * (z0 / (z0 - z1));
                if (xr > xs_[i] && xr < xs_[i + 1]) {
                    nx.push_back(xr);
                    ny.push_back(level);
                }
            }
        }
        if (const double g = in_gain * slope_right_; g != 0.0) {
            const double xr = xs_.back() - z(ys_.back()) / g;
            if (xr > xs_.back()) {
                nx.push_back(xr);
                ny.push_back(level);
            }
        }

        const bool left_active = z(ny.front()) - in_gain * slope_left_ > 0.0;
        const bool right_active = z(ny.back()) + in_gain * slope_right_ > 0.0;
        for (double& y : ny) y += out_gain * relu(z(y));
        if (left_active) slope_left_ += out_gain * in_gain * slope_left_;
        if (right_active) slope_right_ += out_gain * in_gain * slope_right_;
        xs_ = std::move(nx);
        ys_ = std::move(ny);
    }

    /// Applies a width-1 block.
    void apply(const ResidualBlock& b) {
        if (b.dim() != 1) throw DimensionError("PiecewiseLinear::apply: block width must be 1");
        apply(b.u[0], b.bias, b.v[0]);
    }

    /// Applies the scalar read-out w*y + b.
    void apply_affine(double scale, double offset) {
        for (double& y : ys_) y = scale * y + offset;
        slope_left_ *= scale;
        slope_right_ *= scale;
    }

private:
    std::vector<double> xs_, ys_;
    double slope_left_ = 0.0;
    double slope_right_ = 0.0;
};

/// Exact piecewise-linear form of a width-1 network (blocks and read-out).
inline PiecewiseLinear symbolic_network(const ResNet& net, double anchor = 0.0) {
    if (net.dim() != 1) throw DimensionError("symbolic_network: width-1 networks only");
    auto f = PiecewiseLinear::identity(anchor);
    for (const auto& b : net.blocks()) f.apply(b);
    f.apply_affine(net.out_weights()[0], net.out_bias());
    return f;
}

/// Slope-change abscissae of a width-1 network, sorted and deduplicated.
inline std::vector<double> network_breakpoints(const ResNet& net, double anchor = 0.0) {
    auto xs = symbolic_network(net, anchor).knots();
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

}  // namespace resnet_synth

#endif  // RESNET_SYNTH_PIECEWISE_LINEAR_HPP
