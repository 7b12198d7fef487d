#ifndef RESNET_SYNTH_BLOCKOPS_HPP
#define RESNET_SYNTH_BLOCKOPS_HPP

// Single-block realizations of the basic operations on one coordinate R of
// the state:
//   shift        R + c
//   max/min      max{R, c}, min{R, c}
//   max/min lin  max{R, aR + b} = R + [(a-1)R + b]_+
//                min{R, aR + b} = R - [(1-a)R - b]_+
//   add relu     x_dst + [x_src]_+
// Coordinates not written by an operation have zero V entries and are left
// bit-for-bit unchanged.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "resnet_synth/core.hpp"

namespace resnet_synth {

enum class BlockKind { Shift, MaxConst, MinConst, MaxLinear, MinLinear, AddRelu };

struct BlockSpec {
    BlockKind kind = BlockKind::Shift;
    double c = 0.0;      ///< Shift / MaxConst / MinConst
    double alpha = 0.0;  ///< MaxLinear / MinLinear
    double beta = 0.0;
    std::size_t src_coord = 0;
    std::size_t dst_coord = 0;  ///< equals src_coord except for AddRelu
    std::size_t dim = 1;
};

namespace detail {

inline void check_coord(std::size_t coord, std::size_t dim, const char* op) {
    if (dim == 0) throw DimensionError(std::string(op) + ": width must be positive");
    if (coord >= dim) {
        throw DimensionError(std::string(op) + ": coordinate " + std::to_string(coord) +
                             " out of range for width " + std::to_string(dim));
    }
}

inline void check_finite(double x, const char* op) {
    if (!std::isfinite(x)) throw Error(std::string(op) + ": non-finite parameter");
}

inline std::vector<double> unit(std::size_t coord, std::size_t dim, double scale = 1.0) {
    std::vector<double> e(dim, 0.0);
    e[coord] = scale;
    return e;
}

}  // namespace detail

/// R + out_gain * [in_gain * R + bias]_+ on coordinate `coord`. Every
/// single-coordinate block has this shape; the named operations below fix
/// the three scalars.
inline ResidualBlock affine_relu_block(double in_gain, double bias, double out_gain,
                                       std::size_t coord, std::size_t dim) {
    detail::check_coord(coord, dim, "affine_relu_block");
    detail::check_finite(in_gain, "affine_relu_block");
    detail::check_finite(bias, "affine_relu_block");
    detail::check_finite(out_gain, "affine_relu_block");
    return {detail::unit(coord, dim, in_gain), bias, detail::unit(coord, dim, out_gain)};
}

/// R + c, realized with U = 0 and u = 1 so that relu(u) = 1 scales V = c e.
inline ResidualBlock shift_block(double c, std::size_t coord, std::size_t dim) {
    detail::check_coord(coord, dim, "shift_block");
    detail::check_finite(c, "shift_block");
    return {std::vector<double>(dim, 0.0), 1.0, detail::unit(coord, dim, c)};
}

inline ResidualBlock max_linear_block(double alpha, double beta, std::size_t coord,
                                      std::size_t dim) {
    return affine_relu_block(alpha - 1.0, beta, 1.0, coord, dim);
}

inline ResidualBlock min_linear_block(double alpha, double beta, std::size_t coord,
                                      std::size_t dim) {
    return affine_relu_block(1.0 - alpha, -beta, -1.0, coord, dim);
}

inline ResidualBlock max_const_block(double c, std::size_t coord, std::size_t dim) {
    return max_linear_block(0.0, c, coord, dim);
}

inline ResidualBlock min_const_block(double c, std::size_t coord, std::size_t dim) {
    return min_linear_block(0.0, c, coord, dim);
}

/// x_dst += [x_src]_+; src must differ from dst.
inline ResidualBlock add_relu_block(std::size_t src, std::size_t dst, std::size_t dim) {
    detail::check_coord(src, dim, "add_relu_block");
    detail::check_coord(dst, dim, "add_relu_block");
    if (src == dst) throw Error("add_relu_block: source and destination coincide");
    return {detail::unit(src, dim), 0.0, detail::unit(dst, dim)};
}

inline ResidualBlock make_block(const BlockSpec& s) {
    switch (s.kind) {
        case BlockKind::Shift: return shift_block(s.c, s.src_coord, s.dim);
        case BlockKind::MaxConst: return max_const_block(s.c, s.src_coord, s.dim);
        case BlockKind::MinConst: return min_const_block(s.c, s.src_coord, s.dim);
        case BlockKind::MaxLinear: return max_linear_block(s.alpha, s.beta, s.src_coord, s.dim);
        case BlockKind::MinLinear: return min_linear_block(s.alpha, s.beta, s.src_coord, s.dim);
        case BlockKind::AddRelu: return add_relu_block(s.src_coord, s.dst_coord, s.dim);
    }
    throw Error("make_block: unknown kind");
}

/// Blocks acting on the read-out value w . x + b of a network instead of a
/// single coordinate: V is chosen along w with w . V = +-1. Requires w != 0.
namespace readout {

inline std::vector<double> direction(const std::vector<double>& w, double sign) {
    double n2 = 0.0;
    for (double wi : w) n2 += wi * wi;
    if (n2 == 0.0) throw Error("read-out weights are zero");
    std::vector<double> v(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) v[i] = sign * w[i] / n2;
    return v;
}

/// f -> max{f, c} where f = w . x + b.
inline ResidualBlock max_const(const std::vector<double>& w, double b, double c) {
    std::vector<double> u(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) u[i] = -w[i];
    return {std::move(u), c - b, direction(w, 1.0)};
}

/// f -> min{f, c} where f = w . x + b.
inline ResidualBlock min_const(const std::vector<double>& w, double b, double c) {
    return {w, b - c, direction(w, -1.0)};
}

}  // namespace readout

}  // namespace resnet_synth

#endif  // RESNET_SYNTH_BLOCKOPS_HPP
