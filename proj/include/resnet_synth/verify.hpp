#ifndef RESNET_SYNTH_VERIFY_HPP
#define RESNET_SYNTH_VERIFY_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "resnet_synth/compiler1d.hpp"
#include "resnet_synth/compilernd.hpp"
#include "resnet_synth/core.hpp"
#include "resnet_synth/parallel.hpp"

namespace resnet_synth {

/// Outcome of one named check. `measured` is the worst observed quantity and
/// `threshold` the bound it was compared against.
struct CheckResult {
    std::string name;
    bool passed = true;
    double measured = 0.0;
    double threshold = 0.0;
    std::optional<double> worst_at;  ///< abscissa of the worst violation (1-D)
};

struct VerificationReport {
    std::vector<CheckResult> checks;
    std::optional<double> l1_error;
    std::optional<double> l1_bound;
    std::optional<double> mc_stderr;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }

    std::size_t failures() const {
        return static_cast<std::size_t>(
            std::count_if(checks.begin(), checks.end(), [](const auto& c) { return !c.passed; }));
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["passed"] = passed();
        j["checks"] = nlohmann::json::array();
        for (const auto& c : checks) {
            nlohmann::json r{{"name", c.name},
                             {"passed", c.passed},
                             {"measured", c.measured},
                             {"threshold", c.threshold}};
            r["worst_at"] = c.worst_at ? nlohmann::json(*c.worst_at) : nlohmann::json(nullptr);
            j["checks"].push_back(std::move(r));
        }
        const auto opt = [](const std::optional<double>& v) {
            return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
        };
        j["l1_error"] = opt(l1_error);
        j["l1_bound"] = opt(l1_bound);
        j["mc_stderr"] = opt(mc_stderr);
        return j;
    }

    std::string to_table() const {
        std::string out;
        char line[256];
        std::snprintf(line, sizeof line, "%-36s %-6s %-14s %-14s %s\n", "check", "result",
                      "measured", "threshold", "worst_at");
        out += line;
        for (const auto& c : checks) {
            std::snprintf(line, sizeof line, "%-36s %-6s %-14.6g %-14.6g %s\n", c.name.c_str(),
                          c.passed ? "PASS" : "FAIL", c.measured, c.threshold,
                          c.worst_at ? std::to_string(*c.worst_at).c_str() : "-");
            out += line;
        }
        return out;
    }
};

/// Accumulates the worst violation of |value - expected| <= tolerance.
class Deviation {
public:
    explicit Deviation(std::string name) : name_(std::move(name)) {}

    /// Records excess = deviation - tolerance at x (passes while excess <= 0).
    void observe(double deviation, double tolerance, double x) {
        const double excess = deviation - tolerance;
        if (!seen_ || excess > worst_excess_ || std::isnan(deviation)) {
            seen_ = true;
            worst_excess_ = std::isnan(deviation) ? INFINITY : excess;
            worst_dev_ = deviation;
            worst_tol_ = tolerance;
            worst_x_ = x;
        }
    }

    CheckResult result() const {
        if (!seen_) return {name_, true, 0.0, 0.0, std::nullopt};
        return {name_, worst_excess_ <= 0.0, worst_dev_, worst_tol_, worst_x_};
    }

private:
    std::string name_;
    bool seen_ = false;
    double worst_excess_ = -INFINITY;
    double worst_dev_ = 0.0;
    double worst_tol_ = 0.0;
    double worst_x_ = 0.0;
};

/// Integrates |R - h| exactly over the breakpoint partition. Between
/// consecutive breakpoints both functions are affine, so |R - h| has at most
/// one zero crossing per interval, solved in closed form. Each interval is
/// checked for linearity at its midpoint first; a missing breakpoint raises
/// an Error naming the interval.
inline double exact_l1_error_1d(const ResNet& net, std::span<const double> breakpoints,
                                const PiecewiseConstant1D& target, double tol = 1e-9) {
    if (net.dim() != 1) throw DimensionError("exact_l1_error_1d: width-1 networks only");
    std::vector<double> xs(breakpoints.begin(), breakpoints.end());
    xs.insert(xs.end(), target.knots.begin(), target.knots.end());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    const auto R = [&](double x) { return eval_network(net, x); };
    const double span = xs.back() - xs.front();
    for (double x : {xs.front() - span - 1.0, xs.back() + span + 1.0}) {
        if (std::abs(R(x)) > tol) {
            throw Error("network does not vanish outside the breakpoint range (R(" +
                        std::to_string(x) + ") = " + std::to_string(R(x)) + ")");
        }
    }

    double total = 0.0;
    double r0 = R(xs.front());
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double x0 = xs[i], x1 = xs[i + 1];
        const double r1 = R(x1);
        const double mid = 0.5 * (x0 + x1);
        const double rm = R(mid);
        // on steep pieces an ulp of x already moves R by slope * ulp
        const double slope = std::abs(r1 - r0) / (x1 - x0);
        const double noise = 1024.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(x1)) * slope;
        if (std::abs(rm - 0.5 * (r0 + r1)) > tol * (1.0 + std::abs(r0) + std::abs(r1)) + noise) {
            throw Error("missing breakpoint in interval " + std::to_string(i) + " [" +
                        std::to_string(x0) + ", " + std::to_string(x1) + "]: midpoint " +
                        std::to_string(rm) + " vs chord " + std::to_string(0.5 * (r0 + r1)));
        }
        const double h = target(mid);
        const double e0 = r0 - h, e1 = r1 - h;
        const double w = x1 - x0;
        if ((e0 >= 0.0 && e1 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0)) {
            total += 0.5 * w * (std::abs(e0) + std::abs(e1));
        } else {
            total += 0.5 * w * (e0 * e0 + e1 * e1) / (std::abs(e0) + std::abs(e1));
        }
        r0 = r1;
    }
    return total;
}

namespace detail {

/// A finite measure on the line as uniform pieces: mass spread evenly over
/// [lo, hi], or a point mass when lo == hi.
struct MassPiece {
    double lo, hi, mass;
};

/// Merges overlapping uniform pieces into disjoint ones. Point masses at the
/// same abscissa are summed.
inline std::vector<MassPiece> consolidate(const std::vector<MassPiece>& in) {
    std::vector<double> cuts;
    std::vector<MassPiece> atoms;
    for (const auto& p : in) {
        if (p.mass <= 0.0) continue;
        if (p.hi > p.lo) {
            cuts.push_back(p.lo);
            cuts.push_back(p.hi);
        } else {
            atoms.push_back(p);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    // Each piece hands its mass to the elementary intervals it covers in
    // proportion to their width. A running density would cancel badly next to
    // near-atoms whose density is ~1/ulp.
    std::vector<double> mass(cuts.size(), 0.0);
    for (const auto& p : in) {
        if (p.mass <= 0.0 || !(p.hi > p.lo)) continue;
        const auto first = static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), p.lo) - cuts.begin());
        const auto last = static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), p.hi) - cuts.begin());
        if (last == first + 1) {
            mass[first] += p.mass;
            continue;
        }
        const double dens = p.mass / (p.hi - p.lo);
        for (std::size_t k = first; k < last; ++k) mass[k] += dens * (cuts[k + 1] - cuts[k]);
    }
    std::vector<MassPiece> out;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        if (mass[k] > 0.0) out.push_back({cuts[k], cuts[k + 1], mass[k]});
    std::sort(atoms.begin(), atoms.end(), [](const MassPiece& a, const MassPiece& b) { return a.lo < b.lo; });
    for (const auto& a : atoms) {
        if (!out.empty() && out.back().hi == out.back().lo && out.back().lo == a.lo) out.back().mass += a.mass;
        else out.push_back(a);
    }
    return out;
}

/// Image of the measure under the scalar block t -> t + v relu(u t + b).
inline std::vector<MassPiece> push_block(const std::vector<MassPiece>& in, const ResidualBlock& blk) {
    const double u = blk.u[0], b = blk.bias, v = blk.v[0];
    const auto f = [&](double t) { return t + v * relu(u * t + b); };
    std::vector<MassPiece> out;
    out.reserve(in.size() + 1);
    const auto emit = [&](double lo, double hi, double mass) {
        const double a = f(lo), c = f(hi);
        out.push_back({std::min(a, c), std::max(a, c), mass});
    };
    const double kink = u != 0.0 ? -b / u : INFINITY;
    for (const auto& p : in) {
        if (p.lo < kink && kink < p.hi) {
            const double left = p.mass * (kink - p.lo) / (p.hi - p.lo);
            emit(p.lo, kink, left);
            emit(kink, p.hi, p.mass - left);
        } else {
            emit(p.lo, p.hi, p.mass);
        }
    }
    return consolidate(out);
}

/// Integral of |y - c| against a uniform piece.
inline double abs_moment(const MassPiece& p, double c) {
    const double mid = 0.5 * (p.lo + p.hi);
    if (c <= p.lo) return p.mass * (mid - c);
    if (c >= p.hi) return p.mass * (c - mid);
    const double a = c - p.lo, z = p.hi - c;
    return p.mass * (a * a + z * z) / (2.0 * (p.hi - p.lo));
}

/// Integral of |net(x) - c| over [lo, hi] by pushing Lebesgue measure through
/// the blocks. Every block acts on the line as a two-piece affine map, so the
/// image measure stays a finite union of uniform pieces.
inline double pushforward_abs_integral(const ResNet& net, double lo, double hi, double c) {
    if (!(hi > lo)) return 0.0;
    std::vector<MassPiece> mu{{lo, hi, hi - lo}};
    for (const auto& blk : net.blocks()) mu = push_block(mu, blk);
    const double w = net.out_weights()[0], b0 = net.out_bias();
    double total = 0.0;
    for (const auto& p : mu) {
        const double a = w * p.lo + b0, z = w * p.hi + b0;
        total += abs_moment({std::min(a, z), std::max(a, z), p.mass}, c);
    }
    return total;
}

}  // namespace detail

/// Exact L1 error without breakpoints: on each cell (and on windows of width
/// a_M - a_0 either side, where the target is 0) the image of Lebesgue measure
/// is pushed through the network. Cost grows with the number of distinct
/// values the state takes at kinks, not with the number of linear pieces.
inline double exact_l1_error_1d(const ResNet& net, const PiecewiseConstant1D& target, double tol = 1e-9) {
    if (net.dim() != 1) throw DimensionError("exact_l1_error_1d: width-1 networks only");
    const double lo = target.lo(), hi = target.hi(), W = hi - lo;
    for (double x : {lo - W, hi + W}) {
        if (std::abs(eval_network(net, x)) > tol)
            throw Error("network does not vanish outside the integration window (R(" + std::to_string(x) +
                        ") = " + std::to_string(eval_network(net, x)) + ")");
    }
    double total = detail::pushforward_abs_integral(net, lo - W, lo, 0.0) +
                   detail::pushforward_abs_integral(net, hi, hi + W, 0.0);
    for (std::size_t k = 0; k < target.cells(); ++k)
        total += detail::pushforward_abs_integral(net, target.knots[k], target.knots[k + 1], target.values[k]);
    return total;
}

inline double exact_l1_error_1d(const ResNet& net, const ConstructionTrace&, const PiecewiseConstant1D& target,
                                double tol = 1e-9) {
    return exact_l1_error_1d(net, target, tol);
}

/// 4 M delta ||h||_inf.
inline double l1_bound_1d(const PiecewiseConstant1D& target, double delta) {
    return 4.0 * static_cast<double>(target.cells()) * delta * target.h_inf();
}

/// Volume of the support minus the delta-interiors of all cells; |R - h| <=
/// 2||h||_inf there and vanishes elsewhere.
inline double tolerant_volume(const PiecewiseConstantND& target, double delta) {
    double support = 1.0, interior = 1.0;
    for (const auto& k : target.axis_knots) {
        support *= k.back() - k.front();
        double inner = 0.0;
        for (std::size_t j = 1; j < k.size(); ++j) inner += std::max(0.0, k[j] - k[j - 1] - 2.0 * delta);
        interior *= inner;
    }
    return support - interior;
}

inline double l1_envelope_nd(const PiecewiseConstantND& target, double delta) {
    return 2.0 * target.h_inf() * tolerant_volume(target, delta);
}

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

using Box = std::vector<std::pair<double, double>>;

/// Uniform Monte-Carlo estimate of the integral of |f - g| over `box`.
/// Sample i, coordinate a uses CounterRng(seed).uniform(i * d + a); partial
/// sums are merged in chunk order, so the result is independent of the
/// worker count.
template <class F, class G>
    requires std::invocable<F&, std::span<const double>> && std::invocable<G&, std::span<const double>>
McEstimate mc_l1_error(F&& f, G&& g, const Box& box, std::size_t n, std::uint64_t seed,
                       std::size_t workers = 0) {
    if (n < 100) throw PreconditionError("mc_l1_error: need at least 100 samples");
    const std::size_t d = box.size();
    double vol = 1.0;
    for (const auto& [lo, hi] : box) vol *= hi - lo;

    constexpr std::size_t chunk = 4096;
    const std::size_t chunks = (n + chunk - 1) / chunk;
    std::vector<double> sums(chunks, 0.0), sq(chunks, 0.0);
    const CounterRng rng{seed};
    parallel_chunks(
        chunks,
        [&](std::size_t c) {
            std::vector<double> x(d);
            double s = 0.0, s2 = 0.0;
            const std::size_t end = std::min(n, (c + 1) * chunk);
            for (std::size_t i = c * chunk; i < end; ++i) {
                for (std::size_t a = 0; a < d; ++a) {
                    const double u = rng.uniform(static_cast<std::uint64_t>(i * d + a));
                    x[a] = box[a].first + u * (box[a].second - box[a].first);
                }
                const std::span<const double> xs(x);
                const double e = std::abs(f(xs) - g(xs));
                s += e;
                s2 += e * e;
            }
            sums[c] = s;
            sq[c] = s2;
        },
        workers);
    double s = 0.0, s2 = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
        s += sums[c];
        s2 += sq[c];
    }
    const double nn = static_cast<double>(n);
    const double mean = s / nn;
    const double var = std::max(0.0, (s2 - nn * mean * mean) / (nn - 1.0));
    return {vol * mean, vol * std::sqrt(var / nn)};
}

inline McEstimate mc_l1_error(const ResNet& net, const PiecewiseConstantND& target, const Box& box,
                              std::size_t n, std::uint64_t seed, std::size_t workers = 0) {
    if (box.size() != net.dim() || target.dims() != net.dim()) {
        throw DimensionError("mc_l1_error: box/target/network widths differ");
    }
    return mc_l1_error([&](std::span<const double> x) { return eval_network(net, x); },
                       [&](std::span<const double> x) { return target(x); }, box, n, seed, workers);
}

/// prod_blocks (1 + |v|_2 |u|_2) * |w|_2, an upper bound on the Lipschitz
/// constant of the network in the Euclidean norm.
inline double lipschitz_bound(const ResNet& net) {
    const auto norm = [](const std::vector<double>& a) { return std::sqrt(dot(a, a)); };
    double k = 1.0;
    for (const auto& b : net.blocks()) k *= 1.0 + norm(b.v) * norm(b.u);
    return k * norm(net.out_weights());
}

// ---------------------------------------------------------------------------
// Stage conditions of the 1-D construction.

namespace detail {

/// Closed form of the trapezoid stage R_m (independent of any network).
inline double trapezoid_stage(const PiecewiseConstant1D& t, double H, double delta, std::size_t m,
                              double x) {
    const auto& a = t.knots;
    if (x <= a[0]) return 0.0;
    if (x >= a[m]) return -(static_cast<double>(m + 1) * H / delta) * (x - a[m]);
    const auto it = std::upper_bound(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(m) + 1, x);
    const std::size_t k = static_cast<std::size_t>(it - a.begin());  // x in I_k, 1-based
    const double top = static_cast<double>(k + 1) * H;
    const double ramp = std::min((x - a[k - 1]) / delta, (a[k] - x) / delta);
    return top * std::clamp(ramp, 0.0, 1.0);
}

/// R_k^* obtained by running the scalar adjustment recursion on the closed-form R_M^*.
inline double adjusted_stage(const PiecewiseConstant1D& t, double H, double delta, std::size_t k,
                             double x) {
    const std::size_t M = t.cells();
    double r = std::max(trapezoid_stage(t, H, delta, M, x), 0.0);
    for (std::size_t j = M; j > k; --j) {
        const double jd = static_cast<double>(j);
        r = r + ((t.values[j - 1] - (jd + 1.0) * H) / H) * relu(r - jd * H);
    }
    return r;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v;
    if (n == 0) return v;
    if (n == 1) return {0.5 * (lo + hi)};
    v.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        v.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    return v;
}

}  // namespace detail

/// Probe abscissae: a uniform grid of `per_interval` points on every cell and
/// on [a_0 - W, a_0] and [a_M, a_M + W] (W = a_M - a_0), plus every breakpoint
/// and breakpoint +- 1e-7.
inline std::vector<double> probe_points_1d(const PiecewiseConstant1D& t,
                                           std::span<const double> breakpoints,
                                           std::size_t per_interval) {
    const double W = t.hi() - t.lo();
    std::vector<double> xs = detail::linspace(t.lo() - W, t.lo(), per_interval);
    for (std::size_t k = 0; k < t.cells(); ++k) {
        const auto v = detail::linspace(t.knots[k], t.knots[k + 1], per_interval);
        xs.insert(xs.end(), v.begin(), v.end());
    }
    const auto r = detail::linspace(t.hi(), t.hi() + W, per_interval);
    xs.insert(xs.end(), r.begin(), r.end());
    for (double b : breakpoints) {
        xs.push_back(b);
        xs.push_back(b - 1e-7);
        xs.push_back(b + 1e-7);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

/// Checks every checkpoint of a 1-D construction trace against the
/// construction's stage conditions:
///
///   R_m   : C1 zero left of a_0, C2 trapezoid on I_k (k <= m), C3 plateau
///           (k+1)H on I_k^delta, C4 0 <= R_m <= (m+1)H left of a_m, C5 tail
///           slope -(m+1)H/delta right of a_m (dense and 3-point collinearity)
///   R_k^* : (a) zero outside (a_0, a_M), (b) h_j on I_j^delta for j > k,
///           (c) (j+1)H on I_j^delta for j <= k, (d) -H <= R <= (k+1)H,
///           closed form (scalar recursion), locality w.r.t. R_{k+1}^*,
///           and level-set containment I_j^delta in L_j on R_M^*
///
/// plus a midpoint-linearity check of the final network over the trace
/// breakpoints. Plateau and zero checks use the absolute tolerance `tol`;
/// checks on slopes add a rounding allowance proportional to slope * |x|.
inline VerificationReport check_conditions_1d(const ConstructionTrace& trace,
                                              const PiecewiseConstant1D& target,
                                              std::size_t probes_per_interval = 1000,
                                              double tol = 1e-9) {
    VerificationReport report;
    if (trace.checkpoints.empty()) return report;
    if (trace.net.dim() != 1) throw DimensionError("check_conditions_1d: width-1 traces only");

    const std::size_t M = target.cells();
    const double H = trace.h_inf;
    const double delta = trace.delta;
    const auto& a = target.knots;
    const auto xs = probe_points_1d(target, trace.breakpoints, probes_per_interval);
    const double scale = std::max(std::abs(target.lo()), std::abs(target.hi())) + (target.hi() - target.lo());
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const auto ramp_tol = [&](double slope) { return tol + 1024.0 * eps * std::abs(slope) * scale; };

    const auto in_interior = [&](std::size_t k, double x) {  // I_k^delta, 1-based k
        return x >= a[k - 1] + delta && x <= a[k] - delta;
    };
    const auto cell_of = [&](double x) -> std::size_t {  // 1-based cell index, 0 if outside
        if (!(x >= a.front() && x < a.back())) return 0;
        return static_cast<std::size_t>(std::upper_bound(a.begin(), a.end(), x) - a.begin());
    };

    // Evaluate all checkpoints at every probe in one sweep.
    const std::size_t S = trace.checkpoints.size();
    std::vector<std::vector<double>> values(S, std::vector<double>(xs.size()));
    for (std::size_t p = 0; p < xs.size(); ++p) {
        double state[1] = {xs[p]};
        std::size_t done = 0;
        for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t b = done; b < trace.checkpoints[s].blocks; ++b) trace.net.block(b).apply(state);
            done = trace.checkpoints[s].blocks;
            values[s][p] = trace.net.read_out(std::span<const double>(state, 1));
        }
    }

    std::vector<std::size_t> adjusted_slot(M + 1, S);
    for (std::size_t s = 0; s < S; ++s) {
        const auto& cp = trace.checkpoints[s];
        const auto& v = values[s];
        if (cp.kind == StageKind::Trapezoid) {
            const std::size_t m = cp.index;
            const double md = static_cast<double>(m);
            const double tail_slope = -(md + 1.0) * H / delta;
            Deviation c1(cp.label + " C1"), c2(cp.label + " C2"), c3(cp.label + " C3"),
                c4(cp.label + " C4"), c5(cp.label + " C5");
            for (std::size_t p = 0; p < xs.size(); ++p) {
                const double x = xs[p], r = v[p];
                if (x <= a[0]) c1.observe(std::abs(r), tol, x);
                const std::size_t k = cell_of(x);
                if (k >= 1 && k <= m) {
                    const double ref = detail::trapezoid_stage(target, H, delta, m, x);
                    c2.observe(std::abs(r - ref), ramp_tol(static_cast<double>(k + 1) * H / delta), x);
                    if (in_interior(k, x)) c3.observe(std::abs(r - static_cast<double>(k + 1) * H), tol, x);
                }
                if (x <= a[m]) {
                    const double excess = std::max(-r, r - (md + 1.0) * H);
                    c4.observe(std::max(excess, 0.0), tol, x);
                }
                if (x >= a[m]) c5.observe(std::abs(r - tail_slope * (x - a[m])), ramp_tol(tail_slope), x);
            }
            // Three collinear points on the tail.
            {
                const double x0 = a[m], x1 = a[m] + delta, x2 = a[m] + 2.0 * delta;
                const auto sv = [&](double x) {
                    double st[1] = {x};
                    trace.net.propagate(std::span<double>(st, 1), cp.blocks);
                    return trace.net.read_out(std::span<const double>(st, 1));
                };
                const double y0 = sv(x0), y1 = sv(x1), y2 = sv(x2);
                c5.observe(std::abs(y2 - 2.0 * y1 + y0), ramp_tol(tail_slope), x1);
                c5.observe(std::abs((y1 - y0) / delta - tail_slope),
                           ramp_tol(tail_slope) / delta, x0);
            }
            for (auto* c : {&c1, &c2, &c3, &c4, &c5}) report.checks.push_back(c->result());
        } else if (cp.kind == StageKind::Adjusted) {
            const std::size_t k = cp.index;
            adjusted_slot[k] = s;
            Deviation ca(cp.label + " (a)"), cb(cp.label + " (b)"), cc(cp.label + " (c)"),
                cd(cp.label + " (d)"), cf(cp.label + " closed-form");
            // every later adjustment block scales earlier rounding by |1 + w_j|
            double gain = 1.0;
            for (std::size_t j = k + 1; j <= M; ++j) {
                const double w = (target.values[j - 1] - static_cast<double>(j + 1) * H) / H;
                gain *= std::max(1.0, std::abs(1.0 + w));
            }
            const double ramp = ramp_tol(static_cast<double>(M + 1) * H / delta) * gain;
            for (std::size_t p = 0; p < xs.size(); ++p) {
                const double x = xs[p], r = v[p];
                if (x <= a.front() || x >= a.back()) ca.observe(std::abs(r), tol, x);
                const std::size_t j = cell_of(x);
                if (j >= 1 && in_interior(j, x)) {
                    if (j > k) cb.observe(std::abs(r - target.values[j - 1]), tol, x);
                    else cc.observe(std::abs(r - static_cast<double>(j + 1) * H), tol, x);
                }
                const double excess = std::max(-H - r, r - static_cast<double>(k + 1) * H);
                cd.observe(std::max(excess, 0.0), tol, x);
                cf.observe(std::abs(r - detail::adjusted_stage(target, H, delta, k, x)), ramp, x);
            }
            for (auto* c : {&ca, &cb, &cc, &cd, &cf}) report.checks.push_back(c->result());

            if (k == M) {
                Deviation ls(cp.label + " level sets");
                for (std::size_t p = 0; p < xs.size(); ++p) {
                    const std::size_t j = cell_of(xs[p]);
                    if (j >= 1 && in_interior(j, xs[p])) {
                        const double lo = static_cast<double>(j) * H, hi = static_cast<double>(j + 1) * H;
                        const double r = v[p];
                        // r <= lo is a hard failure: the lower bound of L_j is strict.
                        ls.observe(r > lo ? std::max(r - hi, 0.0) : lo - r + 2.0 * tol, tol, xs[p]);
                    }
                }
                report.checks.push_back(ls.result());
            } else if (adjusted_slot[k + 1] < S) {
                const auto& prev = values[adjusted_slot[k + 1]];
                const double level = static_cast<double>(k + 1) * H;
                Deviation loc(cp.label + " locality");
                for (std::size_t p = 0; p < xs.size(); ++p)
                    if (prev[p] <= level) loc.observe(std::abs(v[p] - prev[p]), 0.0, xs[p]);
                report.checks.push_back(loc.result());
            }
        }
    }

    if (!trace.breakpoints.empty()) {
        CheckResult lin{"breakpoint linearity", true, 0.0, 0.0, std::nullopt};
        try {
            exact_l1_error_1d(trace.net, trace.breakpoints, target, tol);
        } catch (const Error&) {
            lin.passed = false;
            lin.measured = 1.0;
        }
        report.checks.push_back(lin);
    }
    try {
        report.l1_error = exact_l1_error_1d(trace.net, target, tol);
        report.l1_bound = l1_bound_1d(target, delta);
        report.checks.push_back({"l1 <= 4 M delta ||h||", *report.l1_error <= *report.l1_bound, *report.l1_error,
                                 *report.l1_bound, std::nullopt});
    } catch (const Error&) {
        report.checks.push_back({"vanishes outside support", false, 1.0, 0.0, std::nullopt});
    }
    return report;
}

/// The three properties of the final 1-D network: zero outside [a_0, a_M),
/// h_k on every I_k^delta, bounded by ||h||_inf.
inline VerificationReport check_final_1d(const ResNet& net, const PiecewiseConstant1D& target,
                                         double delta, std::size_t probes_per_interval = 1000,
                                         double tol = 1e-9) {
    VerificationReport report;
    const double H = target.h_inf();
    Deviation zero("zero outside support"), plateau("h_k on delta-interiors"), bound("|R| <= ||h||");
    const auto xs = probe_points_1d(target, {}, probes_per_interval);
    const auto& a = target.knots;
    for (double x : xs) {
        const double r = eval_network(net, x);
        if (x < a.front() || x >= a.back()) zero.observe(std::abs(r), tol, x);
        bound.observe(std::max(std::abs(r) - H, 0.0), tol, x);
    }
    for (std::size_t k = 0; k < target.cells(); ++k) {
        for (double x : detail::linspace(a[k] + delta, a[k + 1] - delta, probes_per_interval)) {
            plateau.observe(std::abs(eval_network(net, x) - target.values[k]), tol, x);
        }
    }
    report.checks = {zero.result(), plateau.result(), bound.result()};
    return report;
}

}  // namespace resnet_synth

#endif  // RESNET_SYNTH_VERIFY_HPP
