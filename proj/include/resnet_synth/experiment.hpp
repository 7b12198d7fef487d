#ifndef RESNET_SYNTH_EXPERIMENT_HPP
#define RESNET_SYNTH_EXPERIMENT_HPP

// Unit-ball classification at desk scale: width-2 fully connected ReLU nets
// vs one-neuron ResNets on a 2-D state, trained with the logistic loss and
// SGD with momentum. Gradients are accumulated by hand for both architectures.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "resnet_synth/blockops.hpp"
#include "resnet_synth/core.hpp"
#include "resnet_synth/network_format.hpp"
#include "resnet_synth/parallel.hpp"

namespace resnet_synth {

using Point2 = std::array<double, 2>;

struct Dataset {
    std::vector<Point2> points;
    std::vector<int> labels;  ///< +1 inside the unit disk, -1 in the annulus 2 <= |z| <= 3
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return points.size(); }
};

/// n_pos points area-uniform in the unit disk, n_neg area-uniform in the
/// annulus 2 <= |z| <= 3 (radius by CDF inversion). Draws whose rounded norm
/// leaves the region are redrawn, so the radius invariants hold exactly.
inline Dataset gen_dataset(std::size_t n_pos = 100, std::size_t n_neg = 200, std::uint64_t seed = 0) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Dataset data;
    data.seed = seed;
    const auto draw = [&](double r_lo, double r_hi) {
        for (;;) {
            const double r = std::sqrt(r_lo * r_lo + (r_hi * r_hi - r_lo * r_lo) * unif(gen));
            const double th = 2.0 * std::numbers::pi * unif(gen);
            const Point2 z{r * std::cos(th), r * std::sin(th)};
            const double n = std::hypot(z[0], z[1]);
            if (n >= r_lo && n <= r_hi) return z;
        }
    };
    for (std::size_t i = 0; i < n_pos; ++i) {
        data.points.push_back(draw(0.0, 1.0));
        data.labels.push_back(1);
    }
    for (std::size_t i = 0; i < n_neg; ++i) {
        data.points.push_back(draw(2.0, 3.0));
        data.labels.push_back(-1);
    }
    return data;
}

inline nlohmann::json to_json(const Dataset& d) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : d.points) pts.push_back({p[0], p[1]});
    return {{"seed", d.seed}, {"points", pts}, {"labels", d.labels}};
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
    Dataset d;
    d.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& p : j.at("points")) d.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    d.labels = j.at("labels").get<std::vector<int>>();
    if (d.labels.size() != d.points.size()) throw Error("dataset: labels/points length mismatch");
    return d;
}

/// log(1 + exp(-margin)) without overflow.
inline double softplus_neg(double margin) {
    return margin > 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
}

/// Mean of log(1 + exp(-y_i * pred_i)).
inline double logistic_loss(std::span<const double> preds, std::span<const int> labels) {
    if (preds.size() != labels.size()) throw DimensionError("logistic_loss: length mismatch");
    if (preds.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) s += softplus_neg(labels[i] * preds[i]);
    return s / static_cast<double>(preds.size());
}

/// d loss / d pred for one sample: -y / (1 + exp(y * pred)).
inline double logistic_grad(double pred, int label) {
    const double m = label * pred;
    const double s = m > 0.0 ? std::exp(-m) / (1.0 + std::exp(-m)) : 1.0 / (1.0 + std::exp(m));
    return -label * s;
}

// ---------------------------------------------------------------------------
// Fully connected width-2 network.

struct DenseLayer {
    std::vector<double> w;  ///< rows x cols, row-major
    std::vector<double> b;  ///< rows
    std::size_t rows = 0, cols = 0;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// x -> relu(W_L ... relu(W_1 x + b_1) ... + b_L) -> out_w . h + out_b.
struct DenseNet {
    std::size_t input_dim = 2;
    std::vector<DenseLayer> layers;
    std::vector<double> out_w;
    double out_b = 0.0;

    std::size_t width() const { return layers.empty() ? input_dim : layers.back().rows; }

    friend bool operator==(const DenseNet&, const DenseNet&) = default;
};

namespace detail {

inline std::vector<double> dense_forward(const DenseLayer& l, std::span<const double> h) {
    std::vector<double> a(l.rows);
    for (std::size_t r = 0; r < l.rows; ++r) {
        double s = l.b[r];
        for (std::size_t c = 0; c < l.cols; ++c) s += l.w[r * l.cols + c] * h[c];
        a[r] = s;
    }
    return a;
}

}  // namespace detail

inline double evaluate(const DenseNet& net, std::span<const double> x) {
    if (x.size() != net.input_dim) throw DimensionError("DenseNet: input width mismatch");
    std::vector<double> h(x.begin(), x.end());
    for (const auto& l : net.layers) {
        h = detail::dense_forward(l, h);
        for (double& v : h) v = relu(v);
    }
    return dot(net.out_w, h) + net.out_b;
}

inline double evaluate(const ResNet& net, std::span<const double> x) { return eval_network(net, x); }

using Model = std::variant<DenseNet, ResNet>;

inline double evaluate(const Model& m, std::span<const double> x) {
    return std::visit([&](const auto& n) { return evaluate(n, x); }, m);
}

/// Callable adaptor for the sampling utilities.
template <class Net>
auto as_function(const Net& net) {
    return [&net](std::span<const double> x) { return evaluate(net, x); };
}

// ---------------------------------------------------------------------------
// Parameters and gradients. Order: DenseNet layer by layer (W row-major, b),
// then out_w, out_b. ResNet block by block (u, bias, v), then out_w, out_b.

inline std::vector<double> parameters(const DenseNet& n) {
    std::vector<double> p;
    for (const auto& l : n.layers) {
        p.insert(p.end(), l.w.begin(), l.w.end());
        p.insert(p.end(), l.b.begin(), l.b.end());
    }
    p.insert(p.end(), n.out_w.begin(), n.out_w.end());
    p.push_back(n.out_b);
    return p;
}

inline DenseNet with_parameters(DenseNet n, std::span<const double> p) {
    std::size_t i = 0;
    const auto take = [&](std::vector<double>& dst) {
        for (double& v : dst) v = p[i++];
    };
    for (auto& l : n.layers) {
        take(l.w);
        take(l.b);
    }
    take(n.out_w);
    n.out_b = p[i++];
    if (i != p.size()) throw DimensionError("DenseNet: parameter count mismatch");
    return n;
}

inline std::vector<double> parameters(const ResNet& n) {
    std::vector<double> p;
    for (const auto& b : n.blocks()) {
        p.insert(p.end(), b.u.begin(), b.u.end());
        p.push_back(b.bias);
        p.insert(p.end(), b.v.begin(), b.v.end());
    }
    p.insert(p.end(), n.out_weights().begin(), n.out_weights().end());
    p.push_back(n.out_bias());
    return p;
}

inline ResNet with_parameters(const ResNet& n, std::span<const double> p) {
    std::size_t i = 0;
    const std::size_t d = n.dim();
    const auto take = [&](std::size_t k) {
        std::vector<double> v(p.begin() + static_cast<std::ptrdiff_t>(i),
                              p.begin() + static_cast<std::ptrdiff_t>(i + k));
        i += k;
        return v;
    };
    std::vector<ResidualBlock> blocks;
    for (std::size_t b = 0; b < n.size(); ++b) {
        auto u = take(d);
        const double bias = p[i++];
        blocks.push_back({std::move(u), bias, take(d)});
    }
    auto w = take(d);
    const double c = p[i++];
    if (i != p.size()) throw DimensionError("ResNet: parameter count mismatch");
    return ResNet(d, std::move(blocks), std::move(w), c);
}

/// Output f(x) and df/dparams for one input.
inline double output_gradient(const DenseNet& n, std::span<const double> x, std::vector<double>& grad) {
    std::vector<std::vector<double>> h{std::vector<double>(x.begin(), x.end())};
    std::vector<std::vector<double>> pre;
    for (const auto& l : n.layers) {
        pre.push_back(detail::dense_forward(l, h.back()));
        auto a = pre.back();
        for (double& v : a) v = relu(v);
        h.push_back(std::move(a));
    }
    const double f = dot(n.out_w, h.back()) + n.out_b;

    grad.assign(parameters(n).size(), 0.0);
    std::size_t off = grad.size() - n.out_w.size() - 1;
    for (std::size_t j = 0; j < n.out_w.size(); ++j) grad[off + j] = h.back()[j];
    grad.back() = 1.0;

    std::vector<double> g = n.out_w;  // df/dh_L
    std::size_t end = off;
    for (std::size_t li = n.layers.size(); li-- > 0;) {
        const auto& l = n.layers[li];
        const std::size_t start = end - l.w.size() - l.b.size();
        std::vector<double> ga(l.rows);
        for (std::size_t r = 0; r < l.rows; ++r) ga[r] = pre[li][r] > 0.0 ? g[r] : 0.0;
        for (std::size_t r = 0; r < l.rows; ++r) {
            for (std::size_t c = 0; c < l.cols; ++c) grad[start + r * l.cols + c] = ga[r] * h[li][c];
            grad[start + l.w.size() + r] = ga[r];
        }
        std::vector<double> gn(l.cols, 0.0);
        for (std::size_t r = 0; r < l.rows; ++r)
            for (std::size_t c = 0; c < l.cols; ++c) gn[c] += l.w[r * l.cols + c] * ga[r];
        g = std::move(gn);
        end = start;
    }
    return f;
}

inline double output_gradient(const ResNet& n, std::span<const double> x, std::vector<double>& grad) {
    const std::size_t d = n.dim();
    std::vector<State> xs{State(x.begin(), x.end())};
    std::vector<double> z;
    for (const auto& b : n.blocks()) {
        z.push_back(b.activation(xs.back()));
        State next = xs.back();
        b.apply(next);
        xs.push_back(std::move(next));
    }
    const double f = n.read_out(xs.back());

    const std::size_t per_block = 2 * d + 1;
    grad.assign(n.size() * per_block + d + 1, 0.0);
    const std::size_t off = n.size() * per_block;
    for (std::size_t j = 0; j < d; ++j) grad[off + j] = xs.back()[j];
    grad.back() = 1.0;

    State g = n.out_weights();  // df/dx_N
    for (std::size_t i = n.size(); i-- > 0;) {
        const auto& b = n.block(i);
        const std::size_t s = i * per_block;
        const double a = relu(z[i]);
        for (std::size_t j = 0; j < d; ++j) grad[s + d + 1 + j] = g[j] * a;  // dv
        const double dz = z[i] > 0.0 ? dot(g, b.v) : 0.0;
        for (std::size_t j = 0; j < d; ++j) grad[s + j] = dz * xs[i][j];  // du
        grad[s + d] = dz;                                                  // dbias
        for (std::size_t j = 0; j < d; ++j) g[j] += dz * b.u[j];
    }
    return f;
}

/// Logistic loss of one labelled sample and its gradient w.r.t. the parameters.
template <class Net>
double sample_loss_gradient(const Net& n, std::span<const double> x, int y, std::vector<double>& grad) {
    const double f = output_gradient(n, x, grad);
    const double dl = logistic_grad(f, y);
    for (double& g : grad) g *= dl;
    return softplus_neg(y * f);
}

// ---------------------------------------------------------------------------
// Training.

enum class Arch { FullyConnected, OneNeuronResNet };

/// Defaults are not taken from any reference run; they are plain choices
/// that train reliably on the 300-sample problem.
struct TrainConfig {
    Arch arch = Arch::OneNeuronResNet;
    std::size_t depth = 5;
    double lr = 0.05;
    double momentum = 0.9;
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;

    void validate() const {
        if (depth < 1) throw PreconditionError("depth must be >= 1");
        if (!(lr > 0.0)) throw PreconditionError("lr must be positive");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw PreconditionError("momentum must be in [0, 1)");
        if (batch_size < 1) throw PreconditionError("batch size must be >= 1");
    }
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"arch", c.arch == Arch::FullyConnected ? "fc" : "resnet"},
            {"depth", c.depth},
            {"lr", c.lr},
            {"momentum", c.momentum},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"seed", c.seed}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    const auto arch = j.at("arch").get<std::string>();
    if (arch == "fc") c.arch = Arch::FullyConnected;
    else if (arch == "resnet") c.arch = Arch::OneNeuronResNet;
    else throw Error("unknown arch '" + arch + "'");
    c.depth = j.at("depth").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

/// Weights uniform in (-0.7, 0.7) / sqrt(fan_in), biases zero.
inline Model init_model(const TrainConfig& cfg) {
    cfg.validate();
    std::mt19937_64 gen(cfg.seed);
    std::uniform_real_distribution<double> unif(-0.7, 0.7);
    const auto draw = [&](std::size_t n, std::size_t fan_in) {
        std::vector<double> v(n);
        for (double& x : v) x = unif(gen) / std::sqrt(static_cast<double>(fan_in));
        return v;
    };
    constexpr std::size_t d = 2;
    if (cfg.arch == Arch::FullyConnected) {
        DenseNet n;
        n.input_dim = d;
        for (std::size_t l = 0; l < cfg.depth; ++l) n.layers.push_back({draw(d * d, d), std::vector<double>(d, 0.0), d, d});
        n.out_w = draw(d, d);
        return n;
    }
    std::vector<ResidualBlock> blocks;
    for (std::size_t l = 0; l < cfg.depth; ++l) {
        auto u = draw(d, d);
        blocks.push_back({std::move(u), 0.0, draw(d, 1)});
    }
    auto w = draw(d, d);
    return ResNet(d, std::move(blocks), std::move(w), 0.0);
}

inline double dataset_loss(const Model& m, const Dataset& data) {
    std::vector<double> preds;
    preds.reserve(data.size());
    for (const auto& p : data.points) preds.push_back(evaluate(m, p));
    return logistic_loss(preds, data.labels);
}

class TrainingDiverged : public Error {
public:
    explicit TrainingDiverged(std::size_t epoch)
        : Error("training diverged (loss is not finite) in epoch " + std::to_string(epoch)), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

struct TrainResult {
    Model model;
    double initial_loss = 0.0;
    std::vector<double> loss_history;  ///< full-dataset loss after each epoch
};

/// Mini-batch SGD with momentum: v <- mu v - lr g, theta <- theta + v.
/// Single-threaded; the shuffle is drawn from mt19937_64(seed + 1).
inline TrainResult train(const TrainConfig& cfg, const Dataset& data) {
    TrainResult res{init_model(cfg), 0.0, {}};
    res.initial_loss = dataset_loss(res.model, data);
    std::mt19937_64 shuffle_gen(cfg.seed + 1);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::visit(
        [&](auto& net) {
            auto theta = parameters(net);
            std::vector<double> vel(theta.size(), 0.0), g, acc;
            for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
                std::shuffle(order.begin(), order.end(), shuffle_gen);
                for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                    const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                    acc.assign(theta.size(), 0.0);
                    for (std::size_t i = start; i < end; ++i) {
                        const auto& p = data.points[order[i]];
                        sample_loss_gradient(net, p, data.labels[order[i]], g);
                        for (std::size_t k = 0; k < g.size(); ++k) acc[k] += g[k];
                    }
                    const double inv = 1.0 / static_cast<double>(end - start);
                    for (std::size_t k = 0; k < theta.size(); ++k) {
                        vel[k] = cfg.momentum * vel[k] - cfg.lr * acc[k] * inv;
                        theta[k] += vel[k];
                        if (!std::isfinite(theta[k])) throw TrainingDiverged(epoch);
                    }
                    net = with_parameters(net, theta);
                }
                const double loss = dataset_loss(net, data);
                if (!std::isfinite(loss)) throw TrainingDiverged(epoch);
                res.loss_history.push_back(loss);
            }
        },
        res.model);
    return res;
}

// ---------------------------------------------------------------------------
// Clamp to [0, 1]: f -> relu(f) - relu(f - 1).

/// Appends one width-2 layer [relu(f), relu(f - 1)] read out as (1, -1).
inline DenseNet clamp_network(const DenseNet& n) {
    DenseNet out = n;
    const std::size_t w = n.width();
    DenseLayer l{std::vector<double>(2 * w), {n.out_b, n.out_b - 1.0}, 2, w};
    for (std::size_t c = 0; c < w; ++c) {
        l.w[c] = n.out_w[c];
        l.w[w + c] = n.out_w[c];
    }
    out.layers.push_back(std::move(l));
    out.out_w = {1.0, -1.0};
    out.out_b = 0.0;
    return out;
}

/// Appends max{f, 0} and min{f, 1} on the read-out value (two blocks).
inline ResNet clamp_network(const ResNet& n) {
    const ResidualBlock blocks[] = {readout::max_const(n.out_weights(), n.out_bias(), 0.0),
                                    readout::min_const(n.out_weights(), n.out_bias(), 1.0)};
    return compose(n, blocks);
}

inline Model clamp_network(const Model& m) {
    return std::visit([](const auto& n) { return Model(clamp_network(n)); }, m);
}

// ---------------------------------------------------------------------------
// Decision-boundary sampling and positivity probes.

struct LabeledPoint {
    double x = 0.0, y = 0.0;
    bool positive = false;
};

/// n points area-uniform in the disk B(0, radius), tagged f > 0.
template <class F>
std::vector<LabeledPoint> sample_decision_boundary(F&& f, std::size_t n, double radius, std::uint64_t seed) {
    if (n < 1) throw PreconditionError("sample_decision_boundary: n must be >= 1");
    const CounterRng rng{seed};
    std::vector<LabeledPoint> out(n);
    parallel_chunks(n, [&](std::size_t i) {
        const double r = radius * std::sqrt(rng.uniform(2 * i));
        const double th = 2.0 * std::numbers::pi * rng.uniform(2 * i + 1);
        const double z[2] = {r * std::cos(th), r * std::sin(th)};
        out[i] = {z[0], z[1], f(std::span<const double>(z, 2)) > 0.0};
    });
    return out;
}

/// Fraction of f > 0 among `samples_per_shell` uniform points on each circle |z| = r.
template <class F>
std::vector<double> positivity_probe(F&& f, std::span<const double> radii, std::size_t samples_per_shell,
                                     std::uint64_t seed) {
    if (samples_per_shell < 1) throw PreconditionError("positivity_probe: need at least one sample");
    const CounterRng rng{seed};
    std::vector<double> frac(radii.size());
    parallel_chunks(radii.size(), [&](std::size_t s) {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < samples_per_shell; ++i) {
            const double th = 2.0 * std::numbers::pi * rng.uniform(s * samples_per_shell + i);
            const double z[2] = {radii[s] * std::cos(th), radii[s] * std::sin(th)};
            if (f(std::span<const double>(z, 2)) > 0.0) ++pos;
        }
        frac[s] = static_cast<double>(pos) / static_cast<double>(samples_per_shell);
    });
    return frac;
}

inline void write_boundary_csv(const std::vector<LabeledPoint>& pts, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path);
    out << "x,y,pred\n";
    char line[96];
    for (const auto& p : pts) {
        std::snprintf(line, sizeof line, "%.12g,%.12g,%d\n", p.x, p.y, p.positive ? 1 : -1);
        out << line;
    }
}

/// Binary P6 raster of f over [-radius, radius]^2 (row 0 at y = +radius):
/// red where f > 0, blue elsewhere.
template <class F>
void write_boundary_ppm(F&& f, double radius, const std::string& path, std::size_t size = 256) {
    std::vector<unsigned char> img(size * size * 3);
    parallel_chunks(size, [&](std::size_t row) {
        for (std::size_t col = 0; col < size; ++col) {
            const double z[2] = {-radius + 2.0 * radius * (static_cast<double>(col) + 0.5) / static_cast<double>(size),
                                 radius - 2.0 * radius * (static_cast<double>(row) + 0.5) / static_cast<double>(size)};
            const bool pos = f(std::span<const double>(z, 2)) > 0.0;
            unsigned char* px = &img[(row * size + col) * 3];
            px[0] = pos ? 255 : 0;
            px[1] = 0;
            px[2] = pos ? 0 : 255;
        }
    });
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path);
    out << "P6\n" << size << " " << size << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
}

// ---------------------------------------------------------------------------
// Model files: ResNets use the network text format, dense nets a JSON document.

inline nlohmann::json to_json(const DenseNet& n) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : n.layers) layers.push_back({{"rows", l.rows}, {"cols", l.cols}, {"w", l.w}, {"b", l.b}});
    return {{"kind", "fc"}, {"input_dim", n.input_dim}, {"layers", layers}, {"out_w", n.out_w}, {"out_b", n.out_b}};
}

inline DenseNet dense_from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != "fc") throw Error("not a fully connected network document");
    DenseNet n;
    n.input_dim = j.at("input_dim").get<std::size_t>();
    std::size_t width = n.input_dim;
    for (const auto& l : j.at("layers")) {
        DenseLayer layer{l.at("w").get<std::vector<double>>(), l.at("b").get<std::vector<double>>(),
                         l.at("rows").get<std::size_t>(), l.at("cols").get<std::size_t>()};
        if (layer.cols != width || layer.w.size() != layer.rows * layer.cols || layer.b.size() != layer.rows)
            throw DimensionError("fully connected layer shape mismatch");
        width = layer.rows;
        n.layers.push_back(std::move(layer));
    }
    n.out_w = j.at("out_w").get<std::vector<double>>();
    n.out_b = j.at("out_b").get<double>();
    if (n.out_w.size() != width) throw DimensionError("fully connected read-out shape mismatch");
    return n;
}

inline void save_model(const Model& m, const std::string& path) {
    if (const auto* r = std::get_if<ResNet>(&m)) {
        save_network(*r, path);
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path);
    out << to_json(std::get<DenseNet>(m)).dump(1) << "\n";
}

inline Model load_model(const std::string& path) {
    const auto text = read_file(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        const auto j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_object() && j.value("kind", "") == "fc") {
            try {
                return dense_from_json(j);
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(e.what(), 1);
            }
        }
    }
    return deserialize(text);
}

}  // namespace resnet_synth

#endif  // RESNET_SYNTH_EXPERIMENT_HPP
