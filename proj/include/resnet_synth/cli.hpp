#ifndef RESNET_SYNTH_CLI_HPP
#define RESNET_SYNTH_CLI_HPP

// Command-line front-end. `run` takes the arguments after the program name and
// writes to the given streams, so tests can drive it in-process.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or input error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "resnet_synth/compiler1d.hpp"
#include "resnet_synth/compilernd.hpp"
#include "resnet_synth/experiment.hpp"
#include "resnet_synth/network_format.hpp"
#include "resnet_synth/target_format.hpp"
#include "resnet_synth/verify.hpp"

namespace resnet_synth::cli {

enum ExitCode : int { Ok = 0, VerificationFailed = 1, UsageError = 2 };

/// 12 significant digits; integral values keep a trailing ".0".
inline std::string fmt_num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    std::string s = buf;
    if (s.find_first_of(".eni") == std::string::npos) s += ".0";
    return s;
}

inline std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = std::min(text.find(',', pos), text.size());
        const auto tok = text.substr(pos, comma - pos);
        char* end = nullptr;
        const double x = std::strtod(tok.c_str(), &end);
        if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(x)) {
            throw PreconditionError(std::string(what) + ": invalid number '" + tok + "'");
        }
        out.push_back(x);
        pos = comma + 1;
    }
    return out;
}

/// "lo..hi,lo..hi,..."
inline Box parse_box(const std::string& text) {
    Box box;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = std::min(text.find(',', pos), text.size());
        const auto tok = text.substr(pos, comma - pos);
        const auto dots = tok.find("..");
        if (dots == std::string::npos) throw PreconditionError("--box: expected lo..hi, got '" + tok + "'");
        const auto lo = parse_list(tok.substr(0, dots), "--box");
        const auto hi = parse_list(tok.substr(dots + 2), "--box");
        box.emplace_back(lo.at(0), hi.at(0));
        pos = comma + 1;
    }
    return box;
}

/// Built-in functions for `discretize`.
inline std::function<double(std::span<const double>)> builtin_function(const std::string& name) {
    if (name == "unit-ball") {
        return [](std::span<const double> x) { return dot(x, x) <= 1.0 ? 1.0 : 0.0; };
    }
    if (name == "gaussian") {
        return [](std::span<const double> x) { return std::exp(-dot(x, x)); };
    }
    throw PreconditionError("unknown function '" + name + "' (expected unit-ball or gaussian)");
}

/// delta of a compiled 1-D net, read back from the third init block
/// R - ((H + delta)/delta) [R]_+.
inline double infer_delta_1d(const ResNet& net, double h_inf) {
    if (net.dim() != 1 || net.size() < 3) throw PreconditionError("cannot infer delta; pass --delta");
    const double v = net.block(2).v[0];
    if (!(v < -1.0)) throw PreconditionError("cannot infer delta; pass --delta");
    return h_inf / (-v - 1.0);
}

inline std::string sanitize(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
    return s;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open " + path);
    f << text;
}

namespace detail {

inline int cmd_compile(const std::string& target_path, double delta, const std::string& out_path,
                       const std::string& trace_dir, std::ostream& out) {
    const auto target = load_target(target_path);
    const auto c = compile_nd(target, delta);
    save_network(c.net, out_path);
    if (!trace_dir.empty()) {
        std::filesystem::create_directories(trace_dir);
        nlohmann::json cps = nlohmann::json::array();
        for (std::size_t i = 0; i < c.trace.checkpoints.size(); ++i) {
            const auto& cp = c.trace.checkpoints[i];
            char name[32];
            std::snprintf(name, sizeof name, "%03zu_", i);
            const auto file = std::string(name) + sanitize(cp.label) + ".net";
            save_network(c.trace.stage_net(i), (std::filesystem::path(trace_dir) / file).string());
            cps.push_back({{"label", cp.label}, {"blocks", cp.blocks}, {"file", file}});
        }
        write_text((std::filesystem::path(trace_dir) / "checkpoints.json").string(), cps.dump(1) + "\n");
        write_text((std::filesystem::path(trace_dir) / "breakpoints.json").string(),
                   nlohmann::json(c.trace.breakpoints).dump() + "\n");
    }
    out << "blocks=" << c.net.size() << " dim=" << c.net.dim() << "\n";
    return Ok;
}

inline int cmd_eval(const std::string& net_path, const std::string& point, std::ostream& out) {
    const auto model = load_model(net_path);
    const auto x = parse_list(point, "--point");
    out << fmt_num(evaluate(model, x)) << "\n";
    return Ok;
}

struct VerifyArgs {
    std::string net, target, report;
    bool exact = false;
    std::size_t mc = 0;
    std::uint64_t seed = 0;
    double delta = 0.0;
};

inline int cmd_verify(const VerifyArgs& a, std::ostream& out) {
    const auto net = load_network(a.net);
    const auto target = load_target(a.target);
    if (target.dims() != net.dim()) throw DimensionError("network and target dimensions differ");
    const bool exact = a.exact || (a.mc == 0 && net.dim() == 1);

    VerificationReport report;
    std::string line;
    if (exact) {
        if (net.dim() != 1) throw PreconditionError("--exact is available for 1-D networks only; use --mc");
        const auto t = as_1d(target);
        const double delta = a.delta > 0.0 ? a.delta : infer_delta_1d(net, t.h_inf());
        report = check_final_1d(net, t, delta);
        report.l1_error = exact_l1_error_1d(net, t);
        report.l1_bound = l1_bound_1d(t, delta);
        report.checks.push_back({"l1 <= 4 M delta ||h||", *report.l1_error <= *report.l1_bound,
                                 *report.l1_error, *report.l1_bound, std::nullopt});
        line = "l1=" + fmt_num(*report.l1_error) + " bound=" + fmt_num(*report.l1_bound);
    } else {
        double delta = a.delta;
        if (!(delta > 0.0)) {
            if (net.dim() != 1) throw PreconditionError("--delta is required for d > 1");
            delta = infer_delta_1d(net, target.h_inf());
        }
        const auto box = target.support();
        const auto est = mc_l1_error(net, target, box, a.mc ? a.mc : 100000, a.seed);
        const double env = l1_envelope_nd(target, delta);
        report.l1_error = est.estimate;
        report.l1_bound = env;
        report.mc_stderr = est.std_error;
        report.checks.push_back({"mc l1 <= envelope + 3 stderr", est.estimate <= env + 3.0 * est.std_error,
                                 est.estimate, env + 3.0 * est.std_error, std::nullopt});
        line = "l1=" + fmt_num(est.estimate) + " stderr=" + fmt_num(est.std_error) + " bound=" + fmt_num(env);
    }
    if (!a.report.empty()) write_text(a.report, report.to_json().dump(1) + "\n");
    out << line << (report.passed() ? " PASS" : " FAIL") << "\n";
    if (!report.passed()) out << report.to_table();
    return report.passed() ? Ok : VerificationFailed;
}

inline int cmd_discretize(const std::string& fn, const std::string& box_text, double res,
                          const std::string& out_path, std::ostream& out, std::ostream& err) {
    const auto f = builtin_function(fn);
    std::vector<std::string> warnings;
    const auto t = discretize(f, parse_box(box_text), res, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    save_target(t, out_path);
    out << "cells=" << t.cell_count() << " dims=" << t.dims() << "\n";
    return Ok;
}

inline int cmd_train(TrainConfig cfg, const std::string& arch, const std::string& out_path, std::ostream& out) {
    if (arch == "fc") cfg.arch = Arch::FullyConnected;
    else if (arch == "resnet") cfg.arch = Arch::OneNeuronResNet;
    else throw PreconditionError("--arch must be fc or resnet");
    const auto data = gen_dataset(100, 200, cfg.seed);
    const auto res = train(cfg, data);
    out << "epoch 0 loss=" << fmt_num(res.initial_loss) << "\n";
    for (std::size_t e = 0; e < res.loss_history.size(); ++e)
        out << "epoch " << e + 1 << " loss=" << fmt_num(res.loss_history[e]) << "\n";
    save_model(res.model, out_path);
    return Ok;
}

inline int cmd_boundary(const std::string& net_path, std::size_t n, double radius, std::uint64_t seed,
                        const std::string& csv, const std::string& ppm, std::ostream& out) {
    const auto model = load_model(net_path);
    const auto f = [&](std::span<const double> x) { return evaluate(model, x); };
    const auto pts = sample_decision_boundary(f, n, radius, seed);
    write_boundary_csv(pts, csv);
    if (!ppm.empty()) write_boundary_ppm(f, radius, ppm);
    const auto pos = std::count_if(pts.begin(), pts.end(), [](const auto& p) { return p.positive; });
    out << "positive=" << pos << "/" << pts.size() << "\n";
    return Ok;
}

inline int cmd_probe(const std::string& net_path, const std::string& radii_text, std::size_t n,
                     std::uint64_t seed, std::ostream& out) {
    const auto model = load_model(net_path);
    const auto radii = parse_list(radii_text, "--radii");
    const auto f = [&](std::span<const double> x) { return evaluate(model, x); };
    const auto frac = positivity_probe(f, radii, n, seed);
    for (std::size_t i = 0; i < radii.size(); ++i)
        out << "r=" << fmt_num(radii[i]) << " positive=" << fmt_num(frac[i]) << "\n";
    return Ok;
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Compile piecewise-constant targets into one-neuron ResNets and check them", "resnet_synth"};
    app.require_subcommand(1);

    std::string target, net, out_path, trace_dir, point, report, fn, box, arch, csv, ppm, radii;
    double delta = 0.0, res = 0.0, radius = 5.0;
    std::size_t n = 2000;
    std::uint64_t seed = 0;
    detail::VerifyArgs va;
    TrainConfig cfg;

    auto* compile = app.add_subcommand("compile", "compile a target into a network");
    compile->add_option("--target", target, "target JSON")->required();
    compile->add_option("--delta", delta, "margin, 0 < 2*delta < min cell width")->required();
    compile->add_option("--out", out_path, "output network")->required();
    compile->add_option("--trace", trace_dir, "directory for intermediate networks");

    auto* eval = app.add_subcommand("eval", "evaluate a network at one point");
    eval->add_option("--net", net, "network file")->required();
    eval->add_option("--point", point, "comma-separated coordinates")->required();

    auto* verify = app.add_subcommand("verify", "check a compiled network against its target");
    verify->add_option("--net", va.net)->required();
    verify->add_option("--target", va.target)->required();
    auto* exact_flag = verify->add_flag("--exact", va.exact, "exact L1 over breakpoints (1-D)");
    verify->add_option("--mc", va.mc, "Monte-Carlo sample count")->excludes(exact_flag);
    verify->add_option("--seed", va.seed);
    verify->add_option("--report", va.report, "write a JSON report");
    verify->add_option("--delta", va.delta, "construction margin (inferred for 1-D nets)");

    auto* disc = app.add_subcommand("discretize", "sample a built-in function on a uniform grid");
    disc->add_option("--fn", fn, "unit-ball | gaussian")->required();
    disc->add_option("--box", box, "lo..hi,lo..hi,...")->required();
    disc->add_option("--res", res, "cell side")->required();
    disc->add_option("--out", out_path)->required();

    auto* tr = app.add_subcommand("train", "train a classifier on the unit-ball dataset");
    tr->add_option("--arch", arch, "fc | resnet")->required();
    tr->add_option("--depth", cfg.depth)->required();
    tr->add_option("--lr", cfg.lr);
    tr->add_option("--momentum", cfg.momentum);
    tr->add_option("--epochs", cfg.epochs);
    tr->add_option("--batch", cfg.batch_size);
    tr->add_option("--seed", cfg.seed);
    tr->add_option("--out", out_path)->required();

    auto* bnd = app.add_subcommand("boundary", "sample the decision region f > 0");
    bnd->add_option("--net", net)->required();
    bnd->add_option("--n", n);
    bnd->add_option("--radius", radius);
    bnd->add_option("--seed", seed);
    bnd->add_option("--csv", csv)->required();
    bnd->add_option("--ppm", ppm);

    auto* probe = app.add_subcommand("probe", "fraction of f > 0 on circles");
    probe->add_option("--net", net)->required();
    probe->add_option("--radii", radii)->required();
    probe->add_option("--n", n);
    probe->add_option("--seed", seed);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << app.help();
        return UsageError;
    }

    try {
        if (*compile) return detail::cmd_compile(target, delta, out_path, trace_dir, out);
        if (*eval) return detail::cmd_eval(net, point, out);
        if (*verify) return detail::cmd_verify(va, out);
        if (*disc) return detail::cmd_discretize(fn, box, res, out_path, out, err);
        if (*tr) return detail::cmd_train(cfg, arch, out_path, out);
        if (*bnd) return detail::cmd_boundary(net, n, radius, seed, csv, ppm, out);
        if (*probe) return detail::cmd_probe(net, radii, n, seed, out);
    } catch (const resnet_synth::Error& e) {
        err << "error: " << e.what() << "\n";
        return UsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return UsageError;
    }
    return UsageError;
}

}  // namespace resnet_synth::cli

#endif  // RESNET_SYNTH_CLI_HPP
