#ifndef RESNET_SYNTH_TARGET_FORMAT_HPP
#define RESNET_SYNTH_TARGET_FORMAT_HPP

// JSON documents for piecewise-constant targets.
//
//   1-D:  {"knots": [a_0, ..., a_M], "values": [h_1, ..., h_M]}
//   n-D:  {"axis_knots": [[...], ...], "cell_values": nested arrays, last axis innermost}
//
// A 1-D document loads as a one-axis n-D target, so every consumer can take
// the n-D form.

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "resnet_synth/compiler1d.hpp"
#include "resnet_synth/compilernd.hpp"
#include "resnet_synth/error.hpp"
#include "resnet_synth/network_format.hpp"

namespace resnet_synth {

namespace detail {

inline void flatten_values(const nlohmann::json& j, std::size_t depth, std::size_t dims,
                           std::vector<double>& out) {
    if (depth == dims) {
        if (!j.is_number()) throw ParseError("cell_values: expected a number at depth " + std::to_string(depth), 1);
        out.push_back(j.get<double>());
        return;
    }
    if (!j.is_array()) throw ParseError("cell_values: expected an array at depth " + std::to_string(depth), 1);
    for (const auto& e : j) flatten_values(e, depth + 1, dims, out);
}

inline nlohmann::json nest_values(const PiecewiseConstantND& t, std::size_t axis, std::size_t& pos) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < t.axis_cells(axis); ++i) {
        if (axis + 1 == t.dims()) arr.push_back(t.cell_values[pos++]);
        else arr.push_back(nest_values(t, axis + 1, pos));
    }
    return arr;
}

}  // namespace detail

inline PiecewiseConstantND target_from_json(const nlohmann::json& j) {
    PiecewiseConstantND t;
    try {
        if (j.contains("knots")) {
            t.axis_knots = {j.at("knots").get<std::vector<double>>()};
            t.cell_values = j.at("values").get<std::vector<double>>();
        } else if (j.contains("axis_knots")) {
            t.axis_knots = j.at("axis_knots").get<std::vector<std::vector<double>>>();
            const auto& v = j.at("cell_values");
            if (v.is_array() && !v.empty() && v.front().is_number() && t.axis_knots.size() > 1) {
                t.cell_values = v.get<std::vector<double>>();  // already flat
            } else {
                detail::flatten_values(v, 0, t.axis_knots.size(), t.cell_values);
            }
        } else {
            throw ParseError("target needs \"knots\"/\"values\" or \"axis_knots\"/\"cell_values\"", 1);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("target: ") + e.what(), 1);
    }
    t.validate();
    return t;
}

inline nlohmann::json to_json(const PiecewiseConstantND& t) {
    if (t.dims() == 1) return {{"knots", t.axis_knots[0]}, {"values", t.cell_values}};
    std::size_t pos = 0;
    return {{"axis_knots", t.axis_knots}, {"cell_values", detail::nest_values(t, 0, pos)}};
}

inline nlohmann::json to_json(const PiecewiseConstant1D& t) {
    return {{"knots", t.knots}, {"values", t.values}};
}

inline PiecewiseConstantND load_target(const std::string& path) {
    const auto text = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what(), 1);
    }
    return target_from_json(j);
}

inline void save_target(const PiecewiseConstantND& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path);
    out << to_json(t).dump(1) << "\n";
}

inline PiecewiseConstant1D as_1d(const PiecewiseConstantND& t) {
    if (t.dims() != 1) throw DimensionError("expected a one-dimensional target");
    return {t.axis_knots[0], t.cell_values};
}

}  // namespace resnet_synth

#endif  // RESNET_SYNTH_TARGET_FORMAT_HPP
