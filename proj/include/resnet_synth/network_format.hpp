#ifndef RESNET_SYNTH_NETWORK_FORMAT_HPP
#define RESNET_SYNTH_NETWORK_FORMAT_HPP

// Text format (one record per line, weights as C99 "%a" hex-floats):
//
//   resnet v1 dim=<d> blocks=<N>
//   block u=[<hex>,...] b=<hex> v=[<hex>,...]     (N lines)
//   out w=[<hex>,...] b=<hex>
//
// Hex-floats make the round trip bit-exact.

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "resnet_synth/core.hpp"

namespace resnet_synth {

namespace detail {

inline std::string hexfloat(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", x);
    return buf;
}

inline std::string hex_list(const std::vector<double>& xs) {
    std::string s = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ',';
        s += hexfloat(xs[i]);
    }
    return s + "]";
}

inline double parse_real(std::string_view tok, std::size_t line, std::size_t col) {
    const std::string s(tok);
    if (s.empty()) throw ParseError("empty number", line, col);
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(x)) {
        throw ParseError("invalid number '" + s + "'", line, col);
    }
    return x;
}

/// Splits "key=value key2=[...]" into fields, remembering each value's column.
struct Fields {
    struct Field {
        std::string value;
        std::size_t column;
    };
    std::map<std::string, Field, std::less<>> items;
    std::size_t line = 0;

    const Field& get(std::string_view key) const {
        auto it = items.find(key);
        if (it == items.end()) throw ParseError("missing field " + std::string(key), line);
        return it->second;
    }

    std::size_t get_count(std::string_view key) const {
        const auto& f = get(key);
        if (f.value.empty() ||
            f.value.find_first_not_of("0123456789") != std::string::npos) {
            throw ParseError("field " + std::string(key) + " must be a non-negative integer",
                             line, f.column);
        }
        return std::stoull(f.value);
    }

    double get_real(std::string_view key) const {
        const auto& f = get(key);
        return parse_real(f.value, line, f.column);
    }

    std::vector<double> get_list(std::string_view key) const {
        const auto& f = get(key);
        const std::string& s = f.value;
        if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
            throw ParseError("field " + std::string(key) + " must be a [list]", line, f.column);
        }
        std::vector<double> out;
        std::size_t pos = 1;
        while (pos < s.size() - 1) {
            std::size_t comma = s.find(',', pos);
            if (comma == std::string::npos || comma > s.size() - 1) comma = s.size() - 1;
            out.push_back(parse_real(std::string_view(s).substr(pos, comma - pos), line,
                                     f.column + pos));
            pos = comma + 1;
        }
        return out;
    }
};

inline Fields split_fields(std::string_view body, std::size_t line, std::size_t col0) {
    Fields f;
    f.line = line;
    std::size_t i = 0;
    while (i < body.size()) {
        while (i < body.size() && body[i] == ' ') ++i;
        if (i >= body.size()) break;
        std::size_t j = body.find(' ', i);
        if (j == std::string_view::npos) j = body.size();
        const auto tok = body.substr(i, j - i);
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos || eq == 0) {
            throw ParseError("expected key=value, got '" + std::string(tok) + "'", line, col0 + i);
        }
        f.items[std::string(tok.substr(0, eq))] = {std::string(tok.substr(eq + 1)),
                                                   col0 + i + eq + 1};
        i = j;
    }
    return f;
}

}  // namespace detail

inline std::string serialize(const ResNet& net) {
    std::string out = "resnet v1 dim=" + std::to_string(net.dim()) +
                      " blocks=" + std::to_string(net.size()) + "\n";
    for (const auto& b : net.blocks()) {
        out += "block u=" + detail::hex_list(b.u) + " b=" + detail::hexfloat(b.bias) +
               " v=" + detail::hex_list(b.v) + "\n";
    }
    out += "out w=" + detail::hex_list(net.out_weights()) +
           " b=" + detail::hexfloat(net.out_bias()) + "\n";
    return out;
}

/// Parses the text format. Throws ParseError (with line/column) on malformed
/// input and DimensionError when widths disagree.
inline ResNet deserialize(std::string_view text) {
    std::vector<std::string> lines;
    {
        std::istringstream in{std::string(text)};
        std::string l;
        while (std::getline(in, l)) {
            if (!l.empty() && l.back() == '\r') l.pop_back();
            lines.push_back(l);
        }
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw ParseError("empty document", 1);

    // A document without the magic still reports which header field is missing.
    constexpr std::string_view magic = "resnet v1";
    const std::string_view head = lines[0];
    const bool has_magic = head.substr(0, magic.size()) == magic;
    const auto header = detail::split_fields(has_magic ? head.substr(magic.size()) : "", 1,
                                             magic.size() + 1);
    const std::size_t dim = header.get_count("dim");
    const std::size_t n_blocks = header.get_count("blocks");
    if (!has_magic) throw ParseError("expected header 'resnet v1'", 1, 1);
    if (dim == 0) throw ParseError("dim must be positive", 1);
    if (lines.size() != n_blocks + 2) {
        throw ParseError("expected " + std::to_string(n_blocks) + " block lines and a footer, got " +
                             std::to_string(lines.size() - 1) + " lines",
                         lines.size());
    }

    const auto body_of = [&](std::size_t idx, std::string_view tag) {
        const std::string& l = lines[idx];
        if (l.rfind(tag, 0) != 0 || (l.size() > tag.size() && l[tag.size()] != ' ')) {
            throw ParseError("expected '" + std::string(tag) + "' record", idx + 1, 1);
        }
        return detail::split_fields(std::string_view(l).substr(tag.size()), idx + 1,
                                    tag.size() + 1);
    };

    std::vector<ResidualBlock> blocks;
    blocks.reserve(n_blocks);
    for (std::size_t i = 0; i < n_blocks; ++i) {
        const auto f = body_of(i + 1, "block");
        ResidualBlock b{f.get_list("u"), f.get_real("b"), f.get_list("v")};
        if (b.u.size() != dim || b.v.size() != dim) {
            throw ParseError("block width does not match dim=" + std::to_string(dim), i + 2);
        }
        blocks.push_back(std::move(b));
    }
    const auto f = body_of(n_blocks + 1, "out");
    auto w = f.get_list("w");
    if (w.size() != dim) throw ParseError("out width does not match dim", n_blocks + 2);
    return ResNet(dim, std::move(blocks), std::move(w), f.get_real("b"));
}

inline void save_network(const ResNet& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << serialize(net);
    if (!out) throw Error("failed writing " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ResNet load_network(const std::string& path) { return deserialize(read_file(path)); }

}  // namespace resnet_synth

#endif  // RESNET_SYNTH_NETWORK_FORMAT_HPP
