#ifndef RESNET_SYNTH_ERROR_HPP
#define RESNET_SYNTH_ERROR_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace resnet_synth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vector/state/network dimensions do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Malformed network, target or trace document. Line and column are 1-based.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
        : Error(format(what, line, column)), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t line, std::size_t column) {
        std::string s = "line " + std::to_string(line);
        if (column != 0) s += ", column " + std::to_string(column);
        return s + ": " + what;
    }

    std::size_t line_;
    std::size_t column_;
};

/// A construction precondition failed (delta too large, empty target, ...).
/// `interval()` names the offending cell when there is one (0-based).
class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what,
                               std::optional<std::size_t> interval = std::nullopt)
        : Error(what), interval_(interval) {}

    std::optional<std::size_t> interval() const noexcept { return interval_; }

private:
    std::optional<std::size_t> interval_;
};

}  // namespace resnet_synth

#endif  // RESNET_SYNTH_ERROR_HPP
