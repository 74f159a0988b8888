#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pnr {

/// Error categories raised by the library. Each distinct failure mode named in
/// the module contracts gets its own value so callers can branch on it.
enum class Errc {
    invalid_argument,
    io_failure,
    malformed_header,
    truncated_payload,
    version_mismatch,
    shape_mismatch,
    length_mismatch,
    empty_set,
    degenerate,
    out_of_range,
    non_convergence,
    rank_deficient,
    missing_class,
    unnormalized,
    grid_mismatch,
};

constexpr std::string_view to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::io_failure: return "I/O failure";
    case Errc::malformed_header: return "malformed header";
    case Errc::truncated_payload: return "truncated payload";
    case Errc::version_mismatch: return "version mismatch";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::length_mismatch: return "length mismatch";
    case Errc::empty_set: return "empty set";
    case Errc::degenerate: return "degenerate input";
    case Errc::out_of_range: return "out of range";
    case Errc::non_convergence: return "non-convergence";
    case Errc::rank_deficient: return "rank-deficient Jacobian";
    case Errc::missing_class: return "missing class";
    case Errc::unnormalized: return "unnormalized density";
    case Errc::grid_mismatch: return "grid mismatch";
    }
    return "unknown";
}

/// True for failures of the numerical machinery rather than of the input data.
constexpr bool is_numerical(Errc code) noexcept
{
    return code == Errc::degenerate || code == Errc::non_convergence ||
           code == Errc::rank_deficient;
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, Errc code, const std::string& what)
{
    if (!condition) {
        fail(code, what);
    }
}

} // namespace pnr
