#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace vortexlab {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm2()); }
    // rotate by +90 degrees: used for perp-gradient velocity fields
    Vec2 perp() const { return {y, -x}; }
};

inline Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }
inline double dist(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Machine-readable failure codes surfaced by the CLI run log.
enum class ErrorCode {
    none,
    config_invalid,
    degenerate_shape,
    unresolved_geometry,
    point_outside_domain,
    singular_evaluation,
    flux_nonzero,
    laplace_no_convergence,
    admissibility,
    bracket_sign,
    a_out_of_range,
    linear_system_singular,
    newton_diverged,
    vortex_collapsed,
    core_touches_mask,
    core_split,
    no_cores,
    shape_mismatch,
    io_error,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::none: return "NONE";
        case ErrorCode::config_invalid: return "CONFIG_INVALID";
        case ErrorCode::degenerate_shape: return "DEGENERATE_SHAPE";
        case ErrorCode::unresolved_geometry: return "UNRESOLVED_GEOMETRY";
        case ErrorCode::point_outside_domain: return "POINT_OUTSIDE_DOMAIN";
        case ErrorCode::singular_evaluation: return "SINGULAR_EVALUATION";
        case ErrorCode::flux_nonzero: return "FLUX_NONZERO";
        case ErrorCode::laplace_no_convergence: return "LAPLACE_NO_CONVERGENCE";
        case ErrorCode::admissibility: return "ADMISSIBILITY";
        case ErrorCode::bracket_sign: return "BRACKET_SIGN";
        case ErrorCode::a_out_of_range: return "A_OUT_OF_RANGE";
        case ErrorCode::linear_system_singular: return "LINEAR_SYSTEM_SINGULAR";
        case ErrorCode::newton_diverged: return "NEWTON_DIVERGED";
        case ErrorCode::vortex_collapsed: return "VORTEX_COLLAPSED";
        case ErrorCode::core_touches_mask: return "CORE_TOUCHES_MASK";
        case ErrorCode::core_split: return "CORE_SPLIT";
        case ErrorCode::no_cores: return "NO_CORES";
        case ErrorCode::shape_mismatch: return "SHAPE_MISMATCH";
        case ErrorCode::io_error: return "IO_ERROR";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, std::string(error_code_name(code)) + ": " + what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

inline double sq(double v) { return v * v; }

// (t)_+^p with the convention 0 for t <= 0
inline double plus_pow(double t, double p) {
    return t > 0.0 ? std::pow(t, p) : 0.0;
}

} // namespace vortexlab
