#pragma once

#include <stdexcept>
#include <string>

namespace kcluster {

// Error taxonomy mirrored by the CLI exit codes:
//   1  invariant violation detected at runtime
//   2  bad configuration or input
//   3  size, feasibility or solver failure
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InputError : ConfigError {
    using ConfigError::ConfigError;
};

struct SizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
    SolverError(const std::string& what, long iterations, double residual)
        : std::runtime_error(what), iterations(iterations), residual(residual) {}
    long iterations = 0;
    double residual = 0.0;
};

struct InvariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Comparison helper used project-wide: absolute tolerance scaled by the
// larger operand magnitude (floored at 1 so comparisons near zero stay sane).
inline double tolerance_scale(double a, double b) {
    double s = 1.0;
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    if (a > s) s = a;
    if (b > s) s = b;
    return s;
}

inline bool approx_eq(double a, double b, double tol = 1e-9) {
    double d = a - b;
    if (d < 0) d = -d;
    return d <= tol * tolerance_scale(a, b);
}

inline bool approx_le(double a, double b, double tol = 1e-9) {
    return a <= b + tol * tolerance_scale(a, b);
}

}  // namespace kcluster
