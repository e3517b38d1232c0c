#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace kinlim {

inline constexpr const char* kToolName = "kinlim";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;
using IVec3 = std::array<int, 3>;

// Validation failures map to CLI exit code 1, everything else to 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidParameter : ValidationError {
    using ValidationError::ValidationError;
};
struct ConfigError : ValidationError {
    using ValidationError::ValidationError;
};
struct StabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GuardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct Unsupported : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3 to_vec(const IVec3& a) { return {double(a[0]), double(a[1]), double(a[2])}; }

// Non-negative residue, used for periodic index wrapping.
inline int wrap(int i, int n) {
    int r = i % n;
    return r < 0 ? r + n : r;
}

}  // namespace kinlim
