#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace nnmd {

using Vec3 = std::array<double, 3>;
using Int3 = std::array<int, 3>;

enum class ErrorKind {
  InvalidInput,
  InvalidTopology,
  CapacityExceeded,
  Dimension,
  Model,
  Parse,
  Plan,
  Consistency,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Unit system: eV, angstrom, fs, amu, K.
namespace units {
inline constexpr double ftm2v = 9.648533e-3;  // (eV/A)/amu -> A/fs^2
inline constexpr double mvv2e = 103.64269;    // amu*(A/fs)^2 -> eV
inline constexpr double kB = 8.617333262e-5;  // eV/K
}  // namespace units

inline Vec3 operator+(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec3 operator*(double s, const Vec3& a) {
  return {s * a[0], s * a[1], s * a[2]};
}
inline Vec3& operator+=(Vec3& a, const Vec3& b) {
  a[0] += b[0];
  a[1] += b[1];
  a[2] += b[2];
  return a;
}
inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline int product(const Int3& v) { return v[0] * v[1] * v[2]; }

}  // namespace nnmd
