#include "nnmd/tsgemm.hpp"

#include <cmath>
#include <limits>

namespace nnmd {

const char* to_string(PrecisionMode mode) {
  switch (mode) {
    case PrecisionMode::Double: return "double";
    case PrecisionMode::MixFp32: return "mix-fp32";
    case PrecisionMode::MixFp16: return "mix-fp16";
  }
  return "unknown";
}

PrecisionMode parse_precision(const std::string& name) {
  if (name == "double") return PrecisionMode::Double;
  if (name == "mix-fp32") return PrecisionMode::MixFp32;
  if (name == "mix-fp16") return PrecisionMode::MixFp16;
  throw Error(ErrorKind::InvalidInput, "unknown precision mode '" + name +
                                           "' (expected double, mix-fp32, mix-fp16)");
}

double quantize_fp16(double x) {
  constexpr double kMaxHalf = 65504.0;
  if (std::isnan(x)) return x;
  if (x == 0.0) return x;
  const double ax = std::fabs(x);
  if (ax >= kMaxHalf) return std::copysign(kMaxHalf, x);
  int e = 0;
  std::frexp(ax, &e);  // ax in [2^(e-1), 2^e)
  // 11 significant bits for normals; subnormal quantum is 2^-24.
  const int qexp = std::max(e - 11, -24);
  const double scaled = std::ldexp(ax, -qexp);
  double r = std::ldexp(std::nearbyint(scaled), qexp);
  if (r > kMaxHalf) r = kMaxHalf;
  return std::copysign(r, x);
}

}  // namespace nnmd
