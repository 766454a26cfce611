#pragma once

#include <cmath>
#include <compare>
#include <cstdint>

namespace ala {

// (input tokens, output tokens) identifying one workload shape.
struct WorkloadKey {
  std::int64_t ii = 0;
  std::int64_t oo = 0;
  auto operator<=>(const WorkloadKey&) const = default;
};

// Parameters of the saturating throughput curve thpt = c - a * exp(-b * bb).
struct ExpParams {
  double a = 0.0;  // ramp-up scale
  double b = 0.0;  // approach rate, 1/batch
  double c = 0.0;  // saturation throughput
  bool operator==(const ExpParams&) const = default;
};

// Feasible box for fitted and predicted parameters.
struct ParamBounds {
  static constexpr double lower = 1e-8;
  static constexpr double upper_ac = 1e9;
  static constexpr double upper_b = 1e3;
};

inline ExpParams clamp_to_bounds(ExpParams p) {
  auto clamp = [](double v, double hi) {
    if (!(v >= ParamBounds::lower)) return ParamBounds::lower;  // also catches NaN
    return v > hi ? hi : v;
  };
  return {clamp(p.a, ParamBounds::upper_ac), clamp(p.b, ParamBounds::upper_b),
          clamp(p.c, ParamBounds::upper_ac)};
}

inline double eval_throughput(const ExpParams& p, double bb) {
  return p.c - p.a * std::exp(-p.b * bb);
}

}  // namespace ala
