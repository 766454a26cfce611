#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ala/data.hpp"

namespace ala::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(ALA_FIXTURE_DIR) / name;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ala_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline bool rel_close(double got, double want, double tol) {
  return std::abs(got - want) <= tol * std::abs(want);
}

// Straight evaluation of c - a*exp(-b*bb), kept apart from the library.
inline double curve(double a, double b, double c, double bb) { return c - a * std::exp(-b * bb); }

inline SynthSpec grid_spec(std::vector<std::int64_t> ii, std::vector<std::int64_t> oo,
                           std::vector<std::int64_t> bb, double noise = 0.0, int reps = 1) {
  SynthSpec s;
  s.ii_values = std::move(ii);
  s.oo_values = std::move(oo);
  s.bb_values = std::move(bb);
  s.noise_rel = noise;
  s.replicates = reps;
  return s;
}

}  // namespace ala::testing
