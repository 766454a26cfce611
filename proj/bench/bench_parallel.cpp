// Wall-clock comparison of the OpenMP kernels against their serial references.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>

#include "ala/anneal.hpp"
#include "ala/expmodel.hpp"
#include "ala/uncertainty.hpp"

using Clock = std::chrono::steady_clock;

static double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / reps;
}

int main() {
  ala::SynthSpec spec;
  for (std::int64_t v = 64; v <= 8192; v *= 2) {
    spec.ii_values.push_back(v);
    spec.oo_values.push_back(v);
  }
  spec.bb_values = {1, 2, 4, 8, 16, 32, 64, 128, 256, 512};
  spec.noise_rel = 0.02;
  spec.replicates = 3;
  const ala::Dataset d = ala::synth_generate(spec, 1).data;

  std::printf("threads: %d, records: %zu\n", omp_get_max_threads(), d.size());
  const double db_ser = time_ms([&] { ala::build_param_db_serial(d); }, 5);
  const double db_par = time_ms([&] { ala::build_param_db(d); }, 5);
  std::printf("build_param_db      serial %8.2f ms  parallel %8.2f ms  speedup %.2fx\n", db_ser,
              db_par, db_ser / db_par);

  const ala::SubsetSignature u = ala::universe_of(d);
  ala::Rng rng(3);
  ala::AnnealLog log;
  ala::SubsetSignature s = u;
  s.bb.erase(512);
  for (int i = 0; i < 200; ++i) {
    log.push_back({i, 1.0, s, 1.0, true});
    s = ala::modify_subset(s, u, rng);
  }
  const ala::Dataset q = ala::induce(d, log[100].signature).train;
  const double nn_ser = time_ms([&] { ala::nearest_logged_subset_serial(q, log, d); }, 3);
  const double nn_par = time_ms([&] { ala::nearest_logged_subset(q, log, d); }, 3);
  std::printf("nearest_subset      serial %8.2f ms  parallel %8.2f ms  speedup %.2fx\n", nn_ser,
              nn_par, nn_ser / nn_par);
  return 0;
}
