#include "ala/expmodel.hpp"
#include "ala/uncertainty.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace ala;

TEST_CASE("parallel and serial database builds agree exactly") {
  const auto res = synth_generate(ala::testing::grid_spec({64, 128, 256, 512, 1024, 2048},
                                                          {64, 128, 256, 512, 1024},
                                                          {1, 2, 4, 8, 16, 32, 64, 128}, 0.03, 2),
                                  12);
  Dataset d = res.data;
  for (std::int64_t bb : {1, 2, 4}) d.records.push_back({ConfigKey{}, 7, 7, bb, 1e300});
  const DatabaseBuild par = build_param_db(d);
  const DatabaseBuild ser = build_param_db_serial(d);
  CHECK(database_to_json(par.db).dump() == database_to_json(ser.db).dump());
  REQUIRE(par.failed.size() == ser.failed.size());
  CHECK(par.failed[0].key == ser.failed[0].key);
}

TEST_CASE("parallel and serial nearest-subset searches agree") {
  const Dataset train = synth_generate(ala::testing::grid_spec({128, 256, 512, 1024}, {128, 512},
                                                               {1, 2, 4, 8, 16, 32}, 0.02),
                                       2)
                            .data;
  const SubsetSignature u = universe_of(train);
  Rng rng(6);
  AnnealLog log;
  SubsetSignature s = u;
  s.bb.erase(32);
  for (int i = 0; i < 60; ++i) {
    log.push_back({i, 1.0, s, 1.0, true});
    s = modify_subset(s, u, rng);
  }
  Dataset q = synth_generate(ala::testing::grid_spec({256, 700}, {512}, {2, 8, 64}, 0.1), 3).data;
  const NearestSubset a = nearest_logged_subset(q, log, train);
  const NearestSubset b = nearest_logged_subset_serial(q, log, train);
  CHECK(a.distance == b.distance);
  CHECK(a.index == b.index);
}
