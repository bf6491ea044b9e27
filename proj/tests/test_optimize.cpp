#include "cape/optimize.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cape;
using namespace cape::testing;

namespace {

SynthSample one_gap_sample(std::uint64_t seed) {
  SynthConfig sc;
  sc.seed = seed;
  sc.n_curves = 1;
  sc.loop_prob = 0.0;
  return make_sample(sc);
}

}  // namespace

TEST_CASE("finite differences on a single crossing") {
  const auto f = line_fixture();
  const auto pred = with_cross_section_gap(f.map, 60, 1, 3.0f);
  const auto r = finite_diff_check(f.graph, pred, CapeConfig{}, 1e-3, 1000);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("finite differences on zero cells") {
  const auto f = line_fixture();
  const auto r = finite_diff_check(f.graph, f.map, CapeConfig{}, 1e-3, 50);
  CHECK(r.checked + r.skipped == 50);
  CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("finite differences on noisy corrupted maps") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    auto s = make_sample(sc);
    const auto noise = random_grid(s.corrupted_map.shape(), 0.0f, 1.0f, 900 + seed);
    for (std::size_t i = 0; i < noise.size(); ++i) s.corrupted_map[i] += noise[i];
    CapeConfig cfg;
    cfg.seed = seed;
    const auto r = finite_diff_check(s.graph, s.corrupted_map, cfg);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error < 1e-3);
    // central differences carry an h^2 term for p != 2, so keep values off zero
    ScalarGrid lifted = s.corrupted_map;
    for (std::size_t i = 0; i < lifted.size(); ++i) lifted[i] += 1.0f;
    for (double exponent : {1.0, 3.0}) {
      cfg.cost_exponent = exponent;
      CHECK(finite_diff_check(s.graph, lifted, cfg).max_rel_error < 1e-3);
    }
  }
}

TEST_CASE("finite_diff_check errors") {
  const auto f = line_fixture();
  CHECK(error_kind([&] { finite_diff_check(f.graph, f.map, CapeConfig{}, 0.0); }) == ErrorKind::invalid_argument);
  ScalarGrid bad = f.map;
  bad[0] = std::numeric_limits<float>::infinity();
  CHECK(error_kind([&] { finite_diff_check(f.graph, bad, CapeConfig{}); }) == ErrorKind::invalid_argument);
}

TEST_CASE("resample seeds") {
  CHECK(resample_seed(5, 0) == 5);
  CHECK(resample_seed(5, 1) != resample_seed(5, 2));
  CHECK(resample_seed(5, 3) == resample_seed(5, 3));
}

TEST_CASE("repair config validation") {
  RepairConfig r;
  CHECK_NOTHROW(r.validate());
  r.steps = 0;
  CHECK(error_kind([&] { r.validate(); }) == ErrorKind::invalid_argument);
  r = {};
  r.learning_rate = 0.0;
  CHECK(error_kind([&] { r.validate(); }) == ErrorKind::invalid_argument);
  r = {};
  r.resample_paths_every = 0;
  CHECK(error_kind([&] { r.validate(); }) == ErrorKind::invalid_argument);
}

TEST_CASE("without the path term the corrupted map is a fixed point") {
  const auto s = one_gap_sample(2);
  RepairConfig r;
  r.steps = 15;
  r.alpha = 0.0;
  const auto [y, trace] = repair(s, r, CapeConfig{});
  CHECK(y == s.corrupted_map);
  CHECK(trace.size() == 16);
  for (const auto& row : trace) CHECK(row.total == 0.0);
}

TEST_CASE("repair trace and improvement") {
  const auto s = one_gap_sample(0);
  RepairConfig r;
  r.steps = 60;
  const auto [y, trace] = repair(s, r, CapeConfig{});
  REQUIRE(trace.size() == 61);
  CHECK(trace.front().cape > 0.0);
  CHECK(trace.back().cape < trace.front().cape);
  CHECK(trace.back().apls > trace.front().apls);
  CHECK(trace.front().total == r.alpha * trace.front().cape);
  for (float v : y.values()) REQUIRE(v >= 0.0f);
}

TEST_CASE("the path term does not increase between resamplings at a small step") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = one_gap_sample(seed);
    RepairConfig r;
    r.steps = 40;
    r.learning_rate = 0.01;
    CapeConfig c;
    c.seed = seed;
    const auto [y, trace] = repair(s, r, c);
    for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
      if ((i + 1) % static_cast<std::size_t>(r.resample_paths_every) == 0) continue;
      REQUIRE(trace[i + 1].cape <= trace[i].cape + 1e-6);
    }
  }
}

TEST_CASE("a runaway step size trips the divergence guard") {
  const auto s = one_gap_sample(1);
  RepairConfig r;
  r.steps = 50;
  r.learning_rate = 1000.0;
  CHECK(error_kind([&] { repair(s, r, CapeConfig{}); }) == ErrorKind::divergence);
}

TEST_CASE("repair does not depend on the thread count") {
  const auto s = one_gap_sample(3);
  RepairConfig r;
  r.steps = 12;
  CapeConfig one;
  one.threads = 1;
  CapeConfig many;
  many.threads = 8;
  const auto a = repair(s, r, one);
  const auto b = repair(s, r, many);
  CHECK(a.first == b.first);
  REQUIRE(a.second.size() == b.second.size());
  for (std::size_t i = 0; i < a.second.size(); ++i) {
    CHECK(a.second[i].total == b.second[i].total);
    CHECK(a.second[i].apls == b.second[i].apls);
  }
}
