#include <cstring>
#include <thread>

#include "cape/bridge.hpp"
#include "cape/synth.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cape;
using namespace cape::testing;

namespace {

struct FlatGraph {
  std::vector<double> coords;
  std::vector<std::int64_t> edges;
  BridgeGraph view() const { return {coords, edges}; }
};

FlatGraph flatten(const GroundTruthGraph& g) {
  FlatGraph f;
  for (const auto& p : g.nodes()) {
    if (g.ndim() == 3) f.coords.push_back(p.z);
    f.coords.push_back(p.y);
    f.coords.push_back(p.x);
  }
  for (const auto& e : g.edges()) {
    f.edges.push_back(static_cast<std::int64_t>(e.a));
    f.edges.push_back(static_cast<std::int64_t>(e.b));
  }
  return f;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("version") { CHECK(std::string(version()) == "1.0.0"); }

TEST_CASE("perfect prediction through the bridge") {
  SynthConfig sc;
  sc.n_gaps = 0;
  const auto s = make_sample(sc);
  const auto fg = flatten(s.graph);
  const auto shape = s.gt_map.shape().extents();
  const auto r = forward_backward(s.gt_map.values(), shape, fg.view(), CapeConfig{});
  CHECK(r.loss == 0.0);
  REQUIRE(r.gradient.size() == s.gt_map.size());
  for (float v : r.gradient) REQUIRE(v == 0.0f);
}

TEST_CASE("bridge results equal the library results") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    const auto s = make_sample(sc);
    const auto fg = flatten(s.graph);
    CapeConfig cfg;
    cfg.seed = 100 + seed;
    const auto r = forward_backward(s.corrupted_map.values(), s.corrupted_map.shape().extents(), fg.view(), cfg);
    const auto direct = cape_forward(s.graph, s.corrupted_map, cfg);
    CHECK(bit_equal(r.loss, direct.total_loss));
    CHECK(std::equal(r.gradient.begin(), r.gradient.end(), direct.gradient.values().begin()));
    CHECK(r.loss > 0.0);
  }
}

TEST_CASE("3D buffers") {
  SynthConfig sc;
  sc.shape = {40, 40, 40};
  sc.n_curves = 2;
  const auto s = make_sample(sc);
  const auto fg = flatten(s.graph);
  const auto r = forward_backward(s.corrupted_map.values(), sc.shape, fg.view(), CapeConfig{});
  CHECK(bit_equal(r.loss, cape_forward(s.graph, s.corrupted_map, CapeConfig{}).total_loss));
}

TEST_CASE("a fixed path set is reused") {
  SynthConfig sc;
  sc.seed = 6;
  sc.n_curves = 4;
  const auto s = make_sample(sc);
  const auto fg = flatten(s.graph);
  const auto shape = s.corrupted_map.shape().extents();
  CapeConfig cfg;
  cfg.seed = 3;
  const auto handle = prepare_paths(shape, fg.view(), cfg);
  CHECK(handle.seed() == 3);
  CHECK(handle.paths().paths.size() == sample_paths(s.graph, 3).size());

  const auto fresh = forward_backward(s.corrupted_map.values(), shape, fg.view(), cfg);
  const auto fixed = forward_backward(s.corrupted_map.values(), shape, fg.view(), cfg, &handle);
  CHECK(bit_equal(fresh.loss, fixed.loss));
  CHECK(fresh.gradient == fixed.gradient);

  // the handle wins over the config seed
  CapeConfig other = cfg;
  other.seed = 99;
  const auto pinned = forward_backward(s.corrupted_map.values(), shape, fg.view(), other, &handle);
  CHECK(bit_equal(pinned.loss, fixed.loss));
}

TEST_CASE("malformed calls raise errors") {
  const auto f = line_fixture();
  const auto fg = flatten(f.graph);
  const std::vector<std::size_t> shape{64, 128};
  const auto values = f.map.values();

  CHECK(error_kind([&] { forward_backward(values.subspan(1), shape, fg.view(), CapeConfig{}); }) ==
        ErrorKind::shape_mismatch);
  const std::vector<std::size_t> flat{64 * 128};
  CHECK(error_kind([&] { forward_backward(values, flat, fg.view(), CapeConfig{}); }) ==
        ErrorKind::unsupported_dimensionality);
  const std::vector<std::size_t> zero{0, 128};
  CHECK(error_kind([&] { forward_backward(values, zero, fg.view(), CapeConfig{}); }) == ErrorKind::invalid_argument);

  FlatGraph bad_edge = fg;
  bad_edge.edges[1] = 7;
  CHECK(error_kind([&] { forward_backward(values, shape, bad_edge.view(), CapeConfig{}); }) ==
        ErrorKind::invalid_argument);
  FlatGraph odd = fg;
  odd.edges.pop_back();
  CHECK(error_kind([&] { forward_backward(values, shape, odd.view(), CapeConfig{}); }) == ErrorKind::invalid_argument);
  FlatGraph ragged = fg;
  ragged.coords.pop_back();
  CHECK(error_kind([&] { forward_backward(values, shape, ragged.view(), CapeConfig{}); }) ==
        ErrorKind::invalid_argument);
  FlatGraph outside = fg;
  outside.coords[1] = 500.0;
  CHECK(error_kind([&] { forward_backward(values, shape, outside.view(), CapeConfig{}); }) == ErrorKind::out_of_bounds);

  std::vector<float> negative(values.begin(), values.end());
  negative[5] = -1.0f;
  CHECK(error_kind([&] { forward_backward(negative, shape, fg.view(), CapeConfig{}); }) == ErrorKind::invalid_argument);
}

TEST_CASE("concurrent calls do not interfere") {
  SynthConfig sc;
  sc.seed = 10;
  const auto s = make_sample(sc);
  const auto fg = flatten(s.graph);
  const auto shape = s.corrupted_map.shape().extents();
  const auto expect = forward_backward(s.corrupted_map.values(), shape, fg.view(), CapeConfig{});

  std::vector<BridgeResult> got(6);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < got.size(); ++t)
      pool.emplace_back([&, t] {
        CapeConfig cfg;
        cfg.threads = 2;
        got[t] = forward_backward(s.corrupted_map.values(), shape, fg.view(), cfg);
      });
  }
  for (const auto& r : got) {
    CHECK(bit_equal(r.loss, expect.loss));
    CHECK(r.gradient == expect.gradient);
  }
}
