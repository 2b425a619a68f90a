#include <set>

#include "doctest.h"
#include "lpsl/error.hpp"
#include "lpsl/proximity.hpp"
#include "test_util.hpp"

using namespace lpsl;
using testutil::TempDir;

namespace {

Eigen::VectorXd dense_lps(const Graph& g, const LabelMask& mask, double alpha) {
  const Eigen::MatrixXd adj = testutil::dense_norm_adj(g);
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Eigen::VectorXd t = Eigen::VectorXd::Zero(n);
  for (Index v : mask.labeled) t(v) = 1.0;
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - (1.0 - alpha) * adj;
  return m.inverse() * t;
}

std::vector<Index> iota_nodes(std::size_t n) {
  std::vector<Index> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<Index>(i);
  return v;
}

}  // namespace

TEST_CASE("two-node scores") {
  const auto ops = symmetric_normalize(testutil::path_graph(2));
  const std::vector<Index> lab{0};
  const auto s = lps_scores(ops, LabelMask::from_nodes(2, lab), 0.5);
  CHECK(s.scores[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-9));
  CHECK(s.scores[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(s.residual <= 1e-10);
}

TEST_CASE("alpha one gives the indicator") {
  const Graph g = testutil::random_connected_graph(15, 0.2, 1);
  const auto mask = LabelMask::from_nodes(15, testutil::random_subset(15, 4, 2));
  const auto s = lps_scores(symmetric_normalize(g), mask, 1.0);
  for (std::size_t i = 0; i < 15; ++i) CHECK(s.scores[i] == (mask.is_labeled(i) ? 1.0 : 0.0));
}

TEST_CASE("scores match the dense inverse") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const std::size_t n = seed == 0 ? 30 : 5 + (seed * 7) % 46;
    const std::size_t k = seed == 0 ? 5 : 1 + seed % 5;
    const Graph g = testutil::random_connected_graph(n, 0.1, seed + 100, seed % 3 == 0);
    const auto mask = LabelMask::from_nodes(n, testutil::random_subset(n, k, seed));
    const double alpha = seed == 0 ? 0.1 : 0.05 + 0.9 * (seed % 10) / 10.0;
    const auto s = lps_scores(symmetric_normalize(g), mask, alpha);
    const Eigen::VectorXd oracle = dense_lps(g, mask, alpha);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(s.scores[i] - oracle(static_cast<Eigen::Index>(i))) <= 1e-8);
      CHECK(s.scores[i] > 0.0);
    }
  }
}

TEST_CASE("component without labels scores zero") {
  const std::vector<Edge> edges{{0, 1}, {1, 2}, {3, 4}};
  const Graph g = Graph::from_edges(5, edges);
  const std::vector<Index> lab{0};
  const auto s = lps_scores(symmetric_normalize(g), LabelMask::from_nodes(5, lab), 0.2);
  CHECK(s.scores[2] > 0.0);
  CHECK(s.scores[3] == 0.0);
  CHECK(s.scores[4] == 0.0);
}

TEST_CASE("score errors") {
  const auto ops = symmetric_normalize(testutil::random_connected_graph(20, 0.2, 3));
  const std::vector<Index> lab{0, 5};
  const auto mask = LabelMask::from_nodes(20, lab);
  CHECK_THROWS_AS(lps_scores(ops, mask, 0.0), ValidationError);
  CHECK_THROWS_AS(lps_scores(ops, mask, 1.5), ValidationError);
  CHECK_THROWS_AS(lps_scores(ops, LabelMask::from_nodes(20, {}), 0.1), ValidationError);
  CHECK_THROWS_AS(lps_scores(ops, mask, 0.1, 1e-10, 3), NumericalError);
}

TEST_CASE("shortest path distance") {
  const std::vector<Index> lab0{0};
  CHECK(spd_to_labeled(testutil::path_graph(3), LabelMask::from_nodes(3, lab0)) == std::vector<int>{0, 1, 2});

  const auto all = iota_nodes(4);
  CHECK(spd_to_labeled(testutil::path_graph(4), LabelMask::from_nodes(4, all)) == std::vector<int>(4, 0));

  const std::vector<Edge> edges{{0, 1}, {2, 3}};
  const auto d = spd_to_labeled(Graph::from_edges(4, edges), LabelMask::from_nodes(4, lab0));
  CHECK(d == std::vector<int>{0, 1, kUnreachable, kUnreachable});
}

TEST_CASE("shortest path properties") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Graph g = testutil::random_connected_graph(40, 0.04, seed);
    const auto mask = LabelMask::from_nodes(40, testutil::random_subset(40, 1 + seed % 4, seed));
    const auto d = spd_to_labeled(g, mask);
    const auto& a = g.adjacency();
    for (std::size_t i = 0; i < 40; ++i) {
      CHECK((d[i] == 0) == mask.is_labeled(i));
      for (Index j : a.row_indices(i)) CHECK(std::abs(d[i] - d[j]) <= 1);
    }
  }
}

TEST_CASE("degree groups keyed by value") {
  const std::vector<double> deg{1, 1, 2, 2, 3};
  PartitionConfig cfg;
  cfg.min_group_size = 1;
  const auto p = partition_groups(deg, GroupMetric::degree, iota_nodes(5), cfg);
  REQUIRE(p.num_groups() == 3);
  CHECK(p.group(0) == 0);
  CHECK(p.group(1) == 0);
  CHECK(p.group(2) == 1);
  CHECK(p.group(4) == 2);
  CHECK(p.boundaries[0].lo == 1.0);
  CHECK(p.boundaries[2].lo == 3.0);
}

TEST_CASE("degree above range is clamped or dropped") {
  std::vector<double> deg;
  for (int v = 1; v <= 9; ++v)
    for (int k = 0; k < 3; ++k) deg.push_back(v);
  PartitionConfig cfg;
  cfg.min_group_size = 1;
  const auto nodes = iota_nodes(deg.size());
  const auto clamped = partition_groups(deg, GroupMetric::degree, nodes, cfg);
  CHECK(clamped.num_groups() == 7);
  CHECK(clamped.members()[6].size() == 9);
  CHECK(std::isinf(clamped.boundaries[6].hi));
  CHECK(clamped.excluded.empty());

  cfg.clamp_above = false;
  const auto dropped = partition_groups(deg, GroupMetric::degree, nodes, cfg);
  CHECK(dropped.members()[6].size() == 3);
  CHECK(dropped.excluded.size() == 6);
  CHECK(dropped.group(nodes.back()) == -1);
}

TEST_CASE("small groups merge into the lower neighbor") {
  // 20 nodes of degree 1, 3 of degree 2, 20 of degree 3
  std::vector<double> deg(20, 1.0);
  deg.insert(deg.end(), 3, 2.0);
  deg.insert(deg.end(), 20, 3.0);
  const auto p = partition_groups(deg, GroupMetric::degree, iota_nodes(deg.size()));
  REQUIRE(p.num_groups() == 2);
  CHECK(p.members()[0].size() == 23);
  CHECK(p.boundaries[0].hi == 2.0);

  std::vector<double> lone(3, 1.0);
  lone.insert(lone.end(), 20, 2.0);
  lone.insert(lone.end(), 20, 3.0);
  const auto q = partition_groups(lone, GroupMetric::degree, iota_nodes(lone.size()));
  REQUIRE(q.num_groups() == 2);
  CHECK(q.members()[0].size() == 23);

  const std::vector<double> flat(30, 1.0);
  CHECK_THROWS_AS(partition_groups(flat, GroupMetric::degree, iota_nodes(30)), ValidationError);
}

TEST_CASE("uniform lps values give even bins") {
  std::vector<double> v(700);
  for (std::size_t i = 0; i < 700; ++i) v[i] = static_cast<double>(i) / 100.0;
  PartitionConfig cfg;
  cfg.outlier_quantile.reset();
  const auto p = partition_groups(v, GroupMetric::lps, iota_nodes(700), cfg);
  REQUIRE(p.num_groups() == 7);
  for (const auto& m : p.members()) CHECK(std::abs(static_cast<int>(m.size()) - 100) <= 1);
  for (std::size_t g = 1; g < 7; ++g) CHECK(p.boundaries[g].lo == doctest::Approx(p.boundaries[g - 1].hi));
  CHECK(p.boundaries[0].lo == 0.0);
  CHECK(p.boundaries[6].hi == 6.99);
}

TEST_CASE("outlier clipping puts extreme values in the top bin") {
  std::vector<double> v(200);
  for (std::size_t i = 0; i < 200; ++i) v[i] = static_cast<double>(i % 100) / 100.0;
  v[0] = 1000.0;
  const auto p = partition_groups(v, GroupMetric::lps, iota_nodes(200), PartitionConfig{7, 1, 0.99, true});
  CHECK(p.group(0) == static_cast<int>(p.num_groups()) - 1);
  CHECK(p.boundaries.back().hi < 2.0);
  // without clipping the outlier leaves everything else in bin 0
  PartitionConfig raw{7, 1, std::nullopt, true};
  const auto q = partition_groups(v, GroupMetric::lps, iota_nodes(200), raw);
  REQUIRE(q.num_groups() == 2);
  CHECK(q.members()[0].size() == 199);
}

TEST_CASE("affine rescaling keeps lps groups") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<double> v(300), w(300), z(300);
    for (std::size_t i = 0; i < 300; ++i) {
      v[i] = rng.uniform_real() * rng.uniform_real();
      w[i] = 4.0 * v[i];
      z[i] = 0.25 * v[i] + 3.0;
    }
    PartitionConfig cfg;
    cfg.outlier_quantile.reset();
    cfg.min_group_size = 5;
    const auto nodes = iota_nodes(300);
    const auto a = partition_groups(v, GroupMetric::lps, nodes, cfg);
    const auto b = partition_groups(w, GroupMetric::lps, nodes, cfg);
    const auto c = partition_groups(z, GroupMetric::lps, nodes, cfg);
    CHECK(a.group_of == b.group_of);
    CHECK(a.group_of == c.group_of);
  }
}

TEST_CASE("partition covers the test nodes once") {
  Rng rng(5);
  std::vector<double> v(500);
  for (auto& x : v) x = rng.uniform_real();
  const auto test = testutil::random_subset(500, 200, 8);
  for (GroupMetric m : {GroupMetric::lps, GroupMetric::degree}) {
    std::vector<double> vals = v;
    if (m == GroupMetric::degree)
      for (auto& x : vals) x = 1.0 + std::floor(x * 9.0);
    const auto p = partition_groups(vals, m, test);
    std::set<Index> seen;
    for (const auto& [node, g] : p.group_of) {
      CHECK(seen.insert(node).second);
      CHECK(g >= 0);
      CHECK(g < static_cast<int>(p.num_groups()));
    }
    for (Index x : p.excluded) CHECK(seen.insert(x).second);
    CHECK(seen == std::set<Index>(test.begin(), test.end()));
    for (const auto& members : p.members()) CHECK(members.size() >= 10);
    for (std::size_t g = 1; g < p.num_groups(); ++g) CHECK(p.boundaries[g - 1].hi <= p.boundaries[g].lo);
  }
}

TEST_CASE("json round trips") {
  TempDir dir;
  const auto ops = symmetric_normalize(testutil::random_connected_graph(30, 0.1, 4));
  const auto mask = LabelMask::from_nodes(30, testutil::random_subset(30, 4, 1));
  const auto s = lps_scores(ops, mask, 0.1);
  write_lps_json(s, dir / "lps.json", nlohmann::json{{"k", 1}});
  const auto back = read_lps_json(dir / "lps.json");
  CHECK(back.scores == s.scores);
  CHECK(back.alpha == 0.1);

  std::vector<double> deg;
  for (int i = 0; i < 60; ++i) deg.push_back(1 + i % 9);
  const auto p = partition_groups(deg, GroupMetric::degree, iota_nodes(60), PartitionConfig{7, 1, 0.99, true});
  write_partition_json(p, dir / "p.json");
  const auto q = read_partition_json(dir / "p.json");
  CHECK(q.metric == p.metric);
  CHECK(q.group_of == p.group_of);
  REQUIRE(q.boundaries.size() == p.boundaries.size());
  CHECK(std::isinf(q.boundaries.back().hi));
}

TEST_CASE("quantile interpolates") {
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({5, 1}, 1.0) == 5.0);
  CHECK(quantile({5, 1}, 0.0) == 1.0);
  CHECK(parse_group_metric("spd") == GroupMetric::spd);
  CHECK_THROWS_AS(parse_group_metric("x"), ValidationError);
}
