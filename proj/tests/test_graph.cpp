#include <Eigen/Eigenvalues>
#include <set>

#include "doctest.h"
#include "lpsl/error.hpp"
#include "lpsl/graph.hpp"
#include "test_util.hpp"

using namespace lpsl;
using testutil::TempDir;
using testutil::write_text;

TEST_CASE("single edge dataset") {
  TempDir dir;
  write_text(dir / "g.txt", "0 1\n");
  write_text(dir / "x.csv", "1,0\n0,1\n");
  write_text(dir / "y.txt", "0 0\n1 1\n");
  const Dataset ds = load_dataset(dir / "g.txt", dir / "x.csv", dir / "y.txt");
  CHECK(ds.num_nodes() == 2);
  CHECK(ds.graph.num_arcs() == 2);
  CHECK(ds.graph.num_edges() == 1);
  CHECK(ds.graph.degrees()[0] == 1.0);
  CHECK(ds.graph.degrees()[1] == 1.0);
  CHECK(ds.num_classes == 2);
  CHECK(ds.features.rows() == 2);
}

TEST_CASE("edge listed both ways is kept once") {
  TempDir dir;
  write_text(dir / "g.txt", "# comment\n0 1\n1 0\n");
  const Graph g = load_graph(dir / "g.txt");
  CHECK(g.num_edges() == 1);
  CHECK(g.num_arcs() == 2);

  write_text(dir / "bad.txt", "0 1 1.0\n1 0 2.0\n");
  CHECK_THROWS_AS(load_graph(dir / "bad.txt"), ValidationError);
}

TEST_CASE("loader errors") {
  TempDir dir;
  write_text(dir / "g.txt", "0 1\n1 2\n");
  write_text(dir / "x.csv", "1\n2\n3\n");
  write_text(dir / "y.txt", "0 0\n1 1\n2 0\n");
  CHECK_NOTHROW(load_dataset(dir / "g.txt", dir / "x.csv", dir / "y.txt"));

  write_text(dir / "far.txt", "0 1\n1 5\n");
  CHECK_THROWS_AS(load_dataset(dir / "far.txt", dir / "x.csv", dir / "y.txt"), ValidationError);

  write_text(dir / "xbad.csv", "1\nabc\n3\n");
  CHECK_THROWS_AS(load_dataset(dir / "g.txt", dir / "xbad.csv", dir / "y.txt"), ValidationError);

  write_text(dir / "ybad.txt", "0 0\n1 1\n7 0\n");
  CHECK_THROWS_AS(load_dataset(dir / "g.txt", dir / "x.csv", dir / "ybad.txt"), ValidationError);

  write_text(dir / "neg.txt", "0 1 -1\n1 2\n");
  CHECK_THROWS_AS(load_graph(dir / "neg.txt"), ValidationError);
}

TEST_CASE("zero-degree policy") {
  TempDir dir;
  write_text(dir / "g.txt", "0 1\n");
  write_text(dir / "x.csv", "1\n2\n3\n");
  write_text(dir / "y.txt", "0 0\n1 1\n2 0\n");
  CHECK_THROWS_AS(load_dataset(dir / "g.txt", dir / "x.csv", dir / "y.txt"), ValidationError);
  const Dataset ds = load_dataset(dir / "g.txt", dir / "x.csv", dir / "y.txt", SelfLoopPolicy::add_self_loop);
  const auto ops = symmetric_normalize(ds.graph, SelfLoopPolicy::add_self_loop);
  CHECK(ops.norm_adj.at(2, 2) == doctest::Approx(1.0));
  CHECK_THROWS_AS(symmetric_normalize(ds.graph, SelfLoopPolicy::reject), ValidationError);
}

TEST_CASE("normalization examples") {
  const auto two = symmetric_normalize(testutil::path_graph(2));
  CHECK(two.norm_adj.at(0, 1) == 1.0);
  CHECK(two.norm_adj.at(0, 0) == 0.0);
  CHECK(two.norm_lap.at(0, 0) == 1.0);
  CHECK(two.norm_lap.at(0, 1) == -1.0);

  const auto three = symmetric_normalize(testutil::path_graph(3));
  CHECK(three.norm_adj.at(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(three.norm_adj.at(1, 2) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(three.norm_adj.at(0, 2) == 0.0);
  CHECK(three.norm_adj.at(1, 1) == 0.0);
}

TEST_CASE("normalization matches the dense oracle") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 2 + seed % 19;
    const Graph g = testutil::random_connected_graph(n, 0.3, seed, seed % 2 == 1);
    const auto ops = symmetric_normalize(g);
    const Eigen::MatrixXd oracle = testutil::dense_norm_adj(g);
    const Eigen::MatrixXd adj = testutil::to_eigen(ops.norm_adj);
    const Eigen::MatrixXd lap = testutil::to_eigen(ops.norm_lap);
    CHECK((adj - oracle).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((adj - adj.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((lap - lap.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((adj + lap - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(adj);
    CHECK(eig.eigenvalues().minCoeff() >= -1.0 - 1e-12);
    CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("graph invariants") {
  const Graph g = testutil::random_connected_graph(25, 0.2, 7, true);
  const auto& a = g.adjacency();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double sum = 0.0;
    const auto idx = a.row_indices(i);
    const auto val = a.row_values(i);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      CHECK(a.at(idx[k], i) == val[k]);
      CHECK(val[k] >= 0.0);
      if (k) CHECK(idx[k - 1] < idx[k]);
      sum += val[k];
    }
    CHECK(g.degrees()[i] == doctest::Approx(sum).epsilon(1e-15));
  }
}

TEST_CASE("edge list round trip") {
  TempDir dir;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Graph g = testutil::random_connected_graph(30, 0.15, seed, seed % 2 == 0);
    write_edge_list(g, dir / "g.txt");
    const Graph back = load_graph(dir / "g.txt", g.num_nodes());
    CHECK(back.adjacency() == g.adjacency());
  }
}

TEST_CASE("amount parsing") {
  CHECK(Amount::parse("20").resolve(100) == 20);
  CHECK(Amount::parse("0.6").fraction);
  CHECK(Amount::parse("60%").resolve(10) == 6);
  CHECK(Amount::parse("0.2").resolve(2708) == 541);
  CHECK_THROWS_AS(Amount::parse("x"), ValidationError);
  CHECK_THROWS_AS(Amount::parse("-3"), ValidationError);
}

namespace {

Dataset toy_dataset(std::size_t n, int classes, std::uint64_t seed) {
  Dataset ds;
  ds.graph = testutil::random_connected_graph(n, 0.05, seed);
  ds.features = DenseMatrix(n, 2, 1.0);
  ds.num_classes = classes;
  for (std::size_t i = 0; i < n; ++i) ds.classes.push_back(static_cast<int>(i % classes));
  return ds;
}

void check_disjoint(const SplitAssignment& s) {
  std::set<Index> all;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    CHECK(std::is_sorted(part->begin(), part->end()));
    for (Index v : *part) CHECK(all.insert(v).second);
  }
}

}  // namespace

TEST_CASE("split determinism and sizes") {
  const Dataset ds = toy_dataset(200, 4, 3);
  const auto a = make_split(ds, Amount::count(5), Amount::count(30), Amount::count(60), 11);
  const auto b = make_split(ds, Amount::count(5), Amount::count(30), Amount::count(60), 11);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  CHECK(a.train.size() == 20);
  CHECK(a.val.size() == 30);
  CHECK(a.test.size() == 60);
  check_disjoint(a);
  std::vector<int> per(4, 0);
  for (Index v : a.train) ++per[ds.classes[v]];
  for (int k : per) CHECK(k == 5);

  const auto c = make_split(ds, Amount::count(5), Amount::count(30), Amount::count(60), 12);
  CHECK(c.train != a.train);

  CHECK_THROWS_AS(make_split(ds, Amount::count(51), Amount::count(1), Amount::count(1), 0), ValidationError);
  CHECK_THROWS_AS(make_split(ds, Amount::count(5), Amount::count(150), Amount::count(60), 0), ValidationError);
}

TEST_CASE("split file round trip") {
  TempDir dir;
  const Dataset ds = toy_dataset(100, 2, 5);
  const auto s = make_split(ds, Amount::ratio(0.6), Amount::ratio(0.2), Amount::ratio(0.2), 4);
  write_split(s, dir / "s.json", nlohmann::json{{"note", 1}});
  const auto back = read_split(dir / "s.json", 100);
  CHECK(back.train == s.train);
  CHECK(back.val == s.val);
  CHECK(back.test == s.test);
  CHECK(back.seed == 4);
  CHECK_THROWS_AS(read_split(dir / "s.json", 50), ValidationError);
}

TEST_CASE("label mask") {
  const std::vector<Index> nodes{3, 1};
  const auto m = LabelMask::from_nodes(5, nodes);
  CHECK(m.labeled == std::vector<Index>{1, 3});
  CHECK(m.is_labeled(1));
  CHECK_FALSE(m.is_labeled(0));
  const std::vector<Index> bad{5};
  CHECK_THROWS_AS(LabelMask::from_nodes(5, bad), ValidationError);
}

TEST_CASE("cora dimensions and split") {
  const Dataset ds = load_dataset(testutil::cora("cora.edges"), testutil::cora("cora.features.csv"),
                                  testutil::cora("cora.labels"));
  CHECK(ds.num_nodes() == 2708);
  CHECK(ds.graph.num_edges() == 5278);
  CHECK(ds.features.cols() == 1433);
  CHECK(ds.num_classes == 7);

  const auto s = make_split(ds, Amount::count(20), Amount::count(500), Amount::count(1000), 0);
  CHECK(s.train.size() == 140);
  CHECK(s.val.size() == 500);
  CHECK(s.test.size() == 1000);
  check_disjoint(s);

  const auto f = make_split(ds, Amount::parse("60%"), Amount::ratio(0.2), Amount::ratio(0.2), 0);
  CHECK(f.val.size() == 541);
  CHECK(f.test.size() == 541);
  check_disjoint(f);
}
