#pragma once

#include <unistd.h>

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lpsl/graph.hpp"
#include "lpsl/random.hpp"

namespace testutil {

using lpsl::Index;

// Connected graph: random spanning tree plus extra edges with probability p.
inline lpsl::Graph random_connected_graph(std::size_t n, double p, std::uint64_t seed, bool weighted = false) {
  lpsl::Rng rng(seed);
  std::vector<lpsl::Edge> edges;
  auto weight = [&] { return weighted ? 0.5 + 2.0 * rng.uniform_real() : 1.0; };
  for (std::size_t i = 1; i < n; ++i) {
    const auto j = static_cast<Index>(rng.uniform_index(i));
    edges.push_back({static_cast<Index>(i), j, weight()});
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.uniform_real() < p) edges.push_back({static_cast<Index>(i), static_cast<Index>(j), weight()});
    }
  }
  // Tree edges may repeat as extra edges; keep the first weight.
  std::vector<lpsl::Edge> unique;
  std::vector<std::vector<bool>> seen(n, std::vector<bool>(n, false));
  for (const auto& e : edges) {
    const auto a = std::min(e.u, e.v), b = std::max(e.u, e.v);
    if (seen[a][b]) continue;
    seen[a][b] = true;
    unique.push_back(e);
  }
  return lpsl::Graph::from_edges(n, unique);
}

inline lpsl::Graph path_graph(std::size_t n) {
  std::vector<lpsl::Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back({static_cast<Index>(i), static_cast<Index>(i + 1)});
  return lpsl::Graph::from_edges(n, edges);
}

inline Eigen::MatrixXd to_eigen(const lpsl::DenseMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

inline Eigen::MatrixXd to_eigen(const lpsl::CsrMatrix& m) { return to_eigen(m.to_dense()); }

inline lpsl::DenseMatrix from_eigen(const Eigen::MatrixXd& m) {
  lpsl::DenseMatrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

// Dense D^{-1/2} A D^{-1/2} straight from the adjacency.
inline Eigen::MatrixXd dense_norm_adj(const lpsl::Graph& g) {
  const Eigen::MatrixXd a = to_eigen(g.adjacency());
  const Eigen::VectorXd d = a.rowwise().sum();
  const Eigen::VectorXd inv = d.array().sqrt().inverse();
  return inv.asDiagonal() * a * inv.asDiagonal();
}

inline std::vector<Index> random_subset(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<Index> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<Index>(i);
  lpsl::Rng rng(seed);
  rng.shuffle(std::span<Index>(ids));
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline lpsl::DenseMatrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  lpsl::Rng rng(seed);
  lpsl::DenseMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = scale * (2.0 * rng.uniform_real() - 1.0);
  return m;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("lpsl_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Planted-partition graph with class-correlated sparse binary features,
// written as edge list / feature CSV / label files in `dir`.
inline void write_toy_dataset(const std::filesystem::path& dir, std::size_t n, int classes, std::uint64_t seed) {
  lpsl::Rng rng(seed);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
  std::ofstream edges(dir / "toy.edges");
  for (std::size_t i = 1; i < n; ++i) edges << i << ' ' << rng.uniform_index(i) << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = y[i] == y[j] ? 0.06 : 0.004;
      if (rng.uniform_real() < p) edges << i << ' ' << j << '\n';
    }
  }
  std::ofstream feats(dir / "toy.features.csv");
  const int d = 4 * classes;
  for (std::size_t i = 0; i < n; ++i) {
    for (int f = 0; f < d; ++f) {
      const bool own = f / 4 == y[i];
      const int bit = rng.uniform_real() < (own ? 0.5 : 0.1) ? 1 : 0;
      feats << (f ? "," : "") << bit;
    }
    feats << '\n';
  }
  std::ofstream labels(dir / "toy.labels");
  for (std::size_t i = 0; i < n; ++i) labels << i << ' ' << y[i] << '\n';
}

inline std::string cora(const std::string& name) { return std::string(LPSL_DATA_DIR) + "/cora/" + name; }

}  // namespace testutil
