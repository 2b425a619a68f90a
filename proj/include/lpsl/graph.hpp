#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "lpsl/matrix.hpp"

namespace lpsl {

struct Edge {
  Index u;
  Index v;
  double weight = 1.0;
};

/// Undirected weighted graph. Every undirected edge {u, v} is stored as the
/// two arcs (u, v) and (v, u); a self-loop is stored once.
class Graph {
 public:
  Graph() = default;

  /// Builds a symmetric CSR graph on nodes [0, n). An edge listed in both
  /// directions is kept once; a repeat with a different weight is an error.
  static Graph from_edges(std::size_t n, std::span<const Edge> edges);

  std::size_t num_nodes() const { return adjacency_.rows(); }
  /// Stored arcs (2x undirected edges, minus self-loops counted once).
  std::size_t num_arcs() const { return adjacency_.nnz(); }
  std::size_t num_edges() const;

  const CsrMatrix& adjacency() const { return adjacency_; }
  std::span<const double> degrees() const { return degrees_; }

  /// One line per undirected edge (u <= v) in "u v w" form.
  std::vector<Edge> undirected_edges() const;

 private:
  CsrMatrix adjacency_;
  std::vector<double> degrees_;
};

enum class SelfLoopPolicy { reject, add_self_loop };

/// Ã = D^{-1/2} A D^{-1/2} and L̃ = I - Ã.
struct NormalizedOperators {
  CsrMatrix norm_adj;
  CsrMatrix norm_lap;

  std::size_t size() const { return norm_adj.rows(); }
};

/// Under add_self_loop, every zero-degree node first receives a self-loop of
/// weight 1. Throws ValidationError on a zero-degree node under reject.
NormalizedOperators symmetric_normalize(const Graph& graph, SelfLoopPolicy policy = SelfLoopPolicy::reject);

struct Dataset {
  Graph graph;
  DenseMatrix features;
  std::vector<int> classes;
  int num_classes = 0;
  std::map<std::string, std::vector<Index>> masks;

  std::size_t num_nodes() const { return graph.num_nodes(); }
};

/// Edge list: "u v" or "u v w" per line, '#' comments. When `num_nodes` is 0
/// the node count is max id + 1.
std::vector<Edge> read_edge_list(const std::filesystem::path& path);
Graph load_graph(const std::filesystem::path& path, std::size_t num_nodes = 0,
                 SelfLoopPolicy policy = SelfLoopPolicy::reject);
void write_edge_list(const Graph& graph, const std::filesystem::path& path);

DenseMatrix read_features_csv(const std::filesystem::path& path);
/// "node_id class_id" per line; every node in [0, n) must appear once.
std::vector<int> read_labels(const std::filesystem::path& path, std::size_t num_nodes);

/// The node count comes from the feature file. Under the reject policy a
/// node without edges is an error (ids must be dense).
Dataset load_dataset(const std::filesystem::path& graph_path, const std::filesystem::path& features_path,
                     const std::filesystem::path& labels_path, SelfLoopPolicy policy = SelfLoopPolicy::reject);

/// A count (`value` >= 1, integral) or a fraction in (0, 1).
struct Amount {
  double value = 0.0;
  bool fraction = false;

  static Amount count(std::size_t k) { return {static_cast<double>(k), false}; }
  static Amount ratio(double f) { return {f, true}; }
  /// "20" -> count, "0.6" or "60%" -> fraction.
  static Amount parse(const std::string& text);
  std::size_t resolve(std::size_t total) const;
  std::string to_string() const;
};

struct SplitAssignment {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
  std::uint64_t seed = 0;
  Amount per_class;
};

/// Per class (ascending class id) a seeded shuffle of that class's nodes
/// picks the training nodes; the remaining nodes, in ascending id order, are
/// shuffled once and the first n_val become validation, the next n_test test.
/// Output lists are sorted ascending. Fractions of per_class apply to each
/// class size; fractions of n_val / n_test apply to the node count.
SplitAssignment make_split(const Dataset& dataset, Amount per_class, Amount n_val, Amount n_test,
                           std::uint64_t seed);

void write_split(const SplitAssignment& split, const std::filesystem::path& path,
                 const nlohmann::json& config = nullptr);
SplitAssignment read_split(const std::filesystem::path& path, std::size_t num_nodes);

/// Indicator of labeled nodes (the diagonal of T) plus the sorted id list.
struct LabelMask {
  std::vector<std::uint8_t> indicator;
  std::vector<Index> labeled;

  static LabelMask from_nodes(std::size_t n, std::span<const Index> nodes);
  std::size_t size() const { return indicator.size(); }
  bool is_labeled(std::size_t i) const { return indicator[i] != 0; }
};

}  // namespace lpsl
