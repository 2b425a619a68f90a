#include "lpsl/graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "lpsl/error.hpp"
#include "lpsl/random.hpp"

namespace lpsl {
namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::string where(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no);
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  if (sep == ' ') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) out.push_back(line.substr(i, j - i));
      i = j;
    }
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    std::string_view field = line.substr(start, pos == std::string_view::npos ? line.npos : pos - start);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
    out.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string_view strip_comment(std::string_view line) {
  const auto hash = line.find('#');
  if (hash != std::string_view::npos) line = line.substr(0, hash);
  return line;
}

}  // namespace

Graph Graph::from_edges(std::size_t n, std::span<const Edge> edges) {
  std::vector<Triplet> arcs;
  arcs.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    if (e.u < 0 || e.v < 0 || static_cast<std::size_t>(e.u) >= n || static_cast<std::size_t>(e.v) >= n) {
      throw ValidationError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                            ") references a node id outside [0, " + std::to_string(n) + ")");
    }
    if (!std::isfinite(e.weight) || e.weight < 0.0) {
      throw ValidationError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                            ") has a negative or non-finite weight");
    }
    arcs.push_back({e.u, e.v, e.weight});
    if (e.u != e.v) arcs.push_back({e.v, e.u, e.weight});
  }
  std::sort(arcs.begin(), arcs.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<Index> indices;
  std::vector<double> values;
  for (std::size_t k = 0; k < arcs.size(); ++k) {
    const auto& a = arcs[k];
    if (k > 0 && arcs[k - 1].row == a.row && arcs[k - 1].col == a.col) {
      if (arcs[k - 1].value != a.value) {
        throw ValidationError("edge (" + std::to_string(a.row) + ", " + std::to_string(a.col) +
                              ") listed twice with conflicting weights");
      }
      continue;
    }
    indices.push_back(a.col);
    values.push_back(a.value);
    ++offsets[static_cast<std::size_t>(a.row) + 1];
  }
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];

  Graph g;
  g.adjacency_ = CsrMatrix(n, n, std::move(offsets), std::move(indices), std::move(values));
  g.degrees_.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (double w : g.adjacency_.row_values(i)) d += w;
    g.degrees_[i] = d;
  }
  return g;
}

std::size_t Graph::num_edges() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < num_nodes(); ++i) {
    for (Index j : adjacency_.row_indices(i)) {
      if (static_cast<std::size_t>(j) >= i) ++count;
    }
  }
  return count;
}

std::vector<Edge> Graph::undirected_edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < num_nodes(); ++i) {
    const auto cols = adjacency_.row_indices(i);
    const auto vals = adjacency_.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (static_cast<std::size_t>(cols[k]) >= i) out.push_back({static_cast<Index>(i), cols[k], vals[k]});
    }
  }
  return out;
}

NormalizedOperators symmetric_normalize(const Graph& graph, SelfLoopPolicy policy) {
  const std::size_t n = graph.num_nodes();
  const CsrMatrix& a = graph.adjacency();
  std::vector<double> degrees(graph.degrees().begin(), graph.degrees().end());
  std::vector<std::uint8_t> loop(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (degrees[i] > 0.0) continue;
    if (policy == SelfLoopPolicy::reject) {
      throw ValidationError("node " + std::to_string(i) +
                            " has zero degree (use the add-self-loop policy to allow isolated nodes)");
    }
    loop[i] = 1;
    degrees[i] = 1.0;
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degrees[i]);

  std::vector<Triplet> adj;
  std::vector<Triplet> lap;
  adj.reserve(a.nnz() + n);
  lap.reserve(a.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cols = a.row_indices(i);
    const auto vals = a.row_values(i);
    bool has_diag = false;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto j = static_cast<std::size_t>(cols[k]);
      const double v = vals[k] * (inv_sqrt[i] * inv_sqrt[j]);
      adj.push_back({static_cast<Index>(i), cols[k], v});
      if (j == i) {
        has_diag = true;
        lap.push_back({static_cast<Index>(i), cols[k], 1.0 - v});
      } else {
        lap.push_back({static_cast<Index>(i), cols[k], -v});
      }
    }
    if (loop[i]) {
      adj.push_back({static_cast<Index>(i), static_cast<Index>(i), 1.0});
      lap.push_back({static_cast<Index>(i), static_cast<Index>(i), 0.0});
    } else if (!has_diag) {
      lap.push_back({static_cast<Index>(i), static_cast<Index>(i), 1.0});
    }
  }
  return {CsrMatrix::from_triplets(n, n, std::move(adj)), CsrMatrix::from_triplets(n, n, std::move(lap))};
}

std::vector<Edge> read_edge_list(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(strip_comment(line), ' ');
    if (fields.empty()) continue;
    if (fields.size() != 2 && fields.size() != 3) {
      throw ValidationError(where(path, line_no) + ": expected \"u v\" or \"u v w\"");
    }
    Edge e;
    if (!parse_number(fields[0], e.u) || !parse_number(fields[1], e.v)) {
      throw ValidationError(where(path, line_no) + ": node ids must be non-negative integers");
    }
    if (e.u < 0 || e.v < 0) throw ValidationError(where(path, line_no) + ": negative node id");
    if (fields.size() == 3 && !parse_number(fields[2], e.weight)) {
      throw ValidationError(where(path, line_no) + ": non-numeric weight");
    }
    edges.push_back(e);
  }
  return edges;
}

namespace {

void check_degrees(const Graph& g, SelfLoopPolicy policy) {
  if (policy != SelfLoopPolicy::reject) return;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    if (g.degrees()[i] <= 0.0) {
      throw ValidationError("node " + std::to_string(i) +
                            " has no edges; node ids must be dense or the add-self-loop policy enabled");
    }
  }
}

}  // namespace

Graph load_graph(const std::filesystem::path& path, std::size_t num_nodes, SelfLoopPolicy policy) {
  const auto edges = read_edge_list(path);
  std::size_t n = num_nodes;
  if (n == 0) {
    for (const auto& e : edges) n = std::max<std::size_t>(n, static_cast<std::size_t>(std::max(e.u, e.v)) + 1);
  }
  Graph g = Graph::from_edges(n, edges);
  check_degrees(g, policy);
  return g;
}

void write_edge_list(const Graph& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.precision(17);
  for (const auto& e : graph.undirected_edges()) out << e.u << ' ' << e.v << ' ' << e.weight << '\n';
}

DenseMatrix read_features_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line, ',');
    if (rows == 0) cols = fields.size();
    if (fields.size() != cols) {
      throw ValidationError(where(path, line_no) + ": expected " + std::to_string(cols) + " columns, found " +
                            std::to_string(fields.size()));
    }
    for (auto f : fields) {
      double v = 0.0;
      if (!parse_number(f, v) || !std::isfinite(v)) {
        throw ValidationError(where(path, line_no) + ": non-numeric feature \"" + std::string(f) + "\"");
      }
      values.push_back(v);
    }
    ++rows;
  }
  DenseMatrix x(rows, cols);
  std::copy(values.begin(), values.end(), x.data());
  return x;
}

std::vector<int> read_labels(const std::filesystem::path& path, std::size_t num_nodes) {
  auto in = open_input(path);
  std::vector<int> classes(num_nodes, -1);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(strip_comment(line), ' ');
    if (fields.empty()) continue;
    long long node = 0;
    int cls = 0;
    if (fields.size() != 2 || !parse_number(fields[0], node) || !parse_number(fields[1], cls)) {
      throw ValidationError(where(path, line_no) + ": expected \"node_id class_id\"");
    }
    if (node < 0 || static_cast<std::size_t>(node) >= num_nodes) {
      throw ValidationError(where(path, line_no) + ": node id out of range");
    }
    if (cls < 0) throw ValidationError(where(path, line_no) + ": negative class id");
    if (classes[static_cast<std::size_t>(node)] != -1) {
      throw ValidationError(where(path, line_no) + ": node " + std::to_string(node) + " labeled twice");
    }
    classes[static_cast<std::size_t>(node)] = cls;
  }
  for (std::size_t i = 0; i < num_nodes; ++i) {
    if (classes[i] < 0) throw ValidationError(path.string() + ": node " + std::to_string(i) + " has no class");
  }
  return classes;
}

Dataset load_dataset(const std::filesystem::path& graph_path, const std::filesystem::path& features_path,
                     const std::filesystem::path& labels_path, SelfLoopPolicy policy) {
  Dataset ds;
  ds.features = read_features_csv(features_path);
  const std::size_t n = ds.features.rows();
  if (n == 0) throw ValidationError(features_path.string() + ": no feature rows");
  ds.graph = Graph::from_edges(n, read_edge_list(graph_path));
  check_degrees(ds.graph, policy);
  ds.classes = read_labels(labels_path, n);
  ds.num_classes = *std::max_element(ds.classes.begin(), ds.classes.end()) + 1;
  return ds;
}

Amount Amount::parse(const std::string& text) {
  std::string t = text;
  bool percent = false;
  if (!t.empty() && t.back() == '%') {
    percent = true;
    t.pop_back();
  }
  double v = 0.0;
  if (!parse_number(std::string_view(t), v) || !std::isfinite(v) || v < 0.0) {
    throw ValidationError("invalid count or fraction: \"" + text + "\"");
  }
  if (percent) return ratio(v / 100.0);
  if (v < 1.0 && v > 0.0) return ratio(v);
  if (v != std::floor(v)) throw ValidationError("counts must be integral: \"" + text + "\"");
  return count(static_cast<std::size_t>(v));
}

std::size_t Amount::resolve(std::size_t total) const {
  if (!fraction) return static_cast<std::size_t>(value);
  // The epsilon keeps 0.2 * 2708 style products from rounding down a unit.
  return static_cast<std::size_t>(std::floor(value * static_cast<double>(total) + 1e-9));
}

std::string Amount::to_string() const {
  if (!fraction) return std::to_string(static_cast<std::size_t>(value));
  std::ostringstream os;
  os << value * 100.0 << '%';
  return os.str();
}

SplitAssignment make_split(const Dataset& dataset, Amount per_class, Amount n_val, Amount n_test,
                           std::uint64_t seed) {
  const std::size_t n = dataset.num_nodes();
  Rng rng(seed);
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(dataset.num_classes));
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(dataset.classes[i])].push_back(static_cast<Index>(i));

  SplitAssignment split;
  split.seed = seed;
  split.per_class = per_class;
  std::vector<std::uint8_t> taken(n, 0);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& nodes = by_class[c];
    const std::size_t want = per_class.resolve(nodes.size());
    if (nodes.size() < want) {
      throw ValidationError("class " + std::to_string(c) + " has " + std::to_string(nodes.size()) +
                            " nodes, fewer than the " + std::to_string(want) + " requested per class");
    }
    rng.shuffle(std::span<Index>(nodes));
    for (std::size_t k = 0; k < want; ++k) {
      split.train.push_back(nodes[k]);
      taken[static_cast<std::size_t>(nodes[k])] = 1;
    }
  }

  std::vector<Index> rest;
  for (std::size_t i = 0; i < n; ++i) {
    if (!taken[i]) rest.push_back(static_cast<Index>(i));
  }
  const std::size_t nv = n_val.resolve(n);
  const std::size_t nt = n_test.resolve(n);
  if (nv + nt > rest.size()) {
    throw ValidationError("only " + std::to_string(rest.size()) + " nodes remain after training selection, " +
                          std::to_string(nv + nt) + " requested for validation and test");
  }
  rng.shuffle(std::span<Index>(rest));
  split.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(nv));
  split.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(nv),
                    rest.begin() + static_cast<std::ptrdiff_t>(nv + nt));
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

void write_split(const SplitAssignment& split, const std::filesystem::path& path, const nlohmann::json& config) {
  nlohmann::json j;
  j["seed"] = split.seed;
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  j["per_class"] = split.per_class.to_string();
  if (!config.is_null()) j["config"] = config;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

SplitAssignment read_split(const std::filesystem::path& path, std::size_t num_nodes) {
  auto in = open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  SplitAssignment split;
  try {
    split.seed = j.at("seed").get<std::uint64_t>();
    split.train = j.at("train").get<std::vector<Index>>();
    split.val = j.at("val").get<std::vector<Index>>();
    split.test = j.at("test").get<std::vector<Index>>();
    if (j.contains("per_class")) split.per_class = Amount::parse(j["per_class"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  std::vector<std::uint8_t> seen(num_nodes, 0);
  for (const auto* list : {&split.train, &split.val, &split.test}) {
    for (Index v : *list) {
      if (v < 0 || static_cast<std::size_t>(v) >= num_nodes) {
        throw ValidationError(path.string() + ": node id " + std::to_string(v) + " out of range");
      }
      if (seen[static_cast<std::size_t>(v)]++) {
        throw ValidationError(path.string() + ": node " + std::to_string(v) + " appears in more than one list");
      }
    }
  }
  return split;
}

LabelMask LabelMask::from_nodes(std::size_t n, std::span<const Index> nodes) {
  LabelMask m;
  m.indicator.assign(n, 0);
  for (Index v : nodes) {
    if (v < 0 || static_cast<std::size_t>(v) >= n) throw ValidationError("labeled node id out of range");
    m.indicator[static_cast<std::size_t>(v)] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (m.indicator[i]) m.labeled.push_back(static_cast<Index>(i));
  }
  return m;
}

}  // namespace lpsl
