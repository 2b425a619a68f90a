#include "lpsl/proximity.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

#include "json.hpp"

#include "lpsl/error.hpp"

namespace lpsl {

LpsVector lps_scores(const NormalizedOperators& ops, const LabelMask& mask, double alpha, double tol,
                     std::size_t max_iter) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
  const std::size_t n = ops.size();
  if (mask.size() != n) throw ValidationError("label mask size does not match graph");
  if (mask.labeled.empty()) throw ValidationError("LPS needs at least one labeled node");

  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = mask.is_labeled(i) ? 1.0 : 0.0;
  const double damp = 1.0 - alpha;

  LpsVector out;
  out.alpha = alpha;
  out.scores = t;
  // residual of s_k equals (1 - alpha) * Ã (s_k - s_{k-1}), so one product per step suffices
  std::vector<double> as = ops.norm_adj.multiply(out.scores);
  for (std::size_t it = 0;; ++it) {
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      res = std::max(res, std::abs(out.scores[i] - damp * as[i] - t[i]));
    }
    out.residual = res;
    out.iterations = it;
    if (res <= tol) return out;
    if (it == max_iter) break;
    for (std::size_t i = 0; i < n; ++i) out.scores[i] = t[i] + damp * as[i];
    as = ops.norm_adj.multiply(out.scores);
  }
  throw NumericalError("LPS iteration did not reach tolerance " + std::to_string(tol) + " within " +
                       std::to_string(max_iter) + " iterations (residual " + std::to_string(out.residual) +
                       ")");
}

std::vector<int> spd_to_labeled(const Graph& graph, const LabelMask& mask) {
  const std::size_t n = graph.num_nodes();
  if (mask.size() != n) throw ValidationError("label mask size does not match graph");
  std::vector<int> dist(n, kUnreachable);
  std::deque<Index> queue;
  for (Index v : mask.labeled) {
    dist[static_cast<std::size_t>(v)] = 0;
    queue.push_back(v);
  }
  const CsrMatrix& adj = graph.adjacency();
  while (!queue.empty()) {
    const auto u = static_cast<std::size_t>(queue.front());
    queue.pop_front();
    for (Index v : adj.row_indices(u)) {
      auto& d = dist[static_cast<std::size_t>(v)];
      if (d == kUnreachable) {
        d = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

std::string to_string(GroupMetric metric) {
  switch (metric) {
    case GroupMetric::degree: return "degree";
    case GroupMetric::spd: return "spd";
    case GroupMetric::lps: return "lps";
  }
  return "?";
}

GroupMetric parse_group_metric(const std::string& name) {
  if (name == "degree") return GroupMetric::degree;
  if (name == "spd") return GroupMetric::spd;
  if (name == "lps") return GroupMetric::lps;
  throw ValidationError("unknown group metric '" + name + "' (expected degree, spd or lps)");
}

std::vector<std::vector<Index>> GroupPartition::members() const {
  std::vector<std::vector<Index>> out(num_groups());
  for (const auto& [node, g] : group_of) out[static_cast<std::size_t>(g)].push_back(node);
  return out;
}

int GroupPartition::group(Index node) const {
  const auto it = std::lower_bound(group_of.begin(), group_of.end(), node,
                                   [](const std::pair<Index, int>& p, Index v) { return p.first < v; });
  return it != group_of.end() && it->first == node ? it->second : -1;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

// Folds undersized groups into a neighbor until every group has at least
// min_size members. Returns the old -> new index map.
std::vector<int> merge_small(std::vector<GroupRange>& ranges, std::vector<std::size_t>& counts,
                             std::size_t min_size) {
  std::vector<int> remap(ranges.size());
  for (std::size_t g = 0; g < remap.size(); ++g) remap[g] = static_cast<int>(g);
  while (ranges.size() > 1) {
    std::size_t small = ranges.size();
    for (std::size_t g = 0; g < ranges.size(); ++g) {
      if (counts[g] < min_size) {
        small = g;
        break;
      }
    }
    if (small == ranges.size()) break;
    const std::size_t into = small == 0 ? 1 : small - 1;
    const std::size_t lo = std::min(small, into);
    const std::size_t hi = std::max(small, into);
    ranges[lo].hi = ranges[hi].hi;
    counts[lo] += counts[hi];
    ranges.erase(ranges.begin() + static_cast<std::ptrdiff_t>(hi));
    counts.erase(counts.begin() + static_cast<std::ptrdiff_t>(hi));
    for (int& r : remap) {
      if (r == static_cast<int>(hi)) r = static_cast<int>(lo);
      else if (r > static_cast<int>(hi)) --r;
    }
  }
  return remap;
}

}  // namespace

GroupPartition partition_groups(std::span<const double> values, GroupMetric metric,
                                std::span<const Index> test_nodes, const PartitionConfig& config) {
  if (config.num_groups < 2) throw ValidationError("num_groups must be at least 2");
  const auto k = static_cast<std::size_t>(config.num_groups);
  GroupPartition out;
  out.metric = metric;

  std::vector<Index> nodes(test_nodes.begin(), test_nodes.end());
  std::sort(nodes.begin(), nodes.end());
  if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) {
    throw ValidationError("duplicate test node");
  }
  for (Index v : nodes) {
    if (v < 0 || static_cast<std::size_t>(v) >= values.size()) {
      throw ValidationError("test node " + std::to_string(v) + " has no value");
    }
  }

  std::vector<GroupRange> ranges(k);
  std::vector<int> raw;  // bin per entry of `nodes`, -1 when excluded
  raw.reserve(nodes.size());

  if (metric == GroupMetric::lps) {
    std::vector<double> v;
    v.reserve(nodes.size());
    for (Index node : nodes) v.push_back(values[static_cast<std::size_t>(node)]);
    if (v.empty()) throw ValidationError("no test nodes to partition");
    for (double x : v) {
      if (!std::isfinite(x)) throw ValidationError("non-finite LPS value");
    }
    if (config.outlier_quantile) {
      const double cap = quantile(v, *config.outlier_quantile);
      for (double& x : v) x = std::min(x, cap);
    }
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double lo = *mn;
    const double width = (*mx - lo) / static_cast<double>(k);
    for (std::size_t g = 0; g < k; ++g) {
      ranges[g].lo = lo + static_cast<double>(g) * width;
      ranges[g].hi = g + 1 == k ? *mx : lo + static_cast<double>(g + 1) * width;
    }
    for (double x : v) {
      std::size_t g = width > 0.0 ? static_cast<std::size_t>(std::floor((x - lo) / width)) : 0;
      raw.push_back(static_cast<int>(std::min(g, k - 1)));
    }
  } else {
    for (std::size_t g = 0; g < k; ++g) {
      ranges[g].lo = static_cast<double>(g + 1);
      ranges[g].hi = static_cast<double>(g + 1);
    }
    if (config.clamp_above) ranges[k - 1].hi = std::numeric_limits<double>::infinity();
    for (Index node : nodes) {
      const double x = values[static_cast<std::size_t>(node)];
      if (std::isnan(x)) throw ValidationError("NaN group value");
      const double key = std::max(1.0, std::floor(x));
      if (key > static_cast<double>(k) && !config.clamp_above) {
        raw.push_back(-1);
        out.excluded.push_back(node);
        continue;
      }
      raw.push_back(static_cast<int>(std::min(key, static_cast<double>(k))) - 1);
    }
  }

  std::vector<std::size_t> counts(k, 0);
  for (int g : raw) {
    if (g >= 0) ++counts[static_cast<std::size_t>(g)];
  }
  const std::vector<int> remap = merge_small(ranges, counts, std::max<std::size_t>(config.min_group_size, 1));
  if (ranges.size() < 2) {
    throw ValidationError("fewer than two groups remain after merging (" + std::to_string(nodes.size()) +
                          " test nodes, min_group_size " + std::to_string(config.min_group_size) + ")");
  }
  out.boundaries = std::move(ranges);
  for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
    if (raw[idx] >= 0) out.group_of.emplace_back(nodes[idx], remap[static_cast<std::size_t>(raw[idx])]);
  }
  return out;
}

namespace {

using nlohmann::json;

json bound_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_lps_json(const LpsVector& lps, const std::filesystem::path& path, const json& config) {
  json doc;
  doc["alpha"] = lps.alpha;
  doc["iterations"] = lps.iterations;
  doc["residual"] = lps.residual;
  doc["scores"] = lps.scores;
  if (!config.is_null()) doc["config"] = config;
  write_json(doc, path);
}

LpsVector read_lps_json(const std::filesystem::path& path) {
  const json doc = read_json(path);
  try {
    LpsVector out;
    out.alpha = doc.at("alpha").get<double>();
    out.scores = doc.at("scores").get<std::vector<double>>();
    out.iterations = doc.value("iterations", std::size_t{0});
    out.residual = doc.value("residual", 0.0);
    return out;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_partition_json(const GroupPartition& partition, const std::filesystem::path& path, const json& config) {
  json doc;
  doc["metric"] = to_string(partition.metric);
  json bounds = json::array();
  for (const auto& r : partition.boundaries) bounds.push_back({bound_to_json(r.lo), bound_to_json(r.hi)});
  doc["boundaries"] = bounds;
  json groups = json::object();
  for (const auto& [node, g] : partition.group_of) groups[std::to_string(node)] = g;
  doc["groups"] = groups;
  doc["excluded"] = partition.excluded;
  if (!config.is_null()) doc["config"] = config;
  write_json(doc, path);
}

GroupPartition read_partition_json(const std::filesystem::path& path) {
  const json doc = read_json(path);
  try {
    GroupPartition out;
    out.metric = parse_group_metric(doc.at("metric").get<std::string>());
    for (const auto& b : doc.at("boundaries")) {
      GroupRange r;
      r.lo = b.at(0).is_null() ? -std::numeric_limits<double>::infinity() : b.at(0).get<double>();
      r.hi = b.at(1).is_null() ? std::numeric_limits<double>::infinity() : b.at(1).get<double>();
      out.boundaries.push_back(r);
    }
    for (const auto& [key, g] : doc.at("groups").items()) {
      const int gi = g.get<int>();
      if (gi < 0 || static_cast<std::size_t>(gi) >= out.boundaries.size()) {
        throw ValidationError(path.string() + ": group index out of range");
      }
      out.group_of.emplace_back(static_cast<Index>(std::stol(key)), gi);
    }
    std::sort(out.group_of.begin(), out.group_of.end());
    if (doc.contains("excluded")) out.excluded = doc.at("excluded").get<std::vector<Index>>();
    return out;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const std::logic_error&) {
    throw ValidationError(path.string() + ": bad node id");
  }
}

}  // namespace lpsl
