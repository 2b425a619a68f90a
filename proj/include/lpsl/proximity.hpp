#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "lpsl/graph.hpp"

namespace lpsl {

/// Label Proximity Scores: s = (I - (1 - alpha) Ã)^{-1} t, with t the 0/1
/// labeled indicator. No leading alpha factor is applied.
struct LpsVector {
  std::vector<double> scores;
  double alpha = 0.1;
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Neumann iteration s <- t + (1 - alpha) Ã s until
/// ||(I - (1 - alpha) Ã) s - t||_inf <= tol.
LpsVector lps_scores(const NormalizedOperators& ops, const LabelMask& mask, double alpha, double tol = 1e-10,
                     std::size_t max_iter = 10000);

inline constexpr int kUnreachable = std::numeric_limits<int>::max();

/// Hop distance to the nearest labeled node (multi-source BFS). Nodes with
/// no path to a labeled node get kUnreachable.
std::vector<int> spd_to_labeled(const Graph& graph, const LabelMask& mask);

enum class GroupMetric { degree, spd, lps };

std::string to_string(GroupMetric metric);
GroupMetric parse_group_metric(const std::string& name);

struct PartitionConfig {
  int num_groups = 7;
  std::size_t min_group_size = 10;
  /// LPS only: values above this quantile of the test values are clipped to it.
  std::optional<double> outlier_quantile = 0.99;
  /// degree/spd only: values above num_groups join the last group when true,
  /// otherwise those nodes are excluded.
  bool clamp_above = true;
};

/// Closed value range [lo, hi] of one group. For the last degree/spd group
/// under clamping, hi is +inf.
struct GroupRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct GroupPartition {
  GroupMetric metric = GroupMetric::lps;
  std::vector<GroupRange> boundaries;
  /// (node, group) sorted by node.
  std::vector<std::pair<Index, int>> group_of;
  /// Test nodes left out (degree/spd above range when clamp_above is off).
  std::vector<Index> excluded;

  std::size_t num_groups() const { return boundaries.size(); }
  std::vector<std::vector<Index>> members() const;
  /// Group of `node`, or -1 when the node is not assigned.
  int group(Index node) const;
};

/// Degree / spd: one group per raw value 1..num_groups. LPS: clip outliers,
/// then num_groups equal-width bins over [min, max]. Afterwards any group with
/// fewer than min_group_size members joins its lower-index neighbor (group 0
/// joins group 1). Throws ValidationError when fewer than two groups remain.
GroupPartition partition_groups(std::span<const double> values, GroupMetric metric,
                                std::span<const Index> test_nodes, const PartitionConfig& config = {});

void write_lps_json(const LpsVector& lps, const std::filesystem::path& path, const nlohmann::json& config = nullptr);
LpsVector read_lps_json(const std::filesystem::path& path);
void write_partition_json(const GroupPartition& partition, const std::filesystem::path& path,
                          const nlohmann::json& config = nullptr);
GroupPartition read_partition_json(const std::filesystem::path& path);

/// Linear-interpolation quantile of unsorted values (q in [0, 1]).
double quantile(std::vector<double> values, double q);

}  // namespace lpsl
