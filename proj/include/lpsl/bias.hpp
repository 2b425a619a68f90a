#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "lpsl/proximity.hpp"

namespace lpsl {

struct GroupStat {
  int id = 0;
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct GroupAccuracy {
  std::vector<GroupStat> groups;  // nonempty groups only, ascending id
  std::size_t total = 0;
  double average = 0.0;  // sum N_i A_i / N
  std::vector<int> empty_groups;
};

/// Counts per group of the partition. Groups without members are left out
/// and listed in `empty_groups`.
GroupAccuracy group_accuracy(std::span<const int> predicted, std::span<const int> truth,
                             const GroupPartition& partition);

/// Builds group statistics from (n, correct) pairs; group ids are positions.
GroupAccuracy group_accuracy_from_counts(std::span<const std::pair<std::size_t, std::size_t>> groups);

struct BiasReport {
  std::string metric;
  GroupAccuracy accuracy;
  std::vector<GroupRange> boundaries;
  double wdp = 0.0;
  double wsd = 0.0;
  std::optional<double> wcv;  // empty when the average accuracy is 0
  nlohmann::json config;
};

/// WDP = sum N_i |A_i - A| / N, WSD = sqrt(sum N_i (A_i - A)^2 / N), WCV = WSD / A.
BiasReport bias_metrics(const GroupAccuracy& accuracy);
BiasReport bias_report(std::span<const int> predicted, std::span<const int> truth, const GroupPartition& partition,
                       const nlohmann::json& config = nullptr);

nlohmann::json to_json(const BiasReport& report);
void write_bias_report(const BiasReport& report, const std::filesystem::path& path);
/// "group,lo,hi,n,correct,accuracy" rows.
void write_group_csv(const BiasReport& report, const std::filesystem::path& path);

}  // namespace lpsl
