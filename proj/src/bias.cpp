#include "lpsl/bias.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "lpsl/error.hpp"

namespace lpsl {

using nlohmann::json;

namespace {

void finish(GroupAccuracy& acc) {
  std::size_t correct = 0;
  acc.total = 0;
  for (auto& g : acc.groups) {
    if (g.correct > g.n) throw ValidationError("group has more correct predictions than members");
    g.accuracy = static_cast<double>(g.correct) / static_cast<double>(g.n);
    acc.total += g.n;
    correct += g.correct;
  }
  acc.average = acc.total ? static_cast<double>(correct) / static_cast<double>(acc.total) : 0.0;
}

}  // namespace

GroupAccuracy group_accuracy(std::span<const int> predicted, std::span<const int> truth,
                             const GroupPartition& partition) {
  const std::size_t k = partition.num_groups();
  std::vector<GroupStat> stats(k);
  for (std::size_t g = 0; g < k; ++g) stats[g].id = static_cast<int>(g);
  for (const auto& [node, g] : partition.group_of) {
    const auto i = static_cast<std::size_t>(node);
    if (node < 0 || i >= predicted.size() || i >= truth.size()) {
      throw ValidationError("node " + std::to_string(node) + " of the partition has no prediction");
    }
    if (g < 0 || static_cast<std::size_t>(g) >= k) throw ValidationError("group index out of range");
    auto& s = stats[static_cast<std::size_t>(g)];
    ++s.n;
    if (predicted[i] == truth[i]) ++s.correct;
  }
  GroupAccuracy out;
  for (auto& s : stats) {
    if (s.n == 0) out.empty_groups.push_back(s.id);
    else out.groups.push_back(s);
  }
  finish(out);
  return out;
}

GroupAccuracy group_accuracy_from_counts(std::span<const std::pair<std::size_t, std::size_t>> groups) {
  GroupAccuracy out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto [n, correct] = groups[g];
    if (n == 0) {
      out.empty_groups.push_back(static_cast<int>(g));
      continue;
    }
    out.groups.push_back({static_cast<int>(g), n, correct, 0.0});
  }
  finish(out);
  return out;
}

BiasReport bias_metrics(const GroupAccuracy& accuracy) {
  if (accuracy.total == 0) throw ValidationError("bias metrics need at least one evaluated node");
  // With c_i correct of N_i and C of N overall, A_i - A = (c_i N - N_i C) / (N_i N).
  // The numerators are integers, so equal accuracies give exact zeros.
  const auto total = static_cast<double>(accuracy.total);
  double correct = 0.0;
  for (const auto& g : accuracy.groups) correct += static_cast<double>(g.correct);
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (const auto& g : accuracy.groups) {
    const double dev = static_cast<double>(g.correct) * total - static_cast<double>(g.n) * correct;
    abs_sum += std::abs(dev);
    sq_sum += dev * dev / static_cast<double>(g.n);
  }
  BiasReport r;
  r.accuracy = accuracy;
  r.wdp = abs_sum / (total * total);
  r.wsd = std::sqrt(sq_sum / (total * total * total));
  if (correct > 0.0) r.wcv = r.wsd * total / correct;
  return r;
}

BiasReport bias_report(std::span<const int> predicted, std::span<const int> truth, const GroupPartition& partition,
                       const json& config) {
  BiasReport r = bias_metrics(group_accuracy(predicted, truth, partition));
  r.metric = to_string(partition.metric);
  r.boundaries = partition.boundaries;
  r.config = config;
  return r;
}

json to_json(const BiasReport& report) {
  json groups = json::array();
  for (const auto& g : report.accuracy.groups) {
    json entry{{"id", g.id}, {"n", g.n}, {"correct", g.correct}, {"acc", g.accuracy}};
    if (static_cast<std::size_t>(g.id) < report.boundaries.size()) {
      const auto& b = report.boundaries[static_cast<std::size_t>(g.id)];
      entry["range"] = {std::isfinite(b.lo) ? json(b.lo) : json(nullptr), std::isfinite(b.hi) ? json(b.hi) : json(nullptr)};
    }
    groups.push_back(entry);
  }
  json doc{{"metric", report.metric},
           {"groups", groups},
           {"n_total", report.accuracy.total},
           {"acc_avg", report.accuracy.average},
           {"wdp", report.wdp},
           {"wsd", report.wsd},
           {"wcv", report.wcv ? json(*report.wcv) : json(nullptr)},
           {"empty_groups", report.accuracy.empty_groups}};
  if (!report.config.is_null()) doc["config"] = report.config;
  return doc;
}

void write_bias_report(const BiasReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_json(report).dump(1) << '\n';
}

void write_group_csv(const BiasReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "group,lo,hi,n,correct,accuracy\n";
  char buf[128];
  for (const auto& g : report.accuracy.groups) {
    double lo = NAN, hi = NAN;
    if (static_cast<std::size_t>(g.id) < report.boundaries.size()) {
      lo = report.boundaries[static_cast<std::size_t>(g.id)].lo;
      hi = report.boundaries[static_cast<std::size_t>(g.id)].hi;
    }
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%zu,%zu,%.17g\n", g.id, lo, hi, g.n, g.correct, g.accuracy);
    out << buf;
  }
}

}  // namespace lpsl
