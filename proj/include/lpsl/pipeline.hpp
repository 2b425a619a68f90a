#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "lpsl/bias.hpp"
#include "lpsl/graph.hpp"
#include "lpsl/propagation.hpp"
#include "lpsl/proximity.hpp"
#include "lpsl/solver.hpp"

namespace lpsl {

enum class Predictor { lp, appnp, gcn };
/// lpsl: learned B; ppr: ppr_iterative(ppr_alpha, ppr_steps); adjacency: one
/// Ã step; identity: P = I; file: a structure file written by `learn`.
enum class OperatorSource { lpsl, ppr, adjacency, identity, file };

struct ModelSpec {
  std::string name;
  Predictor predictor = Predictor::lp;
  OperatorSource source = OperatorSource::ppr;
  std::optional<double> lambda;  // overrides solver.lambda for lpsl
  double ppr_alpha = 0.1;
  std::size_t ppr_steps = 10;
  std::filesystem::path structure;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& doc);

/// The effective configuration of a run. `doc` is the merged JSON document
/// (defaults < config file < flags) and is embedded in every artifact.
struct RunConfig {
  nlohmann::json doc;

  std::filesystem::path graph, features, labels;
  SelfLoopPolicy self_loops = SelfLoopPolicy::reject;
  bool normalize_features = true;

  std::filesystem::path split_file;
  std::filesystem::path train_nodes;
  Amount per_class = Amount::count(20);
  Amount n_val = Amount::count(500);
  Amount n_test = Amount::count(1000);
  std::uint64_t seed = 0;

  double lps_alpha = 0.1;
  double lps_tol = 1e-10;
  std::size_t lps_max_iter = 10000;

  GroupMetric group_metric = GroupMetric::lps;
  PartitionConfig partition;
  std::filesystem::path groups_file;
  std::filesystem::path lps_file;

  SolverConfig solver;
  std::string solver_mode = "dense";

  ModelSpec model;
  HeadConfig head;

  std::size_t sweep_seeds = 10;
  std::uint64_t sweep_first_seed = 0;
  std::vector<ModelSpec> sweep_models;

  std::filesystem::path out_dir;
  std::filesystem::path out;
  std::filesystem::path csv;
  std::filesystem::path checkpoint;
  std::filesystem::path prediction;

  std::size_t threads = 1;

  static nlohmann::json defaults();
  /// Validates the document; unknown keys throw ValidationError.
  static RunConfig from_json(const nlohmann::json& doc);
};

/// Recursively overlays `patch` onto `base`; keys absent from `base` are errors.
void merge_config(nlohmann::json& base, const nlohmann::json& patch, const std::string& where = "");

/// Relative path values in a config file are taken relative to its directory.
nlohmann::json load_config_file(const std::filesystem::path& path);

/// LPSL_THREADS caps the requested thread count.
std::size_t effective_threads(std::size_t requested);

/// Divides each feature row by its sum (rows summing to 0 are left alone).
void row_normalize(DenseMatrix& features);

struct Context {
  Dataset dataset;
  NormalizedOperators ops;
};

Context load_context(const RunConfig& config);

SplitAssignment make_run_split(const Context& ctx, const RunConfig& config, std::uint64_t seed);

struct ModelOutcome {
  ModelSpec spec;
  double test_accuracy = 0.0;
  BiasReport bias;
  std::optional<SolveMeta> solve;
  std::vector<int> labels;
};

struct SplitOutcome {
  std::uint64_t seed = 0;
  LpsVector lps;
  GroupPartition partition;
  std::vector<ModelOutcome> models;
};

using Logger = std::function<void(const std::string&)>;

/// Learns B for `mask` (dense or sparse per config.solver_mode).
PropagationOperator learn_operator(const NormalizedOperators& ops, const LabelMask& mask, const SolverConfig& solver,
                                   const std::string& mode, SolveMeta* meta);

PropagationOperator build_operator(const ModelSpec& spec, const Context& ctx, const LabelMask& mask,
                                   const RunConfig& config, SolveMeta* meta);

GroupPartition partition_for(const Context& ctx, const LabelMask& mask, std::span<const Index> test,
                             const RunConfig& config, LpsVector* lps_out);

/// Runs every model on one split. Learned operators are shared between
/// models with the same lambda.
SplitOutcome run_split(const Context& ctx, const SplitAssignment& split, const RunConfig& config,
                       std::span<const ModelSpec> models, const Logger& log = {});

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

MeanStd mean_std(std::span<const double> values);

struct ModelAggregate {
  std::string name;
  MeanStd accuracy, wdp, wsd, wcv;
  /// Mean accuracy of the k-th lowest group over the splits that have it.
  std::vector<MeanStd> group_accuracy;
};

struct SweepResult {
  std::vector<SplitOutcome> splits;
  std::vector<ModelAggregate> models;
};

SweepResult run_sweep(const Context& ctx, const RunConfig& config, std::span<const ModelSpec> models,
                      const Logger& log = {});

std::vector<ModelAggregate> aggregate(std::span<const SplitOutcome> splits);

/// "name  acc 83.10 ± 0.70  wdp ..." lines.
std::string format_aggregate(std::span<const ModelAggregate> models);

nlohmann::json to_json(const SplitOutcome& outcome);
nlohmann::json to_json(const ModelAggregate& agg);

std::vector<ModelSpec> default_sweep_models();

}  // namespace lpsl
