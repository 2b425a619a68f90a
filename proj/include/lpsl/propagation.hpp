#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "lpsl/graph.hpp"
#include "lpsl/matrix.hpp"

namespace lpsl {

enum class OperatorKind { learned_dense, learned_sparse, ppr_iterative };

/// A fixed linear propagation map P applied to node signals (n x w).
class PropagationOperator {
 public:
  static PropagationOperator dense(DenseMatrix b);
  static PropagationOperator sparse(CsrMatrix b);
  /// K steps of F <- (1 - alpha) Ã F + alpha X from F = X. alpha = 0, K = 1
  /// is the plain Ã step.
  static PropagationOperator ppr_iterative(CsrMatrix norm_adj, double alpha, std::size_t steps);
  static PropagationOperator identity(std::size_t n) { return sparse(CsrMatrix::identity(n)); }

  OperatorKind kind() const { return kind_; }
  std::size_t size() const { return n_; }
  double alpha() const { return alpha_; }
  std::size_t steps() const { return steps_; }
  nlohmann::json describe() const;

  DenseMatrix apply(const DenseMatrix& x) const;
  /// Rows `rows` of P x.
  DenseMatrix apply_rows(std::span<const Index> rows, const DenseMatrix& x) const;
  /// P^T x.
  DenseMatrix apply_transpose(const DenseMatrix& x) const;
  /// P[rows, :]^T g, for g with one row per entry of `rows`.
  DenseMatrix apply_transpose_rows(std::span<const Index> rows, const DenseMatrix& g) const;

 private:
  OperatorKind kind_ = OperatorKind::learned_sparse;
  std::size_t n_ = 0;
  std::shared_ptr<const DenseMatrix> dense_;
  std::shared_ptr<const CsrMatrix> csr_;
  double alpha_ = 0.0;
  std::size_t steps_ = 0;
};

struct Prediction {
  DenseMatrix scores;
  /// argmax per node, lowest class index on ties
  std::vector<int> labels;

  static Prediction from_scores(DenseMatrix scores);
};

/// scores = P Y with Y the one-hot matrix of labeled nodes (other rows zero).
Prediction propagate_labels(const PropagationOperator& op, const LabelMask& mask, std::span<const int> classes,
                            int num_classes);

double accuracy(std::span<const int> predicted, std::span<const int> truth, std::span<const Index> nodes);

enum class HeadKind { none, linear, mlp2 };
enum class Architecture { appnp, gcn };

std::string to_string(HeadKind kind);
HeadKind parse_head_kind(const std::string& name);
std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& name);

struct HeadConfig {
  HeadKind kind = HeadKind::mlp2;
  std::size_t hidden = 64;
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  std::size_t max_epochs = 1000;
  std::size_t patience = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const HeadConfig& config);
HeadConfig head_config_from_json(const nlohmann::json& doc, HeadConfig base = {});

struct ClassifierHead {
  HeadKind kind = HeadKind::mlp2;
  Architecture arch = Architecture::appnp;
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;
  HeadConfig config;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double best_val_accuracy = 0.0;
};

struct TrainResult {
  ClassifierHead head;
  Prediction prediction;
};

/// Decoupled model: logits = P f(X), f linear or a two-layer perceptron.
TrainResult train_appnp_head(const PropagationOperator& op, const DenseMatrix& features, std::span<const int> classes,
                             int num_classes, const SplitAssignment& split, const HeadConfig& config);

/// Two propagation layers: H = relu(P X W0 + b0), logits = P H W1 + b1.
TrainResult train_gcn_head(const PropagationOperator& op, const DenseMatrix& features, std::span<const int> classes,
                           int num_classes, const SplitAssignment& split, const HeadConfig& config);

/// Inference with trained weights (no dropout).
Prediction predict(const ClassifierHead& head, const PropagationOperator& op, const DenseMatrix& features);

void write_head(const ClassifierHead& head, const std::filesystem::path& path);
ClassifierHead read_head(const std::filesystem::path& path);

/// Sum over labeled j of B_ij.
double influence_sum(const DenseMatrix& b, const LabelMask& mask, std::size_t node);
double influence_sum(const CsrMatrix& b, const LabelMask& mask, std::size_t node);

/// {"labels": [...], "scores_path": ...}; the scores CSV is written when
/// `scores_csv` is given.
void write_prediction(const Prediction& prediction, const std::filesystem::path& path,
                      const std::optional<std::filesystem::path>& scores_csv = std::nullopt,
                      const nlohmann::json& config = nullptr);
std::vector<int> read_prediction_labels(const std::filesystem::path& path);

}  // namespace lpsl
