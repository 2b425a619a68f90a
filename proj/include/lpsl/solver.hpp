#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "lpsl/graph.hpp"
#include "lpsl/matrix.hpp"

namespace lpsl {

struct SolverConfig {
  double lambda = 10.0;
  double c = 1.0;
  /// rho = 0 switches the constraint off (y stays 0, no residual stopping).
  double rho = 0.01;
  double gamma = 0.01;
  double beta = 1e-5;
  std::size_t block_size = 64;
  std::size_t inner_steps = 10;
  double outer_tol = 1e-3;
  std::size_t max_outer = 500;
  /// Stop once no single step of an outer round (gradient or threshold)
  /// moved any entry of B by more than this. 0 disables the test.
  double step_tol = 0.0;
  bool deterministic = true;
  std::size_t threads = 1;
  std::size_t dense_cap = 5000;
  /// Sparse path aborts when nnz(B) exceeds this fraction of n^2.
  double max_density = 0.5;
  std::size_t divergence_rounds = 5;

  void validate() const;
};

nlohmann::json to_json(const SolverConfig& config);
/// Keys missing from `doc` keep the value in `base`; unknown keys throw.
SolverConfig solver_config_from_json(const nlohmann::json& doc, SolverConfig base = {});

struct SolveMeta {
  std::string mode;
  std::size_t outer_rounds = 0;
  std::size_t inner_steps = 0;
  double residual_inf = 0.0;
  double objective = 0.0;
  double last_step = 0.0;
  std::size_t nnz = 0;
  /// "residual", "step", "max_outer" or "closed_form".
  std::string stop_reason;

  bool converged() const { return stop_reason == "residual" || stop_reason == "step" || stop_reason == "closed_form"; }
};

nlohmann::json to_json(const SolveMeta& meta);

struct DenseStructure {
  DenseMatrix values;
  SolverConfig config;
  SolveMeta meta;

  std::size_t n() const { return values.rows(); }
};

struct SparseStructure {
  std::size_t n = 0;
  /// Sorted by (col, row); no zeros, no duplicates.
  std::vector<Triplet> entries;
  SolverConfig config;
  SolveMeta meta;

  CsrMatrix to_csr() const;
  DenseMatrix to_dense() const;
};

struct DualState {
  std::vector<double> y;
  std::vector<double> residual;
};

/// One entry of the gradient of the augmented Lagrangian:
///   2 (b - delta) + 2 lambda (L̃B)_ij + coupling_i
/// where coupling_i = y_i + rho r_i on labeled columns and 0 elsewhere.
/// Every code path that differentiates the Lagrangian goes through here so
/// that the dense and block solvers round identically.
inline double gradient_entry(double b, double delta, double lap_b, double lambda, double coupling) {
  return 2.0 * (b - delta) + 2.0 * lambda * lap_b + coupling;
}

inline double soft_threshold_unchecked(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/// sign(x) max(|x| - t, 0). Throws ValidationError for t < 0.
double soft_threshold(double x, double t);

/// B T 1 - c 1: row sums of B over labeled columns, minus c.
std::vector<double> constraint_residual(const DenseMatrix& b, const LabelMask& mask, double c);

/// ||I - B||_F^2 + lambda tr(B^T L̃ B) + y^T r + rho/2 ||r||^2.
double lagrangian_value(const DenseMatrix& b, std::span<const double> y, const CsrMatrix& norm_lap,
                        const LabelMask& mask, const SolverConfig& config);

DenseMatrix lagrangian_gradient(const DenseMatrix& b, std::span<const double> y, const CsrMatrix& norm_lap,
                                const LabelMask& mask, const SolverConfig& config);

/// Gradient restricted to columns [block * block_size, min(n, (block + 1) * block_size)).
DenseMatrix block_gradient(const DenseMatrix& b, std::span<const double> y, const CsrMatrix& norm_lap,
                           const LabelMask& mask, const SolverConfig& config, std::size_t block);

/// Called after every inner step with the current B and multipliers.
using StepObserver = std::function<void(const DenseMatrix& b, std::span<const double> y)>;

DenseStructure solve_dense(const NormalizedOperators& ops, const LabelMask& mask, const SolverConfig& config,
                           const StepObserver& observer = {});

SparseStructure solve_sparse(const NormalizedOperators& ops, const LabelMask& mask, const SolverConfig& config);

/// (I + lambda L̃)^{-1} by dense Cholesky.
DenseStructure closed_form_unconstrained(const NormalizedOperators& ops, double lambda,
                                         std::size_t dense_cap = 5000);

/// `run` (the full run configuration) is stored on a "#run" comment line.
void write_structure(const DenseStructure& b, const std::filesystem::path& path, const nlohmann::json& run = nullptr);
void write_structure(const SparseStructure& b, const std::filesystem::path& path, const nlohmann::json& run = nullptr);
std::variant<DenseStructure, SparseStructure> read_structure(const std::filesystem::path& path);

}  // namespace lpsl
