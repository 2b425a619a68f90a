#include "lpsl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "lpsl/error.hpp"

namespace lpsl {

using nlohmann::json;

void SolverConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("solver config: ") + what);
  };
  need(std::isfinite(lambda) && lambda >= 0.0, "lambda must be finite and >= 0");
  need(std::isfinite(c), "c must be finite");
  need(std::isfinite(rho) && rho >= 0.0, "rho must be finite and >= 0");
  need(std::isfinite(gamma) && gamma > 0.0, "gamma must be > 0");
  need(std::isfinite(beta) && beta >= 0.0, "beta must be >= 0");
  need(beta == 0.0 || rho > 0.0, "beta > 0 needs rho > 0 (the threshold is beta / rho)");
  need(block_size >= 1, "block_size must be >= 1");
  need(inner_steps >= 1, "inner_steps must be >= 1");
  need(outer_tol >= 0.0, "outer_tol must be >= 0");
  need(max_outer >= 1, "max_outer must be >= 1");
  need(step_tol >= 0.0, "step_tol must be >= 0");
  need(threads >= 1, "threads must be >= 1");
  need(max_density > 0.0 && max_density <= 1.0, "max_density must lie in (0, 1]");
  need(divergence_rounds >= 1, "divergence_rounds must be >= 1");
}

json to_json(const SolverConfig& config) {
  return json{{"lambda", config.lambda},
              {"c", config.c},
              {"rho", config.rho},
              {"gamma", config.gamma},
              {"beta", config.beta},
              {"block_size", config.block_size},
              {"inner_steps", config.inner_steps},
              {"outer_tol", config.outer_tol},
              {"max_outer", config.max_outer},
              {"step_tol", config.step_tol},
              {"deterministic", config.deterministic},
              {"threads", config.threads},
              {"dense_cap", config.dense_cap},
              {"max_density", config.max_density},
              {"divergence_rounds", config.divergence_rounds}};
}

SolverConfig solver_config_from_json(const json& doc, SolverConfig base) {
  if (!doc.is_object()) throw ValidationError("solver config must be a JSON object");
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "lambda") base.lambda = v.get<double>();
      else if (key == "c") base.c = v.get<double>();
      else if (key == "rho") base.rho = v.get<double>();
      else if (key == "gamma") base.gamma = v.get<double>();
      else if (key == "beta") base.beta = v.get<double>();
      else if (key == "block_size") base.block_size = v.get<std::size_t>();
      else if (key == "inner_steps") base.inner_steps = v.get<std::size_t>();
      else if (key == "outer_tol") base.outer_tol = v.get<double>();
      else if (key == "max_outer") base.max_outer = v.get<std::size_t>();
      else if (key == "step_tol") base.step_tol = v.get<double>();
      else if (key == "deterministic") base.deterministic = v.get<bool>();
      else if (key == "threads") base.threads = v.get<std::size_t>();
      else if (key == "dense_cap") base.dense_cap = v.get<std::size_t>();
      else if (key == "max_density") base.max_density = v.get<double>();
      else if (key == "divergence_rounds") base.divergence_rounds = v.get<std::size_t>();
      else throw ValidationError("unknown solver config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("solver config: ") + e.what());
  }
  return base;
}

json to_json(const SolveMeta& meta) {
  return json{{"mode", meta.mode},
              {"outer_rounds", meta.outer_rounds},
              {"inner_steps", meta.inner_steps},
              {"residual_inf", meta.residual_inf},
              {"objective", meta.objective},
              {"last_step", meta.last_step},
              {"nnz", meta.nnz},
              {"stop_reason", meta.stop_reason}};
}

CsrMatrix SparseStructure::to_csr() const { return CsrMatrix::from_triplets(n, n, entries); }

DenseMatrix SparseStructure::to_dense() const {
  DenseMatrix out(n, n);
  for (const auto& e : entries) out(static_cast<std::size_t>(e.row), static_cast<std::size_t>(e.col)) = e.value;
  return out;
}

double soft_threshold(double x, double t) {
  if (!(t >= 0.0)) throw ValidationError("soft threshold must be >= 0");
  return soft_threshold_unchecked(x, t);
}

namespace {

void check_shapes(const DenseMatrix& b, std::size_t n_mask, std::size_t n_op) {
  if (b.rows() != b.cols()) throw ValidationError("B must be square");
  if (b.rows() != n_mask || b.rows() != n_op) throw ValidationError("B, label mask and operator sizes differ");
}

// r_i = (sum over labeled j, ascending, of B_ij) - c. The dense solver and
// the single-block sparse solver accumulate in exactly this order.
void residual_into(const DenseMatrix& b, std::span<const Index> labeled, double c, std::vector<double>& r) {
  const std::size_t n = b.rows();
  r.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = b.data() + i * n;
    double acc = 0.0;
    for (Index j : labeled) acc += row[static_cast<std::size_t>(j)];
    r[i] = acc - c;
  }
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// dst (rows x w, zeroed by caller) += A * src (rows x w), rows of A in stored order.
void spmm_block(const CsrMatrix& a, const double* src, std::size_t w, double* dst) {
  const std::size_t n = a.rows();
  const auto offsets = a.offsets();
  const auto idx = a.indices();
  const auto val = a.values();
  for (std::size_t i = 0; i < n; ++i) {
    double* out = dst + i * w;
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
      const double s = val[k];
      const double* in = src + static_cast<std::size_t>(idx[k]) * w;
      for (std::size_t c = 0; c < w; ++c) out[c] += s * in[c];
    }
  }
}

// L̃ B restricted to columns [j0, j0 + w) of a dense B.
std::vector<double> lap_times_columns(const CsrMatrix& lap, const DenseMatrix& b, std::size_t j0, std::size_t w) {
  const std::size_t n = b.rows();
  std::vector<double> tile(n * w);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < w; ++c) tile[i * w + c] = b(i, j0 + c);
  }
  std::vector<double> out(n * w, 0.0);
  spmm_block(lap, tile.data(), w, out.data());
  return out;
}

DenseMatrix gradient_columns(const DenseMatrix& b, std::span<const double> y, const CsrMatrix& lap,
                             const LabelMask& mask, const SolverConfig& config, std::size_t j0, std::size_t w) {
  const std::size_t n = b.rows();
  if (y.size() != n) throw ValidationError("multiplier length does not match B");
  std::vector<double> r;
  residual_into(b, mask.labeled, config.c, r);
  const std::vector<double> lb = lap_times_columns(lap, b, j0, w);
  DenseMatrix g(n, w);
  for (std::size_t i = 0; i < n; ++i) {
    const double coupling = y[i] + config.rho * r[i];
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t j = j0 + c;
      g(i, c) = gradient_entry(b(i, j), i == j ? 1.0 : 0.0, lb[i * w + c], config.lambda,
                               mask.is_labeled(j) ? coupling : 0.0);
    }
  }
  return g;
}

// Runs fn(worker, item) for item in [0, count) on up to `threads` threads.
// Items are dealt round-robin so the assignment is fixed for a given count.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t k = 0; k < count; ++k) fn(std::size_t{0}, k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t k = t; k < count; k += threads) fn(t, k);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Tracks consecutive rounds in which the objective (and, when constrained,
// the residual) went up.
class DivergenceGuard {
 public:
  DivergenceGuard(std::size_t limit, bool constrained) : limit_(limit), constrained_(constrained) {}

  void observe(double objective, double residual) {
    if (!std::isfinite(objective) || !std::isfinite(residual)) {
      throw NumericalError("solver produced non-finite values; reduce gamma");
    }
    const bool worse = have_prev_ && objective > prev_obj_ && (!constrained_ || residual > prev_res_);
    streak_ = worse ? streak_ + 1 : 0;
    prev_obj_ = objective;
    prev_res_ = residual;
    have_prev_ = true;
    if (streak_ >= limit_) {
      throw NumericalError("solver diverging: objective increased for " + std::to_string(streak_) +
                           " consecutive outer rounds; reduce gamma");
    }
  }

 private:
  std::size_t limit_;
  bool constrained_;
  bool have_prev_ = false;
  double prev_obj_ = 0.0;
  double prev_res_ = 0.0;
  std::size_t streak_ = 0;
};

constexpr std::size_t kTile = 64;

// L_rho evaluated with the normalized adjacency: tr(B^T L̃ B) = sum B_ij (B - ÃB)_ij.
double dense_objective(const DenseMatrix& b, std::span<const double> y, std::span<const double> r,
                       const CsrMatrix& adj, const SolverConfig& config, std::vector<double>& ab) {
  const std::size_t n = b.rows();
  double fro = 0.0;
  double smooth = 0.0;
  std::vector<double> tile;
  for (std::size_t j0 = 0; j0 < n; j0 += kTile) {
    const std::size_t w = std::min(kTile, n - j0);
    tile.assign(n * w, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < w; ++c) tile[i * w + c] = b(i, j0 + c);
    }
    ab.assign(n * w, 0.0);
    spmm_block(adj, tile.data(), w, ab.data());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < w; ++c) {
        const double v = tile[i * w + c];
        const double d = (i == j0 + c ? 1.0 : 0.0) - v;
        fro += d * d;
        smooth += v * (v - ab[i * w + c]);
      }
    }
  }
  double lin = 0.0;
  double pen = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lin += y[i] * r[i];
    pen += r[i] * r[i];
  }
  return fro + config.lambda * smooth + lin + 0.5 * config.rho * pen;
}

}  // namespace

std::vector<double> constraint_residual(const DenseMatrix& b, const LabelMask& mask, double c) {
  if (b.rows() != b.cols() || b.rows() != mask.size()) throw ValidationError("B and label mask sizes differ");
  std::vector<double> r;
  residual_into(b, mask.labeled, c, r);
  return r;
}

double lagrangian_value(const DenseMatrix& b, std::span<const double> y, const CsrMatrix& norm_lap,
                        const LabelMask& mask, const SolverConfig& config) {
  check_shapes(b, mask.size(), norm_lap.rows());
  const std::size_t n = b.rows();
  if (y.size() != n) throw ValidationError("multiplier length does not match B");
  const DenseMatrix lb = norm_lap.multiply(b);
  double fro = 0.0;
  double smooth = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = (i == j ? 1.0 : 0.0) - b(i, j);
      fro += d * d;
      smooth += b(i, j) * lb(i, j);
    }
  }
  std::vector<double> r;
  residual_into(b, mask.labeled, config.c, r);
  double lin = 0.0;
  double pen = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lin += y[i] * r[i];
    pen += r[i] * r[i];
  }
  return fro + config.lambda * smooth + lin + 0.5 * config.rho * pen;
}

DenseMatrix lagrangian_gradient(const DenseMatrix& b, std::span<const double> y, const CsrMatrix& norm_lap,
                                const LabelMask& mask, const SolverConfig& config) {
  check_shapes(b, mask.size(), norm_lap.rows());
  return gradient_columns(b, y, norm_lap, mask, config, 0, b.cols());
}

DenseMatrix block_gradient(const DenseMatrix& b, std::span<const double> y, const CsrMatrix& norm_lap,
                           const LabelMask& mask, const SolverConfig& config, std::size_t block) {
  check_shapes(b, mask.size(), norm_lap.rows());
  if (config.block_size == 0) throw ValidationError("block_size must be >= 1");
  const std::size_t n = b.rows();
  const std::size_t j0 = block * config.block_size;
  if (j0 >= n) throw ValidationError("block index " + std::to_string(block) + " out of range");
  return gradient_columns(b, y, norm_lap, mask, config, j0, std::min(config.block_size, n - j0));
}

DenseStructure solve_dense(const NormalizedOperators& ops, const LabelMask& mask, const SolverConfig& config,
                           const StepObserver& observer) {
  config.validate();
  const std::size_t n = ops.size();
  if (mask.size() != n) throw ValidationError("label mask size does not match graph");
  if (n > config.dense_cap) {
    throw ValidationError("n = " + std::to_string(n) + " exceeds the dense cap " + std::to_string(config.dense_cap) +
                          "; use the sparse solver (--mode sparse)");
  }
  const CsrMatrix& adj = ops.norm_adj;
  const bool constrained = config.rho > 0.0;
  DenseMatrix b = DenseMatrix::identity(n);
  std::vector<double> y(n, 0.0);
  std::vector<double> r;
  std::vector<double> coupling(n);
  const std::size_t tiles = (n + kTile - 1) / kTile;
  const std::size_t workers = std::max<std::size_t>(1, std::min(config.threads, tiles));
  std::vector<std::vector<double>> ab(workers, std::vector<double>(n * kTile));
  std::vector<double> tile_step(tiles);
  std::vector<double> obj_scratch;

  DenseStructure out;
  out.config = config;
  SolveMeta& meta = out.meta;
  meta.mode = "dense";
  DivergenceGuard guard(config.divergence_rounds, constrained);

  for (std::size_t round = 0; round < config.max_outer; ++round) {
    double round_step = 0.0;
    for (std::size_t step = 0; step < config.inner_steps; ++step) {
      residual_into(b, mask.labeled, config.c, r);
      for (std::size_t i = 0; i < n; ++i) coupling[i] = y[i] + config.rho * r[i];
      // Column tiles only couple through r, which is fixed for the step.
      parallel_for(tiles, workers, [&](std::size_t worker, std::size_t t) {
        const std::size_t j0 = t * kTile;
        const std::size_t w = std::min(kTile, n - j0);
        double* acc = ab[worker].data();
        std::fill(acc, acc + n * w, 0.0);
        const auto offsets = adj.offsets();
        const auto idx = adj.indices();
        const auto val = adj.values();
        for (std::size_t i = 0; i < n; ++i) {
          double* o = acc + i * w;
          for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
            const double s = val[k];
            const double* in = b.data() + static_cast<std::size_t>(idx[k]) * n + j0;
            for (std::size_t c = 0; c < w; ++c) o[c] += s * in[c];
          }
        }
        double moved = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          double* row = b.data() + i * n + j0;
          const double* o = acc + i * w;
          for (std::size_t c = 0; c < w; ++c) {
            const std::size_t j = j0 + c;
            const double v = row[c];
            const double g = gradient_entry(v, i == j ? 1.0 : 0.0, v - o[c], config.lambda,
                                            mask.is_labeled(j) ? coupling[i] : 0.0);
            const double nv = v - config.gamma * g;
            moved = std::max(moved, std::abs(nv - v));
            row[c] = nv;
          }
        }
        tile_step[t] = moved;
      });
      round_step = std::max(round_step, *std::max_element(tile_step.begin(), tile_step.end()));
      ++meta.inner_steps;
      if (observer) observer(b, y);
    }
    residual_into(b, mask.labeled, config.c, r);
    meta.objective = dense_objective(b, y, r, adj, config, obj_scratch);
    if (constrained) {
      for (std::size_t i = 0; i < n; ++i) y[i] += config.rho * r[i];
    }
    meta.residual_inf = max_abs(r);
    meta.last_step = round_step;
    meta.outer_rounds = round + 1;
    guard.observe(meta.objective, constrained ? meta.residual_inf : 0.0);
    if (constrained && meta.residual_inf <= config.outer_tol) {
      meta.stop_reason = "residual";
      break;
    }
    if (config.step_tol > 0.0 && round_step <= config.step_tol) {
      meta.stop_reason = "step";
      break;
    }
  }
  if (meta.stop_reason.empty()) meta.stop_reason = "max_outer";
  if (!all_finite(b.values())) throw NumericalError("dense solve produced non-finite entries");
  meta.nnz = n * n;
  out.values = std::move(b);
  return out;
}

namespace {

struct SparseColumn {
  std::vector<Index> rows;
  std::vector<double> vals;
};

// Per-worker buffers for one column block.
struct BlockScratch {
  std::vector<double> block;
  std::vector<double> ab;
  std::vector<double> r;
  std::vector<double> coupling;
};

}  // namespace

SparseStructure solve_sparse(const NormalizedOperators& ops, const LabelMask& mask, const SolverConfig& config) {
  config.validate();
  const std::size_t n = ops.size();
  if (mask.size() != n) throw ValidationError("label mask size does not match graph");
  const CsrMatrix& adj = ops.norm_adj;
  const bool constrained = config.rho > 0.0;
  const bool jacobi = !config.deterministic && config.threads > 1;
  const double threshold = constrained ? config.beta / config.rho : 0.0;
  const std::size_t d = std::min(config.block_size, std::max<std::size_t>(n, 1));
  const std::size_t blocks = (n + d - 1) / d;
  const double nnz_limit = config.max_density * static_cast<double>(n) * static_cast<double>(n);

  std::vector<SparseColumn> cols(n);
  for (std::size_t j = 0; j < n; ++j) cols[j] = {{static_cast<Index>(j)}, {1.0}};
  std::size_t nnz = n;

  // labeled columns per block, ascending
  std::vector<std::vector<Index>> block_labeled(blocks);
  for (Index j : mask.labeled) block_labeled[static_cast<std::size_t>(j) / d].push_back(j);

  std::vector<double> y(n, 0.0);
  std::vector<double> r(n);
  std::vector<double> r_other(n);
  std::vector<double> block_step(blocks);
  std::vector<std::size_t> block_nnz(blocks);
  const std::size_t workers = jacobi ? std::min(config.threads, blocks) : 1;
  std::vector<BlockScratch> scratch(workers);
  for (auto& s : scratch) {
    s.block.resize(n * d);
    s.ab.resize(n * d);
    s.r.resize(n);
    s.coupling.resize(n);
  }

  // Sum over labeled columns outside `skip` (ascending) of the stored B.
  auto labeled_sum_except = [&](std::size_t skip, std::vector<double>& acc) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (Index j : mask.labeled) {
      if (static_cast<std::size_t>(j) / d == skip) continue;
      const auto& col = cols[static_cast<std::size_t>(j)];
      for (std::size_t k = 0; k < col.rows.size(); ++k) acc[static_cast<std::size_t>(col.rows[k])] += col.vals[k];
    }
  };

  // Runs the inner steps and the threshold on block `blk`, given the labeled
  // row sums of all other blocks.
  auto process_block = [&](BlockScratch& s, std::size_t blk, std::span<const double> other) {
    const std::size_t j0 = blk * d;
    const std::size_t w = std::min(d, n - j0);
    double* blockp = s.block.data();
    std::fill(blockp, blockp + n * w, 0.0);
    for (std::size_t c = 0; c < w; ++c) {
      const auto& col = cols[j0 + c];
      for (std::size_t k = 0; k < col.rows.size(); ++k) blockp[static_cast<std::size_t>(col.rows[k]) * w + c] = col.vals[k];
    }
    const auto& labs = block_labeled[blk];
    const auto offsets = adj.offsets();
    const auto idx = adj.indices();
    const auto val = adj.values();
    double moved = 0.0;
    for (std::size_t step = 0; step < config.inner_steps; ++step) {
      if (!labs.empty()) {
        for (std::size_t i = 0; i < n; ++i) {
          double acc = other[i];
          const double* row = blockp + i * w;
          for (Index j : labs) acc += row[static_cast<std::size_t>(j) - j0];
          s.r[i] = acc - config.c;
          s.coupling[i] = y[i] + config.rho * s.r[i];
        }
      }
      double* acc = s.ab.data();
      std::fill(acc, acc + n * w, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double* o = acc + i * w;
        for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
          const double a = val[k];
          const double* in = blockp + static_cast<std::size_t>(idx[k]) * w;
          for (std::size_t c = 0; c < w; ++c) o[c] += a * in[c];
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        double* row = blockp + i * w;
        const double* o = acc + i * w;
        for (std::size_t c = 0; c < w; ++c) {
          const std::size_t j = j0 + c;
          const double v = row[c];
          const double g = gradient_entry(v, i == j ? 1.0 : 0.0, v - o[c], config.lambda,
                                          mask.is_labeled(j) ? s.coupling[i] : 0.0);
          const double nv = v - config.gamma * g;
          moved = std::max(moved, std::abs(nv - v));
          row[c] = nv;
        }
      }
    }
    for (std::size_t e = 0; e < n * w; ++e) {
      const double v = blockp[e];
      const double nv = soft_threshold_unchecked(v, threshold);
      moved = std::max(moved, std::abs(nv - v));
      blockp[e] = nv;
    }
    std::size_t count = 0;
    for (std::size_t c = 0; c < w; ++c) {
      auto& col = cols[j0 + c];
      col.rows.clear();
      col.vals.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const double v = blockp[i * w + c];
        if (v != 0.0) {
          col.rows.push_back(static_cast<Index>(i));
          col.vals.push_back(v);
        }
      }
      count += col.rows.size();
    }
    block_step[blk] = moved;
    block_nnz[blk] = count;
  };

  SparseStructure out;
  out.n = n;
  out.config = config;
  SolveMeta& meta = out.meta;
  meta.mode = jacobi ? "sparse-jacobi" : "sparse";
  DivergenceGuard guard(config.divergence_rounds, constrained);
  std::vector<double> ax(n);

  for (std::size_t round = 0; round < config.max_outer; ++round) {
    if (jacobi) {
      // Snapshot: labeled row sums of every block at sweep start.
      std::vector<std::vector<double>> partial(blocks);
      std::vector<double> total(n, 0.0);
      for (std::size_t blk = 0; blk < blocks; ++blk) {
        if (block_labeled[blk].empty()) continue;
        partial[blk].assign(n, 0.0);
        for (Index j : block_labeled[blk]) {
          const auto& col = cols[static_cast<std::size_t>(j)];
          for (std::size_t k = 0; k < col.rows.size(); ++k) {
            partial[blk][static_cast<std::size_t>(col.rows[k])] += col.vals[k];
          }
        }
        for (std::size_t i = 0; i < n; ++i) total[i] += partial[blk][i];
      }
      parallel_for(blocks, workers, [&](std::size_t worker, std::size_t blk) {
        std::vector<double> other(total);
        if (!partial[blk].empty()) {
          for (std::size_t i = 0; i < n; ++i) other[i] -= partial[blk][i];
        }
        process_block(scratch[worker], blk, other);
      });
      nnz = 0;
      for (std::size_t c : block_nnz) nnz += c;
      if (static_cast<double>(nnz) > nnz_limit) {
        throw NumericalError("sparse B exceeded the density guard (" + std::to_string(nnz) + " nonzeros); raise beta or max_density");
      }
    } else {
      for (std::size_t blk = 0; blk < blocks; ++blk) {
        std::size_t before = 0;
        const std::size_t j0 = blk * d;
        const std::size_t w = std::min(d, n - j0);
        for (std::size_t c = 0; c < w; ++c) before += cols[j0 + c].rows.size();
        if (!block_labeled[blk].empty()) labeled_sum_except(blk, r_other);
        process_block(scratch[0], blk, r_other);
        nnz = nnz - before + block_nnz[blk];
        if (static_cast<double>(nnz) > nnz_limit) {
          throw NumericalError("sparse B exceeded the density guard (" + std::to_string(nnz) +
                               " nonzeros); raise beta or max_density");
        }
      }
    }
    meta.inner_steps += config.inner_steps * blocks;

    // residual from the live B, same accumulation order as the dense path
    std::fill(r.begin(), r.end(), 0.0);
    for (Index j : mask.labeled) {
      const auto& col = cols[static_cast<std::size_t>(j)];
      for (std::size_t k = 0; k < col.rows.size(); ++k) r[static_cast<std::size_t>(col.rows[k])] += col.vals[k];
    }
    for (double& x : r) x -= config.c;

    // objective including the l1 term
    double fro = 0.0;
    double smooth = 0.0;
    double l1 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto& col = cols[j];
      bool diag = false;
      for (std::size_t k = 0; k < col.rows.size(); ++k) {
        const auto i = static_cast<std::size_t>(col.rows[k]);
        const double v = col.vals[k];
        const auto nb = adj.row_indices(i);
        const auto nv = adj.row_values(i);
        for (std::size_t e = 0; e < nb.size(); ++e) ax[static_cast<std::size_t>(nb[e])] += nv[e] * v;
        l1 += std::abs(v);
        if (i == j) {
          diag = true;
          fro += (1.0 - v) * (1.0 - v);
        } else {
          fro += v * v;
        }
      }
      if (!diag) fro += 1.0;
      for (std::size_t k = 0; k < col.rows.size(); ++k) {
        const auto i = static_cast<std::size_t>(col.rows[k]);
        smooth += col.vals[k] * (col.vals[k] - ax[i]);
      }
      for (std::size_t k = 0; k < col.rows.size(); ++k) {
        for (Index nb : adj.row_indices(static_cast<std::size_t>(col.rows[k]))) ax[static_cast<std::size_t>(nb)] = 0.0;
      }
    }
    double lin = 0.0;
    double pen = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lin += y[i] * r[i];
      pen += r[i] * r[i];
    }
    meta.objective = fro + config.lambda * smooth + lin + 0.5 * config.rho * pen + config.beta * l1;

    if (constrained) {
      for (std::size_t i = 0; i < n; ++i) y[i] += config.rho * r[i];
    }
    meta.residual_inf = max_abs(r);
    meta.last_step = *std::max_element(block_step.begin(), block_step.end());
    meta.outer_rounds = round + 1;
    guard.observe(meta.objective, constrained ? meta.residual_inf : 0.0);
    if (constrained && meta.residual_inf <= config.outer_tol) {
      meta.stop_reason = "residual";
      break;
    }
    if (config.step_tol > 0.0 && meta.last_step <= config.step_tol) {
      meta.stop_reason = "step";
      break;
    }
  }
  if (meta.stop_reason.empty()) meta.stop_reason = "max_outer";

  out.entries.reserve(nnz);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& col = cols[j];
    for (std::size_t k = 0; k < col.rows.size(); ++k) {
      if (!std::isfinite(col.vals[k])) throw NumericalError("sparse solve produced non-finite entries");
      out.entries.push_back({col.rows[k], static_cast<Index>(j), col.vals[k]});
    }
  }
  meta.nnz = out.entries.size();
  return out;
}

DenseStructure closed_form_unconstrained(const NormalizedOperators& ops, double lambda, std::size_t dense_cap) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be finite and >= 0");
  const std::size_t n = ops.size();
  if (n > dense_cap) throw ValidationError("n exceeds the dense cap for the closed form");
  // M = I + lambda L̃, symmetric positive definite for lambda >= 0.
  DenseMatrix m = DenseMatrix::identity(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = ops.norm_lap.row_indices(i);
    const auto val = ops.norm_lap.row_values(i);
    for (std::size_t k = 0; k < idx.size(); ++k) m(i, static_cast<std::size_t>(idx[k])) += lambda * val[k];
  }
  // in-place lower Cholesky factor
  for (std::size_t j = 0; j < n; ++j) {
    double diag = m(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= m(j, k) * m(j, k);
    if (!(diag > 0.0)) throw NumericalError("I + lambda L is not positive definite");
    const double ljj = std::sqrt(diag);
    m(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= m(i, k) * m(j, k);
      m(i, j) = s / ljj;
    }
  }
  DenseMatrix inv(n, n);
  std::vector<double> x(n);
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = i == col ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= m(i, k) * x[k];
      x[i] = s / m(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= m(k, ii) * x[k];
      x[ii] = s / m(ii, ii);
    }
    for (std::size_t i = 0; i < n; ++i) inv(i, col) = x[i];
  }
  DenseStructure out;
  out.values = std::move(inv);
  out.config.lambda = lambda;
  out.config.rho = 0.0;
  out.config.beta = 0.0;
  out.meta.mode = "closed_form";
  out.meta.stop_reason = "closed_form";
  out.meta.nnz = n * n;
  return out;
}

}  // namespace lpsl
