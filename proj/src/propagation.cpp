#include "lpsl/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "lpsl/error.hpp"
#include "lpsl/random.hpp"

namespace lpsl {

using nlohmann::json;

PropagationOperator PropagationOperator::dense(DenseMatrix b) {
  if (b.rows() != b.cols()) throw ValidationError("propagation matrix must be square");
  PropagationOperator op;
  op.kind_ = OperatorKind::learned_dense;
  op.n_ = b.rows();
  op.dense_ = std::make_shared<const DenseMatrix>(std::move(b));
  return op;
}

PropagationOperator PropagationOperator::sparse(CsrMatrix b) {
  if (b.rows() != b.cols()) throw ValidationError("propagation matrix must be square");
  PropagationOperator op;
  op.kind_ = OperatorKind::learned_sparse;
  op.n_ = b.rows();
  op.csr_ = std::make_shared<const CsrMatrix>(std::move(b));
  return op;
}

PropagationOperator PropagationOperator::ppr_iterative(CsrMatrix norm_adj, double alpha, std::size_t steps) {
  if (norm_adj.rows() != norm_adj.cols()) throw ValidationError("normalized adjacency must be square");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("ppr alpha must lie in [0, 1]");
  if (steps == 0) throw ValidationError("ppr needs at least one step");
  PropagationOperator op;
  op.kind_ = OperatorKind::ppr_iterative;
  op.n_ = norm_adj.rows();
  op.csr_ = std::make_shared<const CsrMatrix>(std::move(norm_adj));
  op.alpha_ = alpha;
  op.steps_ = steps;
  return op;
}

json PropagationOperator::describe() const {
  switch (kind_) {
    case OperatorKind::learned_dense: return json{{"kind", "learned_dense"}, {"n", n_}};
    case OperatorKind::learned_sparse: return json{{"kind", "learned_sparse"}, {"n", n_}, {"nnz", csr_->nnz()}};
    case OperatorKind::ppr_iterative:
      return json{{"kind", "ppr_iterative"}, {"n", n_}, {"alpha", alpha_}, {"steps", steps_}};
  }
  return nullptr;
}

DenseMatrix PropagationOperator::apply(const DenseMatrix& x) const {
  if (x.rows() != n_) throw ValidationError("operator size does not match signal rows");
  switch (kind_) {
    case OperatorKind::learned_dense: return multiply(*dense_, x);
    case OperatorKind::learned_sparse: return csr_->multiply(x);
    case OperatorKind::ppr_iterative: {
      DenseMatrix f = x;
      const double keep = 1.0 - alpha_;
      for (std::size_t k = 0; k < steps_; ++k) {
        DenseMatrix next = csr_->multiply(f);
        double* p = next.data();
        const double* xp = x.data();
        for (std::size_t e = 0; e < next.size(); ++e) p[e] = keep * p[e] + alpha_ * xp[e];
        f = std::move(next);
      }
      return f;
    }
  }
  return {};
}

DenseMatrix PropagationOperator::apply_rows(std::span<const Index> rows, const DenseMatrix& x) const {
  if (x.rows() != n_) throw ValidationError("operator size does not match signal rows");
  const std::size_t w = x.cols();
  DenseMatrix out(rows.size(), w);
  if (kind_ == OperatorKind::ppr_iterative) {
    const DenseMatrix full = apply(x);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto src = full.row(static_cast<std::size_t>(rows[r]));
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<std::size_t>(rows[r]);
    double* dst = out.data() + r * w;
    if (kind_ == OperatorKind::learned_dense) {
      for (std::size_t k = 0; k < n_; ++k) {
        const double s = (*dense_)(i, k);
        if (s == 0.0) continue;
        const double* src = x.data() + k * w;
        for (std::size_t c = 0; c < w; ++c) dst[c] += s * src[c];
      }
    } else {
      const auto idx = csr_->row_indices(i);
      const auto val = csr_->row_values(i);
      for (std::size_t e = 0; e < idx.size(); ++e) {
        const double* src = x.data() + static_cast<std::size_t>(idx[e]) * w;
        for (std::size_t c = 0; c < w; ++c) dst[c] += val[e] * src[c];
      }
    }
  }
  return out;
}

DenseMatrix PropagationOperator::apply_transpose(const DenseMatrix& x) const {
  if (x.rows() != n_) throw ValidationError("operator size does not match signal rows");
  switch (kind_) {
    case OperatorKind::learned_dense: return multiply_transposed(*dense_, x);
    case OperatorKind::learned_sparse: {
      std::vector<Index> all(n_);
      for (std::size_t i = 0; i < n_; ++i) all[i] = static_cast<Index>(i);
      return apply_transpose_rows(all, x);
    }
    case OperatorKind::ppr_iterative: return apply(x);  // polynomial in a symmetric Ã
  }
  return {};
}

DenseMatrix PropagationOperator::apply_transpose_rows(std::span<const Index> rows, const DenseMatrix& g) const {
  if (g.rows() != rows.size()) throw ValidationError("gradient rows do not match row list");
  const std::size_t w = g.cols();
  DenseMatrix out(n_, w);
  if (kind_ == OperatorKind::ppr_iterative) {
    DenseMatrix padded(n_, w);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto src = g.row(r);
      std::copy(src.begin(), src.end(), padded.row(static_cast<std::size_t>(rows[r])).begin());
    }
    return apply(padded);
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<std::size_t>(rows[r]);
    const double* src = g.data() + r * w;
    if (kind_ == OperatorKind::learned_dense) {
      for (std::size_t k = 0; k < n_; ++k) {
        const double s = (*dense_)(i, k);
        if (s == 0.0) continue;
        double* dst = out.data() + k * w;
        for (std::size_t c = 0; c < w; ++c) dst[c] += s * src[c];
      }
    } else {
      const auto idx = csr_->row_indices(i);
      const auto val = csr_->row_values(i);
      for (std::size_t e = 0; e < idx.size(); ++e) {
        double* dst = out.data() + static_cast<std::size_t>(idx[e]) * w;
        for (std::size_t c = 0; c < w; ++c) dst[c] += val[e] * src[c];
      }
    }
  }
  return out;
}

Prediction Prediction::from_scores(DenseMatrix scores) {
  Prediction p;
  p.labels.resize(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    int best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    }
    p.labels[i] = best;
  }
  p.scores = std::move(scores);
  return p;
}

Prediction propagate_labels(const PropagationOperator& op, const LabelMask& mask, std::span<const int> classes,
                            int num_classes) {
  const std::size_t n = op.size();
  if (mask.size() != n || classes.size() != n) throw ValidationError("label arrays do not match operator size");
  if (num_classes < 1) throw ValidationError("need at least one class");
  DenseMatrix y(n, static_cast<std::size_t>(num_classes));
  for (Index v : mask.labeled) {
    const int c = classes[static_cast<std::size_t>(v)];
    if (c < 0 || c >= num_classes) throw ValidationError("class id out of range");
    y(static_cast<std::size_t>(v), static_cast<std::size_t>(c)) = 1.0;
  }
  return Prediction::from_scores(op.apply(y));
}

double accuracy(std::span<const int> predicted, std::span<const int> truth, std::span<const Index> nodes) {
  if (nodes.empty()) return 0.0;
  std::size_t hit = 0;
  for (Index v : nodes) {
    const auto i = static_cast<std::size_t>(v);
    if (i >= predicted.size() || i >= truth.size()) throw ValidationError("node outside prediction range");
    if (predicted[i] == truth[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(nodes.size());
}

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::none: return "none";
    case HeadKind::linear: return "linear";
    case HeadKind::mlp2: return "mlp2";
  }
  return "?";
}

HeadKind parse_head_kind(const std::string& name) {
  if (name == "none") return HeadKind::none;
  if (name == "linear") return HeadKind::linear;
  if (name == "mlp2") return HeadKind::mlp2;
  throw ValidationError("unknown head kind '" + name + "' (expected none, linear or mlp2)");
}

std::string to_string(Architecture arch) { return arch == Architecture::appnp ? "appnp" : "gcn"; }

Architecture parse_architecture(const std::string& name) {
  if (name == "appnp") return Architecture::appnp;
  if (name == "gcn") return Architecture::gcn;
  throw ValidationError("unknown architecture '" + name + "' (expected appnp or gcn)");
}

void HeadConfig::validate() const {
  if (hidden == 0) throw ValidationError("hidden width must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight decay must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
  if (max_epochs == 0) throw ValidationError("max_epochs must be >= 1");
}

json to_json(const HeadConfig& config) {
  return json{{"kind", to_string(config.kind)},       {"hidden", config.hidden},
              {"learning_rate", config.learning_rate}, {"weight_decay", config.weight_decay},
              {"dropout", config.dropout},             {"max_epochs", config.max_epochs},
              {"patience", config.patience},           {"seed", config.seed}};
}

HeadConfig head_config_from_json(const json& doc, HeadConfig base) {
  if (!doc.is_object()) throw ValidationError("head config must be a JSON object");
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "kind") base.kind = parse_head_kind(v.get<std::string>());
      else if (key == "hidden") base.hidden = v.get<std::size_t>();
      else if (key == "learning_rate") base.learning_rate = v.get<double>();
      else if (key == "weight_decay") base.weight_decay = v.get<double>();
      else if (key == "dropout") base.dropout = v.get<double>();
      else if (key == "max_epochs") base.max_epochs = v.get<std::size_t>();
      else if (key == "patience") base.patience = v.get<std::size_t>();
      else if (key == "seed") base.seed = v.get<std::uint64_t>();
      else throw ValidationError("unknown head config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("head config: ") + e.what());
  }
  return base;
}

namespace {

// Sparse feature rows with per-pass dropout applied to the stored values.
struct SparseFeatures {
  CsrMatrix x;

  explicit SparseFeatures(const DenseMatrix& dense) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < dense.rows(); ++i) {
      for (std::size_t j = 0; j < dense.cols(); ++j) {
        const double v = dense(i, j);
        if (!std::isfinite(v)) throw ValidationError("non-finite feature value");
        if (v != 0.0) t.push_back({static_cast<Index>(i), static_cast<Index>(j), v});
      }
    }
    x = CsrMatrix::from_triplets(dense.rows(), dense.cols(), std::move(t));
  }

  std::vector<double> dropped(double p, Rng& rng) const {
    std::vector<double> v(x.values().begin(), x.values().end());
    if (p <= 0.0) return v;
    const double scale = 1.0 / (1.0 - p);
    for (double& e : v) e = rng.uniform_real() < p ? 0.0 : e * scale;
    return v;
  }

  // (X with `vals`) * w
  DenseMatrix times(std::span<const double> vals, const DenseMatrix& w) const {
    const std::size_t h = w.cols();
    DenseMatrix out(x.rows(), h);
    const auto off = x.offsets();
    const auto idx = x.indices();
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double* dst = out.data() + i * h;
      for (std::size_t k = off[i]; k < off[i + 1]; ++k) {
        if (vals[k] == 0.0) continue;
        const double* src = w.data() + static_cast<std::size_t>(idx[k]) * h;
        for (std::size_t c = 0; c < h; ++c) dst[c] += vals[k] * src[c];
      }
    }
    return out;
  }

  // (X with `vals`)^T g
  DenseMatrix transpose_times(std::span<const double> vals, const DenseMatrix& g) const {
    const std::size_t h = g.cols();
    DenseMatrix out(x.cols(), h);
    const auto off = x.offsets();
    const auto idx = x.indices();
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double* src = g.data() + i * h;
      for (std::size_t k = off[i]; k < off[i + 1]; ++k) {
        if (vals[k] == 0.0) continue;
        double* dst = out.data() + static_cast<std::size_t>(idx[k]) * h;
        for (std::size_t c = 0; c < h; ++c) dst[c] += vals[k] * src[c];
      }
    }
    return out;
  }
};

DenseMatrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  DenseMatrix w(fan_in, fan_out);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t e = 0; e < w.size(); ++e) w.data()[e] = (2.0 * rng.uniform_real() - 1.0) * limit;
  return w;
}

void add_bias(DenseMatrix& m, std::span<const double> b) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double* row = m.data() + i * m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += b[c];
  }
}

std::vector<double> column_sums(const DenseMatrix& m) {
  std::vector<double> s(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = m.data() + i * m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c) s[c] += row[c];
  }
  return s;
}

// a * b^T
DenseMatrix multiply_bt(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.data() + i * a.cols();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* br = b.data() + j * b.cols();
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += ar[k] * br[k];
      out(i, j) = s;
    }
  }
  return out;
}

// Inverted dropout in place; returns the keep mask scaled by 1 / (1 - p).
std::vector<double> dropout_inplace(DenseMatrix& m, double p, Rng& rng) {
  std::vector<double> mask(m.size(), 1.0);
  if (p <= 0.0) return mask;
  const double scale = 1.0 / (1.0 - p);
  for (std::size_t e = 0; e < m.size(); ++e) {
    mask[e] = rng.uniform_real() < p ? 0.0 : scale;
    m.data()[e] *= mask[e];
  }
  return mask;
}

// Mean softmax cross-entropy over the given rows of `logits`; writes
// d loss / d logits into `grad` (same shape) when non-null.
double cross_entropy(const DenseMatrix& logits, std::span<const Index> nodes, std::span<const int> classes,
                     DenseMatrix* grad) {
  const std::size_t c = logits.cols();
  const double inv = 1.0 / static_cast<double>(nodes.size());
  double loss = 0.0;
  if (grad) *grad = DenseMatrix(logits.rows(), c);
  std::vector<double> p(c);
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      p[k] = std::exp(row[k] - mx);
      z += p[k];
    }
    const auto y = static_cast<std::size_t>(classes[static_cast<std::size_t>(nodes[r])]);
    loss -= (row[y] - mx - std::log(z)) * inv;
    if (grad) {
      for (std::size_t k = 0; k < c; ++k) (*grad)(r, k) = (p[k] / z - (k == y ? 1.0 : 0.0)) * inv;
    }
  }
  return loss;
}

double row_accuracy(const DenseMatrix& logits, std::span<const Index> nodes, std::span<const int> classes) {
  if (nodes.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const auto row = logits.row(r);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == classes[static_cast<std::size_t>(nodes[r])]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(nodes.size());
}

struct Adam {
  std::vector<std::vector<double>> m, v;
  std::size_t t = 0;
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  explicit Adam(double learning_rate) : lr(learning_rate) {}

  void step(std::vector<std::span<double>> params, const std::vector<std::span<const double>>& grads) {
    if (m.empty()) {
      for (const auto& p : params) {
        m.emplace_back(p.size(), 0.0);
        v.emplace_back(p.size(), 0.0);
      }
    }
    ++t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (std::size_t e = 0; e < params[k].size(); ++e) {
        const double g = grads[k][e];
        m[k][e] = b1 * m[k][e] + (1.0 - b1) * g;
        v[k][e] = b2 * v[k][e] + (1.0 - b2) * g * g;
        params[k][e] -= lr * (m[k][e] / c1) / (std::sqrt(v[k][e] / c2) + eps);
      }
    }
  }
};

std::span<double> as_span(DenseMatrix& m) { return {m.data(), m.size()}; }

// Forward pass in eval mode; returns logits for `rows` (all nodes when empty).
DenseMatrix forward_eval(const ClassifierHead& head, const PropagationOperator& op, const SparseFeatures& x,
                         std::span<const Index> rows) {
  const auto vals = x.x.values();
  auto propagate = [&](const DenseMatrix& m) { return rows.empty() ? op.apply(m) : op.apply_rows(rows, m); };
  if (head.arch == Architecture::appnp) {
    DenseMatrix z = x.times(vals, head.weights[0]);
    add_bias(z, head.biases[0]);
    if (head.kind == HeadKind::mlp2) {
      for (std::size_t e = 0; e < z.size(); ++e) z.data()[e] = std::max(0.0, z.data()[e]);
      z = multiply(z, head.weights[1]);
      add_bias(z, head.biases[1]);
    }
    return propagate(z);
  }
  DenseMatrix h = op.apply(x.times(vals, head.weights[0]));
  add_bias(h, head.biases[0]);
  for (std::size_t e = 0; e < h.size(); ++e) h.data()[e] = std::max(0.0, h.data()[e]);
  DenseMatrix logits = propagate(multiply(h, head.weights[1]));
  add_bias(logits, head.biases[1]);
  return logits;
}

TrainResult train_head(Architecture arch, const PropagationOperator& op, const DenseMatrix& features,
                       std::span<const int> classes, int num_classes, const SplitAssignment& split,
                       const HeadConfig& config) {
  config.validate();
  const std::size_t n = op.size();
  if (features.rows() != n || classes.size() != n) throw ValidationError("features/labels do not match operator size");
  if (num_classes < 1) throw ValidationError("need at least one class");
  if (split.train.empty()) throw ValidationError("empty training set");
  if (config.kind == HeadKind::none) throw ValidationError("head kind 'none' has no trainable parameters");
  if (arch == Architecture::gcn && config.kind != HeadKind::mlp2) {
    throw ValidationError("the gcn architecture needs the mlp2 head");
  }
  for (Index v : split.train) {
    const int c = classes[static_cast<std::size_t>(v)];
    if (c < 0 || c >= num_classes) throw ValidationError("class id out of range");
  }
  const auto nc = static_cast<std::size_t>(num_classes);
  const std::size_t d = features.cols();
  const SparseFeatures x(features);
  Rng rng(config.seed);

  ClassifierHead head;
  head.kind = config.kind;
  head.arch = arch;
  head.config = config;
  const bool two_layer = config.kind == HeadKind::mlp2;
  if (two_layer) {
    head.weights.push_back(glorot(d, config.hidden, rng));
    head.weights.push_back(glorot(config.hidden, nc, rng));
    head.biases.assign({std::vector<double>(config.hidden, 0.0), std::vector<double>(nc, 0.0)});
  } else {
    head.weights.push_back(glorot(d, nc, rng));
    head.biases.assign({std::vector<double>(nc, 0.0)});
  }

  const std::span<const Index> train = split.train;
  const std::span<const Index> val = split.val.empty() ? train : std::span<const Index>(split.val);
  const double p = config.dropout;
  Adam adam(config.learning_rate);
  ClassifierHead best = head;
  double best_acc = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const std::vector<double> xv = x.dropped(p, rng);
    std::vector<DenseMatrix> gw(head.weights.size());
    std::vector<std::vector<double>> gb(head.biases.size());
    DenseMatrix g_logits;
    double loss = 0.0;

    if (arch == Architecture::appnp) {
      DenseMatrix z1 = x.times(xv, head.weights[0]);
      add_bias(z1, head.biases[0]);
      if (two_layer) {
        DenseMatrix h = z1;
        for (std::size_t e = 0; e < h.size(); ++e) h.data()[e] = std::max(0.0, h.data()[e]);
        const std::vector<double> mask = dropout_inplace(h, p, rng);
        DenseMatrix z2 = multiply(h, head.weights[1]);
        add_bias(z2, head.biases[1]);
        loss = cross_entropy(op.apply_rows(train, z2), train, classes, &g_logits);
        const DenseMatrix dz2 = op.apply_transpose_rows(train, g_logits);
        gw[1] = multiply_transposed(h, dz2);
        gb[1] = column_sums(dz2);
        DenseMatrix dz1 = multiply_bt(dz2, head.weights[1]);
        for (std::size_t e = 0; e < dz1.size(); ++e) dz1.data()[e] *= z1.data()[e] > 0.0 ? mask[e] : 0.0;
        gw[0] = x.transpose_times(xv, dz1);
        gb[0] = column_sums(dz1);
      } else {
        loss = cross_entropy(op.apply_rows(train, z1), train, classes, &g_logits);
        const DenseMatrix dz1 = op.apply_transpose_rows(train, g_logits);
        gw[0] = x.transpose_times(xv, dz1);
        gb[0] = column_sums(dz1);
      }
    } else {
      DenseMatrix z1 = op.apply(x.times(xv, head.weights[0]));
      add_bias(z1, head.biases[0]);
      DenseMatrix h = z1;
      for (std::size_t e = 0; e < h.size(); ++e) h.data()[e] = std::max(0.0, h.data()[e]);
      const std::vector<double> mask = dropout_inplace(h, p, rng);
      DenseMatrix logits = op.apply_rows(train, multiply(h, head.weights[1]));
      add_bias(logits, head.biases[1]);
      loss = cross_entropy(logits, train, classes, &g_logits);
      gb[1] = column_sums(g_logits);
      const DenseMatrix dp2 = op.apply_transpose_rows(train, g_logits);
      gw[1] = multiply_transposed(h, dp2);
      DenseMatrix dz1 = multiply_bt(dp2, head.weights[1]);
      for (std::size_t e = 0; e < dz1.size(); ++e) dz1.data()[e] *= z1.data()[e] > 0.0 ? mask[e] : 0.0;
      gb[0] = column_sums(dz1);
      gw[0] = x.transpose_times(xv, op.apply_transpose(dz1));
    }
    if (!std::isfinite(loss)) {
      throw NumericalError("training loss became non-finite at epoch " + std::to_string(epoch) +
                           "; lower the learning rate");
    }

    std::vector<std::span<double>> params;
    std::vector<std::span<const double>> grads;
    for (std::size_t k = 0; k < head.weights.size(); ++k) {
      auto w = as_span(head.weights[k]);
      auto g = std::span<double>(gw[k].data(), gw[k].size());
      for (std::size_t e = 0; e < w.size(); ++e) g[e] += config.weight_decay * w[e];
      params.push_back(w);
      grads.push_back(g);
    }
    for (std::size_t k = 0; k < head.biases.size(); ++k) {
      params.emplace_back(head.biases[k]);
      grads.emplace_back(gb[k]);
    }
    adam.step(params, grads);
    head.epochs_run = epoch;

    const DenseMatrix val_logits = forward_eval(head, op, x, val);
    const double acc = row_accuracy(val_logits, val, classes);
    const double vloss = cross_entropy(val_logits, val, classes, nullptr);
    if (acc > best_acc || (acc == best_acc && vloss < best_loss)) {
      best_acc = acc;
      best_loss = vloss;
      best = head;
      best.best_epoch = epoch;
      since = 0;
    } else if (++since >= config.patience && config.patience > 0) {
      break;
    }
  }
  best.epochs_run = head.epochs_run;
  best.best_val_accuracy = best_acc;
  TrainResult out;
  out.prediction = Prediction::from_scores(forward_eval(best, op, x, {}));
  out.head = std::move(best);
  return out;
}

}  // namespace

TrainResult train_appnp_head(const PropagationOperator& op, const DenseMatrix& features, std::span<const int> classes,
                             int num_classes, const SplitAssignment& split, const HeadConfig& config) {
  return train_head(Architecture::appnp, op, features, classes, num_classes, split, config);
}

TrainResult train_gcn_head(const PropagationOperator& op, const DenseMatrix& features, std::span<const int> classes,
                           int num_classes, const SplitAssignment& split, const HeadConfig& config) {
  return train_head(Architecture::gcn, op, features, classes, num_classes, split, config);
}

Prediction predict(const ClassifierHead& head, const PropagationOperator& op, const DenseMatrix& features) {
  if (head.weights.empty() || head.weights[0].rows() != features.cols()) {
    throw ValidationError("head does not match the feature width");
  }
  if (features.rows() != op.size()) throw ValidationError("features do not match operator size");
  return Prediction::from_scores(forward_eval(head, op, SparseFeatures(features), {}));
}

namespace {

constexpr char kMagic[8] = {'L', 'P', 'S', 'L', 'H', 'E', 'A', 'D'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& where) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ValidationError(where + ": truncated checkpoint");
  return v;
}

}  // namespace

void write_head(const ClassifierHead& head, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(head.kind));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(head.arch));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(head.weights.size()));
  for (std::size_t k = 0; k < head.weights.size(); ++k) {
    const auto& w = head.weights[k];
    put<std::uint64_t>(out, w.rows());
    put<std::uint64_t>(out, w.cols());
    out.write(reinterpret_cast<const char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double)));
    const auto& b = head.biases[k];
    put<std::uint64_t>(out, b.size());
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size() * sizeof(double)));
  }
  if (!out) throw ValidationError("write failed: " + path.string());
}

ClassifierHead read_head(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  const std::string where = path.string();
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw ValidationError(where + ": not a head checkpoint");
  }
  if (get<std::uint32_t>(in, where) != kVersion) throw ValidationError(where + ": unsupported checkpoint version");
  ClassifierHead head;
  const auto kind = get<std::uint32_t>(in, where);
  const auto arch = get<std::uint32_t>(in, where);
  if (kind > 2 || arch > 1) throw ValidationError(where + ": bad head kind");
  head.kind = static_cast<HeadKind>(kind);
  head.arch = static_cast<Architecture>(arch);
  const auto layers = get<std::uint32_t>(in, where);
  if (layers == 0 || layers > 2) throw ValidationError(where + ": bad layer count");
  for (std::uint32_t k = 0; k < layers; ++k) {
    const auto rows = get<std::uint64_t>(in, where);
    const auto cols = get<std::uint64_t>(in, where);
    if (rows > (1u << 24) || cols > (1u << 24)) throw ValidationError(where + ": implausible layer shape");
    DenseMatrix w(rows, cols);
    if (!in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double)))) {
      throw ValidationError(where + ": truncated checkpoint");
    }
    const auto blen = get<std::uint64_t>(in, where);
    if (blen != cols) throw ValidationError(where + ": bias length mismatch");
    std::vector<double> b(blen);
    if (!in.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size() * sizeof(double)))) {
      throw ValidationError(where + ": truncated checkpoint");
    }
    head.weights.push_back(std::move(w));
    head.biases.push_back(std::move(b));
  }
  return head;
}

double influence_sum(const DenseMatrix& b, const LabelMask& mask, std::size_t node) {
  if (b.rows() != mask.size() || node >= b.rows()) throw ValidationError("node outside B");
  double s = 0.0;
  for (Index j : mask.labeled) s += b(node, static_cast<std::size_t>(j));
  return s;
}

double influence_sum(const CsrMatrix& b, const LabelMask& mask, std::size_t node) {
  if (b.rows() != mask.size() || node >= b.rows()) throw ValidationError("node outside B");
  double s = 0.0;
  const auto idx = b.row_indices(node);
  const auto val = b.row_values(node);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (mask.is_labeled(static_cast<std::size_t>(idx[k]))) s += val[k];
  }
  return s;
}

void write_prediction(const Prediction& prediction, const std::filesystem::path& path,
                      const std::optional<std::filesystem::path>& scores_csv, const json& config) {
  json doc;
  doc["labels"] = prediction.labels;
  if (scores_csv) {
    std::ofstream csv(*scores_csv);
    if (!csv) throw ValidationError("cannot write " + scores_csv->string());
    char buf[40];
    for (std::size_t i = 0; i < prediction.scores.rows(); ++i) {
      for (std::size_t c = 0; c < prediction.scores.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", prediction.scores(i, c));
        csv << (c ? "," : "") << buf;
      }
      csv << '\n';
    }
    doc["scores_path"] = scores_csv->string();
  }
  if (!config.is_null()) doc["config"] = config;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

std::vector<int> read_prediction_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in).at("labels").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace lpsl
