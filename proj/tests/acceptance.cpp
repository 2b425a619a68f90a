// Acceptance run: one PASS/FAIL line per criterion. `acceptance 3 5` runs a subset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "lpsl/bias.hpp"
#include "lpsl/pipeline.hpp"
#include "lpsl/propagation.hpp"
#include "lpsl/solver.hpp"
#include "test_util.hpp"

using namespace lpsl;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void note(const std::string& s) { std::cerr << "  .. " << s << std::endl; }

struct Instance {
  Graph graph;
  NormalizedOperators ops;
  LabelMask mask;
};

Instance random_instance(std::size_t n, std::size_t labeled, std::uint64_t seed, double p) {
  Instance in;
  in.graph = testutil::random_connected_graph(n, p, seed, seed % 3 == 0);
  in.ops = symmetric_normalize(in.graph);
  in.mask = LabelMask::from_nodes(n, testutil::random_subset(n, labeled, seed + 101));
  return in;
}

const Dataset& cora() {
  static const Dataset ds =
      load_dataset(testutil::cora("cora.edges"), testutil::cora("cora.features.csv"), testutil::cora("cora.labels"));
  return ds;
}

const NormalizedOperators& cora_ops() {
  static const NormalizedOperators ops = symmetric_normalize(cora().graph);
  return ops;
}

const SplitAssignment& cora_split() {
  static const SplitAssignment s = make_split(cora(), Amount::count(20), Amount::count(500), Amount::count(1000), 0);
  return s;
}

Verdict ppr_recovery() {
  const auto t0 = Clock::now();
  double solve_err = 0.0, closed_err = 0.0;
  bool all_converged = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 10 + (seed * 7) % 41;
    const auto in = random_instance(n, 1 + seed % 5, seed, 3.0 / static_cast<double>(n));
    SolverConfig cfg;
    cfg.lambda = 0.5 + static_cast<double>(seed % 10);
    cfg.rho = 0.0;
    cfg.beta = 0.0;
    cfg.gamma = 1.0 / (2.0 + 4.0 * cfg.lambda);
    cfg.step_tol = 1e-12;
    cfg.max_outer = 5000;
    const auto sol = solve_dense(in.ops, in.mask, cfg);
    all_converged &= sol.meta.stop_reason == "step";
    const auto closed = closed_form_unconstrained(in.ops, cfg.lambda);
    solve_err = std::max(solve_err, max_abs_difference(sol.values, closed.values));

    const double alpha = 1.0 / (1.0 + cfg.lambda);
    const auto ni = static_cast<Eigen::Index>(n);
    const Eigen::MatrixXd ppr =
        alpha * (Eigen::MatrixXd::Identity(ni, ni) - (1.0 - alpha) * testutil::dense_norm_adj(in.graph)).inverse();
    closed_err = std::max(closed_err, (testutil::to_eigen(closed.values) - ppr).cwiseAbs().maxCoeff());
  }
  const double t = seconds_since(t0);
  return {all_converged && solve_err <= 1e-5 && closed_err <= 1e-9 && t < 30.0,
          fmt("solve vs closed form %.2e (<= 1e-5), closed form vs PPR %.2e (<= 1e-9), %.1f s (< 30)", solve_err,
              closed_err, t)};
}

Verdict gradient_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const std::size_t n = 2 + seed % 11;
    const auto in = random_instance(n, 1 + seed % n, seed + 500, 0.3);
    const DenseMatrix b = testutil::random_matrix(n, n, seed + 1);
    const DenseMatrix yv = testutil::random_matrix(1, n, seed + 2);
    const std::span<const double> y(yv.data(), n);
    SolverConfig cfg;
    cfg.lambda = 0.1 + static_cast<double>(seed % 6) * 3.0;
    cfg.rho = 0.05 * static_cast<double>(seed % 4);
    cfg.c = 0.8;
    const DenseMatrix g = lagrangian_gradient(b, y, in.ops.norm_lap, in.mask, cfg);
    const double h = 1e-4;
    double err = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        DenseMatrix bp = b, bm = b;
        bp(i, j) += h;
        bm(i, j) -= h;
        const double fd = (lagrangian_value(bp, y, in.ops.norm_lap, in.mask, cfg) -
                           lagrangian_value(bm, y, in.ops.norm_lap, in.mask, cfg)) /
                          (2.0 * h);
        err = std::max(err, std::abs(fd - g(i, j)));
        norm = std::max(norm, std::abs(g(i, j)));
      }
    }
    worst = std::max(worst, err / norm);
  }
  const double t = seconds_since(t0);
  return {worst < 1e-5 && t < 10.0, fmt("25 instances, worst relative error %.2e (< 1e-5), %.2f s (< 10)", worst, t)};
}

std::optional<DenseStructure> feasible_solution;

Verdict feasibility() {
  const auto t0 = Clock::now();
  SolverConfig cfg;
  cfg.lambda = 10.0;
  cfg.c = 1.0;
  cfg.rho = 0.01;
  cfg.beta = 0.0;
  cfg.outer_tol = 1e-2;
  cfg.max_outer = 500;
  cfg.dense_cap = 3000;
  const auto mask = LabelMask::from_nodes(cora().num_nodes(), cora_split().train);
  feasible_solution = solve_dense(cora_ops(), mask, cfg);
  const auto& m = feasible_solution->meta;
  return {m.stop_reason == "residual" && m.residual_inf <= 1e-2 && m.outer_rounds <= 500,
          fmt("residual %.2e (<= 1e-2) after %zu rounds (<= 500), stop=%s, %.0f s", m.residual_inf, m.outer_rounds,
              m.stop_reason.c_str(), seconds_since(t0))};
}

Verdict influence() {
  if (!feasible_solution) feasibility();
  const auto mask = LabelMask::from_nodes(cora().num_nodes(), cora_split().train);
  double worst = 0.0;
  for (Index v : cora_split().test)
    worst = std::max(worst, std::abs(influence_sum(feasible_solution->values, mask, v) - 1.0));
  return {worst <= 2e-2, fmt("max |influence - c| over %zu test nodes %.2e (<= 2e-2)", cora_split().test.size(), worst)};
}

Verdict sparse_dense() {
  std::size_t exact = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = random_instance(20, 2 + seed % 4, seed + 900, 0.2);
    SolverConfig cfg;
    cfg.lambda = 1.0 + static_cast<double>(seed);
    cfg.beta = 0.0;
    cfg.block_size = 20;
    cfg.max_outer = 50;
    cfg.max_density = 1.0;
    const auto dense = solve_dense(in.ops, in.mask, cfg);
    const auto sparse = solve_sparse(in.ops, in.mask, cfg);
    exact += sparse.to_dense() == dense.values ? 1 : 0;
  }

  const auto mask = LabelMask::from_nodes(cora().num_nodes(), cora_split().train);
  SolverConfig cfg;
  cfg.lambda = 10.0;
  cfg.max_outer = 10;
  cfg.outer_tol = 0.0;
  cfg.max_density = 1.0;
  std::vector<std::size_t> nnz;
  std::string trend;
  for (double beta : {0.0, 1e-6, 1e-5, 1e-4}) {
    cfg.beta = beta;
    nnz.push_back(solve_sparse(cora_ops(), mask, cfg).entries.size());
    trend += (trend.empty() ? "" : " ") + std::to_string(nnz.back());
    note("beta " + fmt("%g", beta) + " nnz " + std::to_string(nnz.back()));
  }
  const bool monotone = std::is_sorted(nnz.rbegin(), nnz.rend());
  return {exact == 10 && monotone,
          fmt("%zu/10 n=20 instances bitwise equal; Cora nnz over beta {0,1e-6,1e-5,1e-4}: %s", exact, trend.c_str())};
}

Verdict metric_cases() {
  const std::vector<std::pair<std::size_t, std::size_t>> two{{50, 40}, {50, 30}}, flat{{10, 5}, {30, 15}, {4, 2}};
  const auto r = bias_metrics(group_accuracy_from_counts(two));
  const auto z = bias_metrics(group_accuracy_from_counts(flat));
  const bool ok = r.wdp == 0.1 && r.wsd == 0.1 && r.wcv && *r.wcv == 1.0 / 7.0 && z.wdp == 0.0 && z.wsd == 0.0 &&
                  z.wcv && *z.wcv == 0.0;
  return {ok, fmt("two groups wdp=%.17g wsd=%.17g wcv=%.17g; equal groups wdp=%g wsd=%g", r.wdp, r.wsd,
                  r.wcv.value_or(-1.0), z.wdp, z.wsd)};
}

std::optional<SweepResult> sweep;

const SweepResult& cora_sweep() {
  if (!sweep) {
    const std::string dir = std::string(LPSL_DATA_DIR) + "/cora/";
    nlohmann::json doc = RunConfig::defaults();
    merge_config(doc, {{"data",
                        {{"graph", dir + "cora.edges"},
                         {"features", dir + "cora.features.csv"},
                         {"labels", dir + "cora.labels"}}}});
    const RunConfig cfg = RunConfig::from_json(doc);
    const Context ctx = load_context(cfg);
    sweep = run_sweep(ctx, cfg, cfg.sweep_models, note);
    std::cerr << format_aggregate(sweep->models);
  }
  return *sweep;
}

const ModelAggregate& model(const std::string& name) {
  for (const auto& m : cora_sweep().models)
    if (m.name == name) return m;
  throw std::runtime_error("no model " + name);
}

Verdict bias_reduction() {
  const auto& lp = model("LP");
  const auto& lpsl = model("LPSL-LP");
  const double reduction = 1.0 - lpsl.wdp.mean / lp.wdp.mean;
  return {reduction >= 0.3, fmt("WDP %.4f -> %.4f over %zu splits, reduction %.1f%% (>= 30%%)", lp.wdp.mean,
                                lpsl.wdp.mean, lp.wdp.count, 100.0 * reduction)};
}

Verdict accuracy_direction() {
  const double appnp = 100.0 * model("APPNP").accuracy.mean, lappnp = 100.0 * model("LPSL-APPNP").accuracy.mean;
  const double gcn = 100.0 * model("GCN").accuracy.mean, lgcn = 100.0 * model("LPSL-GCN").accuracy.mean;
  return {lappnp - appnp >= -1.0 && lgcn - gcn >= -1.0,
          fmt("APPNP %.2f -> %.2f (%+.2f), GCN %.2f -> %.2f (%+.2f), bar -1.00", appnp, lappnp, lappnp - appnp, gcn,
              lgcn, lgcn - gcn)};
}

Verdict lps_trend() {
  const auto& groups = model("LP").group_accuracy;
  std::size_t inversions = 0;
  std::string acc;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (k && groups[k].mean < groups[k - 1].mean) ++inversions;
    acc += fmt(k ? " %.3f" : "%.3f", groups[k].mean);
  }
  return {groups.size() >= 2 && inversions <= 1,
          fmt("LP group accuracy low to high LPS: %s; %zu inversions (<= 1)", acc.c_str(), inversions)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Verdict (*)()>> criteria{
      {"ppr recovery", ppr_recovery},
      {"gradient", gradient_check},
      {"feasibility", feasibility},
      {"influence fairness", influence},
      {"sparse/dense equivalence and sparsity trend", sparse_dense},
      {"bias reduction", bias_reduction},
      {"accuracy direction", accuracy_direction},
      {"metric hand cases", metric_cases},
      {"lps group trend", lps_trend},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  std::vector<std::string> summary;
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    std::cerr << "criterion " << id << ": " << criteria[k].first << std::endl;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    summary.push_back(fmt("%s %d %s: ", v.pass ? "PASS" : "FAIL", id, criteria[k].first) + v.detail);
    std::cout << summary.back() << std::endl;
  }
  std::cout << "\nsummary: " << summary.size() - failed << "/" << summary.size() << " passed\n";
  for (const auto& s : summary) std::cout << s << "\n";
  return failed == 0 ? 0 : 1;
}
