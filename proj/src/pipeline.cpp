#include "lpsl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include "lpsl/error.hpp"

namespace lpsl {

using nlohmann::json;

namespace {

std::string to_string(Predictor p) {
  switch (p) {
    case Predictor::lp: return "lp";
    case Predictor::appnp: return "appnp";
    case Predictor::gcn: return "gcn";
  }
  return "?";
}

Predictor parse_predictor(const std::string& s) {
  if (s == "lp") return Predictor::lp;
  if (s == "appnp") return Predictor::appnp;
  if (s == "gcn") return Predictor::gcn;
  throw ValidationError("unknown predictor '" + s + "' (expected lp, appnp or gcn)");
}

std::string to_string(OperatorSource s) {
  switch (s) {
    case OperatorSource::lpsl: return "lpsl";
    case OperatorSource::ppr: return "ppr";
    case OperatorSource::adjacency: return "adjacency";
    case OperatorSource::identity: return "identity";
    case OperatorSource::file: return "file";
  }
  return "?";
}

OperatorSource parse_source(const std::string& s) {
  if (s == "lpsl") return OperatorSource::lpsl;
  if (s == "ppr") return OperatorSource::ppr;
  if (s == "adjacency") return OperatorSource::adjacency;
  if (s == "identity") return OperatorSource::identity;
  if (s == "file") return OperatorSource::file;
  throw ValidationError("unknown operator '" + s + "' (expected lpsl, ppr, adjacency, identity or file)");
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError("config section '" + where + "' must be an object");
  for (const auto& [key, v] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ValidationError("unknown config key '" + where + "." + key + "'");
    }
  }
}

Amount amount_from_json(const json& v, const std::string& where) {
  if (v.is_string()) return Amount::parse(v.get<std::string>());
  if (v.is_number()) {
    const double d = v.get<double>();
    if (d >= 1.0 && std::floor(d) == d) return Amount::count(static_cast<std::size_t>(d));
    if (d > 0.0 && d < 1.0) return Amount::ratio(d);
  }
  throw ValidationError(where + ": expected a count or a fraction");
}

std::filesystem::path path_value(json& v) {
  std::string s = v.get<std::string>();
  if (s.empty()) return {};
  const std::filesystem::path p = std::filesystem::absolute(s).lexically_normal();
  v = p.string();
  return p;
}

}  // namespace

json to_json(const ModelSpec& spec) {
  return json{{"name", spec.name},
              {"predictor", to_string(spec.predictor)},
              {"operator", to_string(spec.source)},
              {"lambda", spec.lambda ? json(*spec.lambda) : json(nullptr)},
              {"ppr_alpha", spec.ppr_alpha},
              {"ppr_steps", spec.ppr_steps},
              {"structure", spec.structure.string()}};
}

ModelSpec model_spec_from_json(const json& doc) {
  check_keys(doc, {"name", "predictor", "operator", "lambda", "ppr_alpha", "ppr_steps", "structure"}, "model");
  try {
    ModelSpec s;
    s.name = doc.value("name", std::string());
    s.predictor = parse_predictor(doc.value("predictor", std::string("lp")));
    s.source = parse_source(doc.value("operator", std::string("lpsl")));
    if (doc.contains("lambda") && !doc["lambda"].is_null()) s.lambda = doc["lambda"].get<double>();
    s.ppr_alpha = doc.value("ppr_alpha", 0.1);
    s.ppr_steps = doc.value("ppr_steps", std::size_t{10});
    s.structure = doc.value("structure", std::string());
    if (s.name.empty()) s.name = to_string(s.predictor) + "-" + to_string(s.source);
    if (!(s.ppr_alpha >= 0.0 && s.ppr_alpha <= 1.0)) throw ValidationError("model.ppr_alpha must lie in [0, 1]");
    if (s.ppr_steps == 0) throw ValidationError("model.ppr_steps must be >= 1");
    if (s.lambda && !(*s.lambda >= 0.0)) throw ValidationError("model.lambda must be >= 0");
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
}

std::vector<ModelSpec> default_sweep_models() {
  // Learned B at lambda = 9 has alpha = 1 / (1 + lambda) = 0.1, the teleport of
  // the vanilla decoupled baselines; lambda = 4 sits inside the coupled range.
  std::vector<ModelSpec> m(6);
  m[0] = {"LP", Predictor::lp, OperatorSource::ppr, std::nullopt, 0.1, 200, {}};
  m[1] = {"LPSL-LP", Predictor::lp, OperatorSource::lpsl, 9.0, 0.1, 10, {}};
  m[2] = {"APPNP", Predictor::appnp, OperatorSource::ppr, std::nullopt, 0.1, 10, {}};
  m[3] = {"LPSL-APPNP", Predictor::appnp, OperatorSource::lpsl, 9.0, 0.1, 10, {}};
  m[4] = {"GCN", Predictor::gcn, OperatorSource::adjacency, std::nullopt, 0.0, 1, {}};
  m[5] = {"LPSL-GCN", Predictor::gcn, OperatorSource::lpsl, 4.0, 0.1, 10, {}};
  return m;
}

json RunConfig::defaults() {
  json solver = to_json(SolverConfig{});
  solver["mode"] = "dense";
  json models = json::array();
  for (const auto& m : default_sweep_models()) models.push_back(to_json(m));
  return json{
      {"data", {{"graph", ""}, {"features", ""}, {"labels", ""}, {"self_loops", "reject"}, {"normalize_features", true}}},
      {"split",
       {{"file", ""}, {"train_nodes", ""}, {"per_class", "20"}, {"val", "500"}, {"test", "1000"}, {"seed", 0}}},
      {"lps", {{"alpha", 0.1}, {"tol", 1e-10}, {"max_iter", 10000}, {"file", ""}}},
      {"groups",
       {{"metric", "lps"},
        {"num_groups", 7},
        {"min_group_size", 10},
        {"outlier_quantile", 0.99},
        {"clamp_above", true},
        {"file", ""}}},
      {"solver", solver},
      {"model", to_json(ModelSpec{"", Predictor::lp, OperatorSource::lpsl, std::nullopt, 0.1, 10, {}})},
      {"head", to_json(HeadConfig{})},
      {"sweep", {{"seeds", 10}, {"first_seed", 0}, {"models", models}}},
      {"output", {{"dir", ""}, {"out", ""}, {"csv", ""}, {"checkpoint", ""}, {"prediction", ""}}},
      {"threads", 1}};
}

void merge_config(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw ValidationError("config '" + (where.empty() ? "<root>" : where) + "' must be an object");
  for (const auto& [key, v] : patch.items()) {
    const std::string at = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw ValidationError("unknown config key '" + at + "'");
    json& slot = base[key];
    if (slot.is_object() && v.is_object()) merge_config(slot, v, at);
    else slot = v;
  }
}

json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  const auto dir = std::filesystem::absolute(path).parent_path();
  auto fix = [&](json& section, const char* key) {
    if (section.is_object() && section.contains(key) && section[key].is_string()) {
      const std::string s = section[key].get<std::string>();
      if (!s.empty() && std::filesystem::path(s).is_relative()) section[key] = (dir / s).lexically_normal().string();
    }
  };
  for (const char* k : {"graph", "features", "labels"}) fix(doc["data"], k);
  for (const char* k : {"file", "train_nodes"}) fix(doc["split"], k);
  fix(doc["lps"], "file");
  fix(doc["groups"], "file");
  fix(doc["model"], "structure");
  for (const char* k : {"dir", "out", "csv", "checkpoint", "prediction"}) fix(doc["output"], k);
  if (doc.contains("sweep") && doc["sweep"].contains("models") && doc["sweep"]["models"].is_array()) {
    for (auto& m : doc["sweep"]["models"]) fix(m, "structure");
  }
  // operator[] above may have inserted null sections
  for (auto it = doc.begin(); it != doc.end();) {
    if (it->is_null()) it = doc.erase(it);
    else ++it;
  }
  return doc;
}

RunConfig RunConfig::from_json(const json& input) {
  RunConfig c;
  c.doc = input;
  json& d = c.doc;
  check_keys(d, {"data", "split", "lps", "groups", "solver", "model", "head", "sweep", "output", "threads"}, "config");
  try {
    json& data = d["data"];
    check_keys(data, {"graph", "features", "labels", "self_loops", "normalize_features"}, "data");
    c.graph = path_value(data["graph"]);
    c.features = path_value(data["features"]);
    c.labels = path_value(data["labels"]);
    const std::string loops = data["self_loops"].get<std::string>();
    if (loops == "reject") c.self_loops = SelfLoopPolicy::reject;
    else if (loops == "add") c.self_loops = SelfLoopPolicy::add_self_loop;
    else throw ValidationError("data.self_loops must be 'reject' or 'add'");
    c.normalize_features = data["normalize_features"].get<bool>();

    json& split = d["split"];
    check_keys(split, {"file", "train_nodes", "per_class", "val", "test", "seed"}, "split");
    c.split_file = path_value(split["file"]);
    c.train_nodes = path_value(split["train_nodes"]);
    c.per_class = amount_from_json(split["per_class"], "split.per_class");
    c.n_val = amount_from_json(split["val"], "split.val");
    c.n_test = amount_from_json(split["test"], "split.test");
    c.seed = split["seed"].get<std::uint64_t>();

    json& lps = d["lps"];
    check_keys(lps, {"alpha", "tol", "max_iter", "file"}, "lps");
    c.lps_alpha = lps["alpha"].get<double>();
    c.lps_tol = lps["tol"].get<double>();
    c.lps_max_iter = lps["max_iter"].get<std::size_t>();
    c.lps_file = path_value(lps["file"]);
    if (!(c.lps_alpha > 0.0 && c.lps_alpha <= 1.0)) throw ValidationError("lps.alpha must lie in (0, 1]");

    json& groups = d["groups"];
    check_keys(groups, {"metric", "num_groups", "min_group_size", "outlier_quantile", "clamp_above", "file"}, "groups");
    c.group_metric = parse_group_metric(groups["metric"].get<std::string>());
    c.partition.num_groups = groups["num_groups"].get<int>();
    c.partition.min_group_size = groups["min_group_size"].get<std::size_t>();
    if (groups["outlier_quantile"].is_null()) c.partition.outlier_quantile.reset();
    else c.partition.outlier_quantile = groups["outlier_quantile"].get<double>();
    if (c.partition.outlier_quantile && !(*c.partition.outlier_quantile > 0.0 && *c.partition.outlier_quantile <= 1.0)) {
      throw ValidationError("groups.outlier_quantile must lie in (0, 1] or be null");
    }
    c.partition.clamp_above = groups["clamp_above"].get<bool>();
    c.groups_file = path_value(groups["file"]);

    json solver = d["solver"];
    if (!solver.is_object()) throw ValidationError("config section 'solver' must be an object");
    c.solver_mode = solver.value("mode", std::string("dense"));
    if (c.solver_mode != "dense" && c.solver_mode != "sparse") throw ValidationError("solver.mode must be dense or sparse");
    solver.erase("mode");
    c.solver = solver_config_from_json(solver);

    json& model = d["model"];
    c.model = model_spec_from_json(model);
    if (!c.model.structure.empty()) c.model.structure = path_value(model["structure"]);

    c.head = head_config_from_json(d["head"]);

    json& sweep = d["sweep"];
    check_keys(sweep, {"seeds", "first_seed", "models"}, "sweep");
    c.sweep_seeds = sweep["seeds"].get<std::size_t>();
    c.sweep_first_seed = sweep["first_seed"].get<std::uint64_t>();
    if (!sweep["models"].is_array()) throw ValidationError("sweep.models must be an array");
    std::set<std::string> names;
    for (auto& m : sweep["models"]) {
      ModelSpec s = model_spec_from_json(m);
      if (!s.structure.empty()) s.structure = path_value(m["structure"]);
      if (!names.insert(s.name).second) throw ValidationError("duplicate sweep model name '" + s.name + "'");
      c.sweep_models.push_back(std::move(s));
    }

    json& out = d["output"];
    check_keys(out, {"dir", "out", "csv", "checkpoint", "prediction"}, "output");
    c.out_dir = path_value(out["dir"]);
    c.out = path_value(out["out"]);
    c.csv = path_value(out["csv"]);
    c.checkpoint = path_value(out["checkpoint"]);
    c.prediction = path_value(out["prediction"]);

    c.threads = d["threads"].get<std::size_t>();
    if (c.threads == 0) throw ValidationError("threads must be >= 1");
    c.solver.threads = c.threads;
    c.solver.validate();
    c.head.validate();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

std::size_t effective_threads(std::size_t requested) {
  std::size_t t = std::max<std::size_t>(1, requested);
  if (const char* env = std::getenv("LPSL_THREADS")) {
    char* end = nullptr;
    const unsigned long cap = std::strtoul(env, &end, 10);
    if (end != env && cap > 0) t = std::min<std::size_t>(t, cap);
  }
  return t;
}

void row_normalize(DenseMatrix& features) {
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto row = features.row(i);
    double s = 0.0;
    for (double v : row) s += v;
    if (s == 0.0) continue;
    for (double& v : row) v /= s;
  }
}

Context load_context(const RunConfig& config) {
  if (config.graph.empty() || config.features.empty() || config.labels.empty()) {
    throw ValidationError("graph, features and labels paths are required");
  }
  Context ctx;
  ctx.dataset = load_dataset(config.graph, config.features, config.labels, config.self_loops);
  if (config.normalize_features) row_normalize(ctx.dataset.features);
  ctx.ops = symmetric_normalize(ctx.dataset.graph, config.self_loops);
  return ctx;
}

SplitAssignment make_run_split(const Context& ctx, const RunConfig& config, std::uint64_t seed) {
  if (!config.split_file.empty()) return read_split(config.split_file, ctx.dataset.num_nodes());
  return make_split(ctx.dataset, config.per_class, config.n_val, config.n_test, seed);
}

PropagationOperator learn_operator(const NormalizedOperators& ops, const LabelMask& mask, const SolverConfig& solver,
                                   const std::string& mode, SolveMeta* meta) {
  if (mode == "dense") {
    DenseStructure b = solve_dense(ops, mask, solver);
    if (meta) *meta = b.meta;
    return PropagationOperator::dense(std::move(b.values));
  }
  SparseStructure b = solve_sparse(ops, mask, solver);
  if (meta) *meta = b.meta;
  return PropagationOperator::sparse(b.to_csr());
}

PropagationOperator build_operator(const ModelSpec& spec, const Context& ctx, const LabelMask& mask,
                                   const RunConfig& config, SolveMeta* meta) {
  switch (spec.source) {
    case OperatorSource::lpsl: {
      SolverConfig s = config.solver;
      if (spec.lambda) s.lambda = *spec.lambda;
      return learn_operator(ctx.ops, mask, s, config.solver_mode, meta);
    }
    case OperatorSource::ppr: return PropagationOperator::ppr_iterative(ctx.ops.norm_adj, spec.ppr_alpha, spec.ppr_steps);
    case OperatorSource::adjacency: return PropagationOperator::ppr_iterative(ctx.ops.norm_adj, 0.0, 1);
    case OperatorSource::identity: return PropagationOperator::identity(ctx.ops.size());
    case OperatorSource::file: {
      if (spec.structure.empty()) throw ValidationError("operator 'file' needs a structure path");
      auto b = read_structure(spec.structure);
      if (auto* d = std::get_if<DenseStructure>(&b)) {
        if (d->n() != ctx.ops.size()) throw ValidationError("structure size does not match the graph");
        if (meta) *meta = d->meta;
        return PropagationOperator::dense(std::move(d->values));
      }
      auto& sp = std::get<SparseStructure>(b);
      if (sp.n != ctx.ops.size()) throw ValidationError("structure size does not match the graph");
      if (meta) *meta = sp.meta;
      return PropagationOperator::sparse(sp.to_csr());
    }
  }
  throw ValidationError("unknown operator source");
}

GroupPartition partition_for(const Context& ctx, const LabelMask& mask, std::span<const Index> test,
                             const RunConfig& config, LpsVector* lps_out) {
  std::vector<double> values;
  switch (config.group_metric) {
    case GroupMetric::lps: {
      LpsVector lps = lps_scores(ctx.ops, mask, config.lps_alpha, config.lps_tol, config.lps_max_iter);
      values = lps.scores;
      if (lps_out) *lps_out = std::move(lps);
      break;
    }
    case GroupMetric::degree: {
      const auto deg = ctx.dataset.graph.degrees();
      values.assign(deg.begin(), deg.end());
      break;
    }
    case GroupMetric::spd: {
      for (int dist : spd_to_labeled(ctx.dataset.graph, mask)) {
        values.push_back(dist == kUnreachable ? std::numeric_limits<double>::infinity() : static_cast<double>(dist));
      }
      break;
    }
  }
  return partition_groups(values, config.group_metric, test, config.partition);
}

SplitOutcome run_split(const Context& ctx, const SplitAssignment& split, const RunConfig& config,
                       std::span<const ModelSpec> models, const Logger& log) {
  const Dataset& ds = ctx.dataset;
  const LabelMask mask = LabelMask::from_nodes(ds.num_nodes(), split.train);
  SplitOutcome out;
  out.seed = split.seed;
  out.partition = partition_for(ctx, mask, split.test, config, &out.lps);

  std::map<double, std::pair<PropagationOperator, SolveMeta>> learned;
  for (const auto& spec : models) {
    std::optional<PropagationOperator> op;
    std::optional<SolveMeta> meta;
    if (spec.source == OperatorSource::lpsl) {
      const double lambda = spec.lambda.value_or(config.solver.lambda);
      auto it = learned.find(lambda);
      if (it == learned.end()) {
        SolveMeta m;
        PropagationOperator b = build_operator(spec, ctx, mask, config, &m);
        if (log) {
          char buf[200];
          std::snprintf(buf, sizeof buf, "  learned B (lambda=%g, %s): %zu rounds, residual %.3g, nnz %zu, %s",
                        lambda, m.mode.c_str(), m.outer_rounds, m.residual_inf, m.nnz, m.stop_reason.c_str());
          log(buf);
        }
        it = learned.emplace(lambda, std::make_pair(std::move(b), m)).first;
      }
      op = it->second.first;
      meta = it->second.second;
    } else {
      SolveMeta m;
      op = build_operator(spec, ctx, mask, config, &m);
      if (spec.source == OperatorSource::file) meta = m;
    }

    ModelOutcome mo;
    mo.spec = spec;
    mo.solve = meta;
    HeadConfig head = config.head;
    head.seed = config.head.seed + split.seed;
    switch (spec.predictor) {
      case Predictor::lp: mo.labels = propagate_labels(*op, mask, ds.classes, ds.num_classes).labels; break;
      case Predictor::appnp:
        mo.labels = train_appnp_head(*op, ds.features, ds.classes, ds.num_classes, split, head).prediction.labels;
        break;
      case Predictor::gcn:
        if (head.kind != HeadKind::mlp2) head.kind = HeadKind::mlp2;
        mo.labels = train_gcn_head(*op, ds.features, ds.classes, ds.num_classes, split, head).prediction.labels;
        break;
    }
    mo.test_accuracy = accuracy(mo.labels, ds.classes, split.test);
    mo.bias = bias_report(mo.labels, ds.classes, out.partition);
    if (log) {
      char buf[200];
      std::snprintf(buf, sizeof buf, "  %-12s acc %.4f  wdp %.4f  wsd %.4f", spec.name.c_str(), mo.test_accuracy,
                    mo.bias.wdp, mo.bias.wsd);
      log(buf);
    }
    out.models.push_back(std::move(mo));
  }
  return out;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd m;
  m.count = values.size();
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

std::vector<ModelAggregate> aggregate(std::span<const SplitOutcome> splits) {
  std::vector<ModelAggregate> out;
  if (splits.empty()) return out;
  for (std::size_t k = 0; k < splits.front().models.size(); ++k) {
    ModelAggregate agg;
    agg.name = splits.front().models[k].spec.name;
    std::vector<double> acc, wdp, wsd, wcv;
    std::vector<std::vector<double>> groups;
    for (const auto& s : splits) {
      if (k >= s.models.size() || s.models[k].spec.name != agg.name) {
        throw ValidationError("splits ran different model lists");
      }
      const auto& m = s.models[k];
      acc.push_back(m.test_accuracy);
      wdp.push_back(m.bias.wdp);
      wsd.push_back(m.bias.wsd);
      if (m.bias.wcv) wcv.push_back(*m.bias.wcv);
      const auto& g = m.bias.accuracy.groups;
      if (groups.size() < g.size()) groups.resize(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) groups[i].push_back(g[i].accuracy);
    }
    agg.accuracy = mean_std(acc);
    agg.wdp = mean_std(wdp);
    agg.wsd = mean_std(wsd);
    agg.wcv = mean_std(wcv);
    for (const auto& g : groups) agg.group_accuracy.push_back(mean_std(g));
    out.push_back(std::move(agg));
  }
  return out;
}

SweepResult run_sweep(const Context& ctx, const RunConfig& config, std::span<const ModelSpec> models,
                      const Logger& log) {
  if (!config.split_file.empty()) throw ValidationError("sweep generates its own splits; drop split.file");
  if (config.sweep_seeds == 0) throw ValidationError("sweep needs at least one seed");
  SweepResult out;
  for (std::size_t k = 0; k < config.sweep_seeds; ++k) {
    const std::uint64_t seed = config.sweep_first_seed + k;
    if (log) log("split seed " + std::to_string(seed));
    const SplitAssignment split = make_run_split(ctx, config, seed);
    out.splits.push_back(run_split(ctx, split, config, models, log));
  }
  out.models = aggregate(out.splits);
  return out;
}

std::string format_aggregate(std::span<const ModelAggregate> models) {
  std::string s;
  char buf[256];
  for (const auto& m : models) {
    std::snprintf(buf, sizeof buf,
                  "%-12s acc %6.2f ± %5.2f  wdp %.4f ± %.4f  wsd %.4f ± %.4f  wcv %.4f ± %.4f\n",
                  m.name.c_str(), 100.0 * m.accuracy.mean, 100.0 * m.accuracy.std, m.wdp.mean, m.wdp.std,
                  m.wsd.mean, m.wsd.std, m.wcv.mean, m.wcv.std);
    s += buf;
  }
  return s;
}

json to_json(const SplitOutcome& outcome) {
  json models = json::array();
  for (const auto& m : outcome.models) {
    json e{{"model", to_json(m.spec)}, {"test_accuracy", m.test_accuracy}, {"bias", to_json(m.bias)}};
    if (m.solve) e["solve"] = to_json(*m.solve);
    models.push_back(e);
  }
  json bounds = json::array();
  for (const auto& b : outcome.partition.boundaries) {
    bounds.push_back({std::isfinite(b.lo) ? json(b.lo) : json(nullptr), std::isfinite(b.hi) ? json(b.hi) : json(nullptr)});
  }
  return json{{"seed", outcome.seed},
              {"group_metric", to_string(outcome.partition.metric)},
              {"boundaries", bounds},
              {"models", models}};
}

json to_json(const ModelAggregate& agg) {
  auto ms = [](const MeanStd& m) { return json{{"mean", m.mean}, {"std", m.std}, {"n", m.count}}; };
  json groups = json::array();
  for (const auto& g : agg.group_accuracy) groups.push_back(ms(g));
  return json{{"name", agg.name},         {"accuracy", ms(agg.accuracy)}, {"wdp", ms(agg.wdp)},
              {"wsd", ms(agg.wsd)},       {"wcv", ms(agg.wcv)},           {"group_accuracy", groups}};
}

}  // namespace lpsl
