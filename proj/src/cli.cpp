#include "lpsl/cli.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "lpsl/error.hpp"
#include "lpsl/pipeline.hpp"

namespace lpsl {

using nlohmann::json;

namespace {

enum class Kind { text, number, integer, set_true, set_false, quantile };

struct Flag {
  const char* name;
  const char* path;
  Kind kind;
  const char* help;
};

const std::vector<Flag> kData = {
    {"--graph", "data.graph", Kind::text, "edge list ('u v' or 'u v w' per line)"},
    {"--features", "data.features", Kind::text, "feature CSV, one row per node"},
    {"--labels", "data.labels", Kind::text, "'node class' lines"},
    {"--self-loops", "data.self_loops", Kind::text, "zero-degree policy: reject or add"},
    {"--raw-features", "data.normalize_features", Kind::set_false, "skip row normalization of features"},
};

const std::vector<Flag> kSplit = {
    {"--split", "split.file", Kind::text, "split JSON written by `lpsl split`"},
    {"--train-labels", "split.train_nodes", Kind::text, "file of labeled node ids (first field per line)"},
    {"--per-class", "split.per_class", Kind::text, "training labels per class: count or fraction (0.6, 60%)"},
    {"--val", "split.val", Kind::text, "validation size: count or fraction of n"},
    {"--test", "split.test", Kind::text, "test size: count or fraction of n"},
    {"--seed", "split.seed", Kind::integer, "split seed"},
};

const std::vector<Flag> kLps = {
    {"--alpha", "lps.alpha", Kind::number, "teleport probability for LPS"},
    {"--lps-tol", "lps.tol", Kind::number, "LPS residual tolerance"},
    {"--lps-max-iter", "lps.max_iter", Kind::integer, "LPS iteration cap"},
};

const std::vector<Flag> kGroups = {
    {"--metric", "groups.metric", Kind::text, "grouping metric: lps, degree or spd"},
    {"--num-groups", "groups.num_groups", Kind::integer, "number of groups before merging"},
    {"--min-group-size", "groups.min_group_size", Kind::integer, "smaller groups are merged into a neighbor"},
    {"--outlier-quantile", "groups.outlier_quantile", Kind::quantile, "LPS clipping quantile, or 'none'"},
    {"--drop-above", "groups.clamp_above", Kind::set_false, "exclude degree/spd values above the last group"},
    {"--lps", "lps.file", Kind::text, "precomputed LPS JSON"},
};

const std::vector<Flag> kSolver = {
    {"--mode", "solver.mode", Kind::text, "dense or sparse"},
    {"--lambda", "solver.lambda", Kind::number, "smoothness weight"},
    {"--c", "solver.c", Kind::number, "target labeled row sum"},
    {"--rho", "solver.rho", Kind::number, "augmented penalty (0 disables the constraint)"},
    {"--gamma", "solver.gamma", Kind::number, "gradient step"},
    {"--beta", "solver.beta", Kind::number, "l1 weight (sparse mode)"},
    {"--block-size", "solver.block_size", Kind::integer, "columns per block"},
    {"--inner-steps", "solver.inner_steps", Kind::integer, "gradient steps per block and round"},
    {"--outer-tol", "solver.outer_tol", Kind::number, "residual tolerance"},
    {"--max-outer", "solver.max_outer", Kind::integer, "outer round cap"},
    {"--step-tol", "solver.step_tol", Kind::number, "stop when no step moves an entry more than this"},
    {"--max-density", "solver.max_density", Kind::number, "density guard for sparse B"},
    {"--dense-cap", "solver.dense_cap", Kind::integer, "largest n for dense B"},
    {"--parallel", "solver.deterministic", Kind::set_false, "parallel blocks with a sweep-start residual"},
};

const std::vector<Flag> kModel = {
    {"--operator", "model.operator", Kind::text, "lpsl, ppr, adjacency, identity or file"},
    {"--structure", "model.structure", Kind::text, "structure file from `lpsl learn`"},
    {"--ppr-alpha", "model.ppr_alpha", Kind::number, "teleport of the ppr operator"},
    {"--ppr-steps", "model.ppr_steps", Kind::integer, "power steps of the ppr operator"},
    {"--model-lambda", "model.lambda", Kind::number, "lambda for a learned operator"},
};

const std::vector<Flag> kHead = {
    {"--head", "head.kind", Kind::text, "linear or mlp2"},
    {"--hidden", "head.hidden", Kind::integer, "hidden width"},
    {"--lr", "head.learning_rate", Kind::number, "learning rate"},
    {"--weight-decay", "head.weight_decay", Kind::number, "L2 weight decay"},
    {"--dropout", "head.dropout", Kind::number, "dropout rate"},
    {"--epochs", "head.max_epochs", Kind::integer, "epoch cap"},
    {"--patience", "head.patience", Kind::integer, "early-stopping patience"},
    {"--head-seed", "head.seed", Kind::integer, "initialization/dropout seed"},
};

const std::vector<Flag> kSweep = {
    {"--seeds", "sweep.seeds", Kind::integer, "number of random splits"},
    {"--first-seed", "sweep.first_seed", Kind::integer, "seed of the first split"},
};

const Flag kOut{"--out", "output.out", Kind::text, "output file"};
const Flag kCsv{"--csv", "output.csv", Kind::text, "CSV export"};
const Flag kCheckpoint{"--checkpoint", "output.checkpoint", Kind::text, "head checkpoint file"};
const Flag kOutDir{"--out-dir", "output.dir", Kind::text, "directory for per-seed reports"};
const Flag kPred{"--pred", "output.prediction", Kind::text, "prediction JSON to evaluate"};
const Flag kThreads{"--threads", "threads", Kind::integer, "worker threads (capped by LPSL_THREADS)"};

// Values given on the command line for one subcommand.
struct FlagValues {
  std::map<std::string, std::pair<Kind, std::string>> text;  // by json path
  std::map<std::string, bool> switches;
  std::string config_file;
  std::set<std::string> given;  // flag names

  void add(CLI::App* app, const Flag& f) {
    if (f.kind == Kind::set_true || f.kind == Kind::set_false) {
      app->add_flag_callback(f.name, [this, f] {
        switches[f.path] = f.kind == Kind::set_true;
        given.insert(f.name);
      }, f.help);
      return;
    }
    app->add_option_function<std::string>(f.name, [this, f](const std::string& v) {
      text[f.path] = {f.kind, v};
      given.insert(f.name);
    }, f.help);
  }

  void add(CLI::App* app, const std::vector<Flag>& flags) {
    for (const auto& f : flags) add(app, f);
  }
};

json convert(Kind kind, const std::string& v, const std::string& path) {
  auto bad = [&] { return ValidationError("bad value '" + v + "' for " + path); };
  switch (kind) {
    case Kind::text: return v;
    case Kind::quantile:
      if (v == "none") return nullptr;
      [[fallthrough]];
    case Kind::number: {
      double d = 0.0;
      const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
      if (ec != std::errc() || p != v.data() + v.size()) throw bad();
      return d;
    }
    case Kind::integer: {
      std::uint64_t u = 0;
      const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), u);
      if (ec != std::errc() || p != v.data() + v.size()) throw bad();
      return u;
    }
    default: throw bad();
  }
}

void set_path(json& doc, const std::string& path, json value) {
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

RunConfig resolve_config(const FlagValues& flags) {
  for (const char* f : {"--per-class", "--val", "--test", "--seed", "--train-labels"}) {
    if (flags.given.count("--split") && flags.given.count(f)) {
      throw ValidationError(std::string("--split conflicts with ") + f);
    }
  }
  json doc = RunConfig::defaults();
  if (!flags.config_file.empty()) merge_config(doc, load_config_file(flags.config_file));
  json patch = json::object();
  for (const auto& [path, kv] : flags.text) set_path(patch, path, convert(kv.first, kv.second, path));
  for (const auto& [path, on] : flags.switches) set_path(patch, path, on);
  if (flags.given.count("--structure")) {
    const auto it = flags.text.find("model.operator");
    if (it != flags.text.end() && it->second.second != "file") {
      throw ValidationError("--structure conflicts with --operator " + it->second.second);
    }
    set_path(patch, "model.operator", "file");
  }
  merge_config(doc, patch);
  RunConfig config = RunConfig::from_json(doc);
  if (!config.split_file.empty() && !config.train_nodes.empty()) {
    throw ValidationError("split.file and split.train_nodes are mutually exclusive");
  }
  config.threads = effective_threads(config.threads);
  config.solver.threads = config.threads;
  return config;
}

const std::filesystem::path& require_out(const RunConfig& config) {
  if (config.out.empty()) throw ValidationError("--out is required");
  return config.out;
}

std::vector<Index> read_node_ids(const std::filesystem::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<Index> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string tok;
    if (!(fields >> tok)) continue;
    long long v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || v < 0 || static_cast<std::size_t>(v) >= n) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": bad node id '" + tok + "'");
    }
    ids.push_back(static_cast<Index>(v));
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// Graph-level inputs for the commands that do not need features.
struct GraphInputs {
  Context ctx;
  LabelMask mask;
  std::vector<Index> test;
};

GraphInputs load_graph_inputs(const RunConfig& config) {
  if (config.graph.empty()) throw ValidationError("--graph is required");
  GraphInputs in;
  const bool full = !config.features.empty() && !config.labels.empty();
  if (full) {
    in.ctx = load_context(config);
  } else {
    in.ctx.dataset.graph = load_graph(config.graph, 0, config.self_loops);
    in.ctx.ops = symmetric_normalize(in.ctx.dataset.graph, config.self_loops);
  }
  const std::size_t n = in.ctx.dataset.num_nodes();
  std::vector<Index> train;
  if (!config.split_file.empty()) {
    const SplitAssignment s = read_split(config.split_file, n);
    train = s.train;
    in.test = s.test;
  } else if (!config.train_nodes.empty()) {
    train = read_node_ids(config.train_nodes, n);
  } else if (full) {
    const SplitAssignment s = make_run_split(in.ctx, config, config.seed);
    train = s.train;
    in.test = s.test;
  } else {
    throw ValidationError("labeled nodes needed: give --split, --train-labels, or --features with --labels");
  }
  in.mask = LabelMask::from_nodes(n, train);
  if (in.test.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!in.mask.is_labeled(i)) in.test.push_back(static_cast<Index>(i));
    }
  }
  return in;
}

int cmd_split(const RunConfig& config, std::ostream& out) {
  if (config.graph.empty() || config.features.empty() || config.labels.empty()) {
    throw ValidationError("--graph, --features and --labels are required");
  }
  const Context ctx = load_context(config);
  const SplitAssignment s = make_split(ctx.dataset, config.per_class, config.n_val, config.n_test, config.seed);
  write_split(s, require_out(config), config.doc);
  out << "split: " << s.train.size() << " train, " << s.val.size() << " val, " << s.test.size() << " test\n";
  return 0;
}

int cmd_lps(const RunConfig& config, std::ostream& out) {
  const auto& path = require_out(config);
  const GraphInputs in = load_graph_inputs(config);
  const LpsVector lps = lps_scores(in.ctx.ops, in.mask, config.lps_alpha, config.lps_tol, config.lps_max_iter);
  write_lps_json(lps, path, config.doc);
  out << "lps: " << lps.scores.size() << " nodes, " << lps.iterations << " iterations, residual " << lps.residual
      << '\n';
  return 0;
}

int cmd_groups(const RunConfig& config, std::ostream& out) {
  const auto& path = require_out(config);
  const GraphInputs in = load_graph_inputs(config);
  GroupPartition part;
  if (config.group_metric == GroupMetric::lps && !config.lps_file.empty()) {
    const LpsVector lps = read_lps_json(config.lps_file);
    if (lps.scores.size() != in.ctx.dataset.num_nodes()) throw ValidationError("LPS file does not match the graph");
    part = partition_groups(lps.scores, GroupMetric::lps, in.test, config.partition);
  } else {
    part = partition_for(in.ctx, in.mask, in.test, config, nullptr);
  }
  write_partition_json(part, path, config.doc);
  out << "groups (" << to_string(part.metric) << "):";
  for (const auto& m : part.members()) out << ' ' << m.size();
  out << '\n';
  return 0;
}

int cmd_learn(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto& path = require_out(config);
  const GraphInputs in = load_graph_inputs(config);
  SolveMeta meta;
  if (config.solver_mode == "dense") {
    const DenseStructure b = solve_dense(in.ctx.ops, in.mask, config.solver);
    meta = b.meta;
    write_structure(b, path, config.doc);
  } else {
    const SparseStructure b = solve_sparse(in.ctx.ops, in.mask, config.solver);
    meta = b.meta;
    write_structure(b, path, config.doc);
  }
  out << "learned B (" << meta.mode << "): " << meta.outer_rounds << " rounds, residual " << meta.residual_inf
      << ", nnz " << meta.nnz << ", stop " << meta.stop_reason << '\n';
  if (!meta.converged()) err << "warning: stopped at max_outer before reaching outer_tol\n";
  return 0;
}

int cmd_propagate(const RunConfig& config, std::ostream& out) {
  const auto& path = require_out(config);
  if (config.labels.empty()) throw ValidationError("--labels is required");
  GraphInputs in = load_graph_inputs(config);
  auto& ds = in.ctx.dataset;
  if (ds.classes.empty()) {
    ds.classes = read_labels(config.labels, ds.num_nodes());
    ds.num_classes = *std::max_element(ds.classes.begin(), ds.classes.end()) + 1;
  }
  ModelSpec spec = config.model;
  spec.predictor = Predictor::lp;
  const PropagationOperator op = build_operator(spec, in.ctx, in.mask, config, nullptr);
  const Prediction pred = propagate_labels(op, in.mask, ds.classes, ds.num_classes);
  std::optional<std::filesystem::path> csv;
  if (!config.csv.empty()) csv = config.csv;
  write_prediction(pred, path, csv, config.doc);
  char buf[96];
  std::snprintf(buf, sizeof buf, "label propagation: accuracy on %zu unlabeled nodes %.4f\n", in.test.size(),
                accuracy(pred.labels, ds.classes, in.test));
  out << buf;
  return 0;
}

int cmd_train(const RunConfig& config, std::ostream& out) {
  const auto& path = require_out(config);
  if (config.model.predictor == Predictor::lp) throw ValidationError("--arch must be appnp or gcn (use `propagate` for lp)");
  const Context ctx = load_context(config);
  SplitAssignment split;
  if (!config.train_nodes.empty()) {
    throw ValidationError("train needs validation nodes: give --split or split parameters instead of --train-labels");
  }
  split = make_run_split(ctx, config, config.seed);
  const LabelMask mask = LabelMask::from_nodes(ctx.dataset.num_nodes(), split.train);
  const PropagationOperator op = build_operator(config.model, ctx, mask, config, nullptr);
  const auto& ds = ctx.dataset;
  const TrainResult r = config.model.predictor == Predictor::appnp
                            ? train_appnp_head(op, ds.features, ds.classes, ds.num_classes, split, config.head)
                            : train_gcn_head(op, ds.features, ds.classes, ds.num_classes, split, config.head);
  std::optional<std::filesystem::path> csv;
  if (!config.csv.empty()) csv = config.csv;
  write_prediction(r.prediction, path, csv, config.doc);
  if (!config.checkpoint.empty()) write_head(r.head, config.checkpoint);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s head: best epoch %zu of %zu, val accuracy %.4f, test accuracy %.4f\n",
                to_string(r.head.arch).c_str(), r.head.best_epoch, r.head.epochs_run, r.head.best_val_accuracy,
                accuracy(r.prediction.labels, ds.classes, split.test));
  out << buf;
  return 0;
}

int cmd_report(const RunConfig& config, std::ostream& out, std::ostream& err) {
  if (config.prediction.empty() || config.groups_file.empty() || config.labels.empty()) {
    throw ValidationError("--pred, --groups and --labels are required");
  }
  const std::vector<int> predicted = read_prediction_labels(config.prediction);
  const std::vector<int> truth = read_labels(config.labels, predicted.size());
  const GroupPartition part = read_partition_json(config.groups_file);
  const BiasReport report = bias_report(predicted, truth, part, config.doc);
  for (int g : report.accuracy.empty_groups) err << "warning: group " << g << " is empty and was left out\n";
  if (!config.out.empty()) write_bias_report(report, config.out);
  else out << to_json(report).dump(1) << '\n';
  if (!config.csv.empty()) write_group_csv(report, config.csv);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s groups: %zu, accuracy %.4f, WDP %.4f, WSD %.4f, WCV %s\n", report.metric.c_str(),
                report.accuracy.groups.size(), report.accuracy.average, report.wdp, report.wsd,
                report.wcv ? std::to_string(*report.wcv).c_str() : "null");
  (config.out.empty() ? err : out) << buf;
  return 0;
}

int cmd_sweep(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const Context ctx = load_context(config);
  if (config.sweep_models.empty()) throw ValidationError("sweep.models is empty");
  const SweepResult result = run_sweep(ctx, config, config.sweep_models, [&](const std::string& s) { err << s << '\n'; });
  out << format_aggregate(result.models);
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    for (const auto& s : result.splits) {
      std::ofstream f(config.out_dir / ("seed_" + std::to_string(s.seed) + ".json"));
      if (!f) throw ValidationError("cannot write into " + config.out_dir.string());
      json doc = to_json(s);
      doc["config"] = config.doc;
      f << doc.dump(1) << '\n';
    }
  }
  if (!config.out.empty()) {
    json doc;
    doc["config"] = config.doc;
    doc["splits"] = json::array();
    for (const auto& s : result.splits) doc["splits"].push_back(to_json(s));
    doc["aggregate"] = json::array();
    for (const auto& m : result.models) doc["aggregate"].push_back(to_json(m));
    std::ofstream f(config.out);
    if (!f) throw ValidationError("cannot write " + config.out.string());
    f << doc.dump(1) << '\n';
  }
  if (!config.csv.empty()) {
    std::ofstream f(config.csv);
    if (!f) throw ValidationError("cannot write " + config.csv.string());
    f << "model,group,mean_accuracy,std_accuracy,splits\n";
    char buf[160];
    for (const auto& m : result.models) {
      for (std::size_t g = 0; g < m.group_accuracy.size(); ++g) {
        const auto& ga = m.group_accuracy[g];
        std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g,%zu\n", m.name.c_str(), g, ga.mean, ga.std, ga.count);
        f << buf;
      }
    }
  }
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Label proximity scores, unbiased propagation structures and group bias reports"};
  app.name("lpsl");
  app.require_subcommand(1);

  std::map<std::string, FlagValues> values;
  auto sub = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    FlagValues& v = values[name];
    s->add_option("--config", v.config_file, "JSON run configuration (flags override it)");
    v.add(s, kThreads);
    return std::pair<CLI::App*, FlagValues*>{s, &v};
  };

  auto [split, split_v] = sub("split", "draw a seeded train/val/test split");
  split_v->add(split, kData);
  split_v->add(split, kSplit);
  split_v->add(split, kOut);

  auto [lps, lps_v] = sub("lps", "label proximity scores");
  lps_v->add(lps, kData);
  lps_v->add(lps, kSplit);
  lps_v->add(lps, kLps);
  lps_v->add(lps, kOut);

  auto [groups, groups_v] = sub("groups", "partition test nodes into groups");
  groups_v->add(groups, kData);
  groups_v->add(groups, kSplit);
  groups_v->add(groups, kLps);
  groups_v->add(groups, kGroups);
  groups_v->add(groups, kOut);

  auto [learn, learn_v] = sub("learn", "learn the propagation structure B");
  learn_v->add(learn, kData);
  learn_v->add(learn, kSplit);
  learn_v->add(learn, kSolver);
  learn_v->add(learn, kOut);

  auto [prop, prop_v] = sub("propagate", "label propagation with B or a graph operator");
  prop_v->add(prop, kData);
  prop_v->add(prop, kSplit);
  prop_v->add(prop, kSolver);
  prop_v->add(prop, kModel);
  prop_v->add(prop, kOut);
  prop_v->add(prop, kCsv);

  auto [train, train_v] = sub("train", "train an appnp- or gcn-style head over an operator");
  train_v->add(train, kData);
  train_v->add(train, kSplit);
  train_v->add(train, kSolver);
  train_v->add(train, kModel);
  train_v->add(train, kHead);
  train_v->add(train, Flag{"--arch", "model.predictor", Kind::text, "appnp or gcn"});
  train_v->add(train, kOut);
  train_v->add(train, kCsv);
  train_v->add(train, kCheckpoint);

  auto [report, report_v] = sub("report", "group accuracies and WDP/WSD/WCV");
  report_v->add(report, Flag{"--labels", "data.labels", Kind::text, "'node class' lines"});
  report_v->add(report, kPred);
  report_v->add(report, Flag{"--groups", "groups.file", Kind::text, "partition JSON from `lpsl groups`"});
  report_v->add(report, kOut);
  report_v->add(report, kCsv);

  auto [sweep, sweep_v] = sub("sweep", "repeat the model comparison over seeded splits");
  sweep_v->add(sweep, kData);
  sweep_v->add(sweep, std::vector<Flag>(kSplit.begin() + 2, kSplit.end() - 1));
  sweep_v->add(sweep, kLps);
  sweep_v->add(sweep, kGroups);
  sweep_v->add(sweep, kSolver);
  sweep_v->add(sweep, kHead);
  sweep_v->add(sweep, kSweep);
  sweep_v->add(sweep, kOut);
  sweep_v->add(sweep, kOutDir);
  sweep_v->add(sweep, kCsv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    CLI::App* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    const RunConfig config = resolve_config(values[name]);
    if (name == "split") return cmd_split(config, out);
    if (name == "lps") return cmd_lps(config, out);
    if (name == "groups") return cmd_groups(config, out);
    if (name == "learn") return cmd_learn(config, out, err);
    if (name == "propagate") return cmd_propagate(config, out);
    if (name == "train") return cmd_train(config, out);
    if (name == "report") return cmd_report(config, out, err);
    if (name == "sweep") return cmd_sweep(config, out, err);
    err << "unknown subcommand " << name << '\n';
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::bad_alloc&) {
    err << "numerical failure: out of memory\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lpsl
