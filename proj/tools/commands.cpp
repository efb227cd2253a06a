#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "kcgn/bundle.hpp"
#include "kcgn/checkpoint.hpp"
#include "kcgn/config.hpp"
#include "kcgn/error.hpp"
#include "kcgn/evaluation.hpp"
#include "kcgn/synthetic.hpp"
#include "kcgn/training.hpp"

namespace kcgn::cli {
namespace fs = std::filesystem;
namespace {

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write '" + path.string() + "'");
  out << text;
}

// ---- prepare ---------------------------------------------------------------

struct PrepareArgs {
  std::string interactions, social, items, out, type_order = "first", types;
};

int do_prepare(const PrepareArgs& a) {
  PrepareOptions o;
  o.interactions = a.interactions;
  if (!a.social.empty()) o.social = a.social;
  if (!a.items.empty()) o.items = a.items;
  o.out_dir = a.out;
  if (!a.types.empty()) {
    o.type_order = TypeOrder::Explicit;
    o.type_labels = parse_ablation_list(a.types);  // plain comma list
  } else if (a.type_order == "numeric") {
    o.type_order = TypeOrder::Numeric;
  } else if (a.type_order == "rating") {
    o.type_order = TypeOrder::Rating;
  }
  const PrepareSummary s = prepare(o);
  fmt::print("records = {}\nusers = {}\nitems = {}\ntypes = {}\n", s.records, s.users, s.items,
             s.types);
  fmt::print("social_edges = {}\ndropped_social = {}\n", s.social_edges, s.dropped_social);
  fmt::print("item_rows = {}\ndropped_item_rows = {}\ncategories = {}\n", s.item_rows,
             s.dropped_item_rows, s.categories);
  fmt::print("train_events = {}\nvalidation_users = {}\ntest_users = {}\ntrain_only_users = {}\n",
             s.train_events, s.validation_users, s.test_users, s.train_only_users);
  return 0;
}

// ---- train / init ----------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::vector<std::string> ablate;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> layers, dim, epochs;
};

RunConfig resolve_run_config(const TrainArgs& a) {
  RunConfig run = load_run_config(a.config);
  for (const auto& kv : a.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "bundle") run.bundle = value;
    else if (key == "output") run.output = value;
    else set_config_value(run.train, key, value);
  }
  for (const auto& name : a.ablate) apply_ablation(run.train.ablation, name);
  if (a.seed) run.train.seed = *a.seed;
  if (a.layers) run.train.layers = *a.layers;
  if (a.dim) run.train.dim = *a.dim;
  if (a.epochs) run.train.epochs = *a.epochs;
  run.train.validate();
  return run;
}

std::string run_config_text(const RunConfig& run) {
  return "bundle = " + run.bundle + "\noutput = " + run.output + "\n" + format_config(run.train);
}

int do_train(const TrainArgs& a) {
  const RunConfig run = resolve_run_config(a);
  const DatasetBundle bundle = load_bundle(run.bundle);
  const TrainingSet data = make_training_set(bundle);
  const fs::path out = run.output;
  fs::create_directories(out);
  write_file(out / "config.txt", run_config_text(run));

  spdlog::info("training on {} users, {} items, {} types ({} train events), ablation {}",
               data.split.users, data.split.items, data.split.types, data.split.train.size(),
               format_ablation(run.train.ablation));
  const FitResult r = fit(data, run.train, [](const EpochRecord& e) {
    spdlog::info("epoch {:3d}  loss {:.5f}  bpr {:.5f}  reg {:.5f}  mi {:.5f}  val_hr {:.4f}{}",
                 e.epoch, e.loss, e.bpr, e.regularizer, e.mi, e.validation_hr,
                 e.improved ? "  *" : "");
  });
  save_checkpoint(out / "checkpoint", {r.best, run.train, r.best_epoch, r.best_metric, run.bundle});
  write_file(out / "history.tsv", format_history(r.history));
  fmt::print("status = {}\nepochs = {}\nbest_epoch = {}\nbest_metric = {:.17g}\ncheckpoint = {}\n",
             to_string(r.status), r.history.size(), r.best_epoch, r.best_metric,
             (out / "checkpoint").string());
  if (r.status == FitStatus::Diverged) {
    spdlog::error("training diverged: {}", r.message);
    return 2;
  }
  return 0;
}

int do_init(const TrainArgs& a) {
  const RunConfig run = resolve_run_config(a);
  const DatasetBundle bundle = load_bundle(run.bundle);
  const TrainingSet data = make_training_set(bundle);
  const ModelShape shape = model_shape(data, run.train);
  const fs::path out = run.output;
  save_checkpoint(out / "checkpoint", {init_params(shape, run.train.seed), run.train, 0, 0.0,
                                       run.bundle});
  write_file(out / "config.txt", run_config_text(run));
  fmt::print("checkpoint = {}\n", (out / "checkpoint").string());
  return 0;
}

// ---- evaluate / export -----------------------------------------------------

struct Loaded {
  Checkpoint checkpoint;
  DatasetBundle bundle;
  TrainingSet data;
  std::optional<KcgnModel> model;
};

Loaded load_for_inference(const std::string& checkpoint_dir, const std::string& bundle_dir) {
  Loaded l;
  l.checkpoint = load_checkpoint(checkpoint_dir);
  const std::string bundle = bundle_dir.empty() ? l.checkpoint.bundle : bundle_dir;
  if (bundle.empty()) throw ConfigError("checkpoint names no bundle; pass --bundle");
  l.bundle = load_bundle(bundle);
  l.data = make_training_set(l.bundle);
  l.model.emplace(build_model(l.data, l.checkpoint.config));
  require_compatible(l.checkpoint.params, l.model->shape());
  return l;
}

struct EvaluateArgs {
  std::string checkpoint, bundle, target_type, split = "test", out;
  std::size_t top_n = 10, negatives = 99, threads = 1;
  std::optional<std::uint64_t> seed;
};

int do_evaluate(const EvaluateArgs& a) {
  const Loaded l = load_for_inference(a.checkpoint, a.bundle);
  EvalOptions eo;
  eo.top_n = a.top_n;
  eo.negatives = a.negatives;
  eo.threads = a.threads;
  eo.seed = a.seed.value_or(l.checkpoint.config.seed);
  eo.split = a.split == "validation" ? HeldOutSplit::Validation : HeldOutSplit::Test;
  if (!a.target_type.empty()) {
    auto t = l.bundle.types.find(a.target_type);
    if (!t) {
      std::string known;
      for (const auto& id : l.bundle.types.ids()) known += (known.empty() ? "" : ", ") + id;
      throw ConfigError("unknown target type '" + a.target_type + "' (known: " + known + ")");
    }
    eo.target_type = *t;
  }
  const EvalReport report = evaluate(l.model->embed(l.checkpoint.params), l.data.split, eo);
  const auto& names = l.bundle.types.ids();
  const std::string text = format_report_text(report, names);
  std::cout << text;
  if (!a.out.empty()) {
    write_file(fs::path(a.out) / "report.txt", text);
    write_file(fs::path(a.out) / "report.tsv", format_report_table(report, names));
  }
  return 0;
}

struct ExportArgs {
  std::string checkpoint, bundle, out;
};

int do_export(const ExportArgs& a) {
  const Loaded l = load_for_inference(a.checkpoint, a.bundle);
  const Embeddings emb = l.model->embed(l.checkpoint.params);
  std::string text;
  auto rows = [&](const char* kind, const Tensor& t, const Vocabulary& vocab) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
      text += kind;
      text += '\t';
      text += vocab.id(r);
      for (double v : t.row(r)) text += fmt::format("\t{:.17g}", v);
      text += '\n';
    }
  };
  rows("user", emb.users, l.bundle.users);
  rows("item", emb.items, l.bundle.items);
  if (a.out.empty() || a.out == "-") std::cout << text;
  else write_file(a.out, text);
  return 0;
}

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
  std::string kind = "planted", out;
  std::size_t users = 20, items = 30, types = 2, communities = 2, per_user = 8;
  std::uint64_t seed = 1;
};

int do_generate(const GenerateArgs& a) {
  SyntheticDataset ds;
  if (a.kind == "planted") {
    PlantedOptions o;
    o.users = a.users;
    o.items = a.items;
    o.types = a.types;
    o.communities = a.communities;
    o.interactions_per_user = a.per_user;
    o.seed = a.seed;
    ds = planted_dataset(o);
  } else {
    RandomOptions o;
    o.users = a.users;
    o.items = a.items;
    o.types = a.types;
    o.interactions_per_user = a.per_user;
    o.seed = a.seed;
    ds = random_dataset(o);
  }
  write_raw_inputs(ds, a.out);
  fmt::print("wrote {} interactions, {} social edges, {} item rows to {}\n", ds.records.size(),
             ds.social.size(), ds.item_categories.size(), a.out);
  return 0;
}

void setup_logging(const std::string& level) {
  auto logger = spdlog::stderr_color_mt("kcgn");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"KCGN: knowledge-aware coupled graph network recommender"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  PrepareArgs pa;
  auto* prep = app.add_subcommand("prepare", "convert raw TSV inputs into a dataset bundle");
  prep->add_option("--interactions", pa.interactions, "user<TAB>item<TAB>type<TAB>timestamp")
      ->required()->check(CLI::ExistingFile);
  prep->add_option("--social", pa.social, "user<TAB>user")->check(CLI::ExistingFile);
  prep->add_option("--items", pa.items, "item<TAB>category; omit to link items by co-interaction")
      ->check(CLI::ExistingFile);
  prep->add_option("--out", pa.out, "bundle directory")->required();
  prep->add_option("--type-order", pa.type_order,
                   "first: order of appearance; numeric: sort labels by value; rating: map 1..5 "
                   "to negative..positive")
      ->check(CLI::IsMember({"first", "numeric", "rating"}));
  prep->add_option("--types", pa.types, "explicit comma-separated type order")
      ->excludes("--type-order");

  TrainArgs ta;
  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("config", ta.config, "run config (key = value)")->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--ablate", ta.ablate,
                    "no_multi_type|no_social|no_item_graph|no_temporal|no_mi (repeatable)");
    cmd->add_option("--set", ta.set, "override any config key: key=value (repeatable)");
    cmd->add_option("--seed", ta.seed, "random seed");
    cmd->add_option("--layers", ta.layers, "interaction layers L (default 2)");
    cmd->add_option("--dim", ta.dim, "embedding width d");
    cmd->add_option("--epochs", ta.epochs, "maximum epochs");
  };
  auto* train = app.add_subcommand("train", "fit a model; writes checkpoint/ and history.tsv");
  add_train_flags(train);
  auto* init = app.add_subcommand("init", "write an untrained checkpoint for a run config");
  add_train_flags(init);

  EvaluateArgs ea;
  auto* eval = app.add_subcommand("evaluate", "leave-one-out HR@N / NDCG@N report");
  eval->add_option("--checkpoint", ea.checkpoint, "checkpoint directory")->required();
  eval->add_option("--bundle", ea.bundle, "bundle directory (default: the training bundle)");
  eval->add_option("--target-type", ea.target_type, "only score held-out events of this type");
  eval->add_option("--topn", ea.top_n, "N of HR@N and NDCG@N")->check(CLI::PositiveNumber);
  eval->add_option("--split", ea.split, "held-out split")
      ->check(CLI::IsMember({"test", "validation"}));
  eval->add_option("--negatives", ea.negatives, "sampled negatives per user")
      ->check(CLI::PositiveNumber);
  eval->add_option("--seed", ea.seed, "negative sampling seed (default: the training seed)");
  eval->add_option("--threads", ea.threads, "worker threads")->check(CLI::PositiveNumber);
  eval->add_option("--out", ea.out, "directory for report.txt and report.tsv");

  ExportArgs xa;
  auto* exp = app.add_subcommand("export", "write final user and item embeddings as TSV");
  exp->add_option("--checkpoint", xa.checkpoint, "checkpoint directory")->required();
  exp->add_option("--bundle", xa.bundle, "bundle directory (default: the training bundle)");
  exp->add_option("--out", xa.out, "output file, - for stdout");

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "write a synthetic raw dataset");
  gen->add_option("--kind", ga.kind, "planted|random")->check(CLI::IsMember({"planted", "random"}));
  gen->add_option("--out", ga.out, "output directory")->required();
  gen->add_option("--users", ga.users, "users");
  gen->add_option("--items", ga.items, "items");
  gen->add_option("--types", ga.types, "interaction types");
  gen->add_option("--communities", ga.communities, "communities (planted)");
  gen->add_option("--per-user", ga.per_user, "interactions per user");
  gen->add_option("--seed", ga.seed, "random seed");

  app.add_subcommand("defaults", "print a run config template with every default");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    setup_logging(log_level);
  } catch (const spdlog::spdlog_ex&) {
    spdlog::set_level(spdlog::level::from_str(log_level));
  }
  try {
    if (*prep) return do_prepare(pa);
    if (*train) return do_train(ta);
    if (*init) return do_init(ta);
    if (*eval) return do_evaluate(ea);
    if (*exp) return do_export(xa);
    if (*gen) return do_generate(ga);
    std::cout << default_config_text();
    return 0;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}

}  // namespace kcgn::cli
