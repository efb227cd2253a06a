#include "kcgn/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "kcgn/error.hpp"

namespace kcgn {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string bad_value(const std::string& key, const std::string& value, const char* expected) {
  return fmt::format("config key '{}': cannot parse '{}' as {}", key, value, expected);
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(bad_value(key, value, "a number"));
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& value) {
  Int out = 0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(bad_value(key, value, "an integer"));
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(bad_value(key, value, "a boolean (true|false)"));
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) { return fmt::format("{}", v); }

constexpr const char* kAblationNames[] = {"no_multi_type", "no_social", "no_item_graph",
                                          "no_temporal", "no_mi"};

}  // namespace

const std::vector<ConfigKey>& train_config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    const TrainConfig d;
    const auto entries = config_entries(d);
    const std::vector<std::string> help = {
        "Adam learning rate",
        "BPR triples per step",
        "maximum training epochs",
        "epochs without validation improvement before stopping",
        "L2 weight on all parameters",
        "contrastive weight on the social graph",
        "contrastive weight on the item graph",
        "interaction message-passing layers",
        "relation-graph propagation layers",
        "embedding width per layer (even)",
        "LeakyReLU negative slope",
        "seconds per time slot",
        "random seed",
        "comma-separated ablations: no_multi_type,no_social,no_item_graph,no_temporal,no_mi",
        "scoring embeddings: residual|propagated|interaction",
        "contrastive corruption: misplaced|global|within_component",
        "sinusoid exponent convention: literal|standard",
        "draw BPR negatives per interaction type",
        "N of validation HR@N used for early stopping",
        "sampled negatives per evaluated user",
        "loss above which training aborts",
        "evaluation worker threads",
    };
    std::vector<ConfigKey> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      out.push_back({entries[i].first, entries[i].second, help.at(i)});
    }
    return out;
  }();
  return keys;
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& c) {
  return {
      {"learning_rate", fmt_double(c.learning_rate)},
      {"batch_size", std::to_string(c.batch_size)},
      {"epochs", std::to_string(c.epochs)},
      {"patience", std::to_string(c.patience)},
      {"l2", fmt_double(c.l2)},
      {"mi_user", fmt_double(c.mi_user)},
      {"mi_item", fmt_double(c.mi_item)},
      {"layers", std::to_string(c.layers)},
      {"relation_layers", std::to_string(c.relation_layers)},
      {"dim", std::to_string(c.dim)},
      {"slope", fmt_double(c.slope)},
      {"granularity", std::to_string(c.granularity)},
      {"seed", std::to_string(c.seed)},
      {"ablation", format_ablation(c.ablation)},
      {"score_source", to_string(c.score_source)},
      {"corruption", to_string(c.corruption)},
      {"time_convention", to_string(c.time_convention)},
      {"bpr_per_type", c.bpr_per_type ? "true" : "false"},
      {"validation_top_n", std::to_string(c.validation_top_n)},
      {"eval_negatives", std::to_string(c.eval_negatives)},
      {"divergence_threshold", fmt_double(c.divergence_threshold)},
      {"eval_threads", std::to_string(c.eval_threads)},
  };
}

void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "learning_rate") c.learning_rate = parse_double(key, value);
  else if (key == "batch_size") c.batch_size = parse_int<std::size_t>(key, value);
  else if (key == "epochs") c.epochs = parse_int<std::size_t>(key, value);
  else if (key == "patience") c.patience = parse_int<std::size_t>(key, value);
  else if (key == "l2") c.l2 = parse_double(key, value);
  else if (key == "mi_user") c.mi_user = parse_double(key, value);
  else if (key == "mi_item") c.mi_item = parse_double(key, value);
  else if (key == "layers") c.layers = parse_int<std::size_t>(key, value);
  else if (key == "relation_layers") c.relation_layers = parse_int<std::size_t>(key, value);
  else if (key == "dim") c.dim = parse_int<std::size_t>(key, value);
  else if (key == "slope") c.slope = parse_double(key, value);
  else if (key == "granularity") c.granularity = parse_int<std::int64_t>(key, value);
  else if (key == "seed") c.seed = parse_int<std::uint64_t>(key, value);
  else if (key == "ablation") {
    c.ablation = Ablation{};
    for (const auto& name : parse_ablation_list(value)) apply_ablation(c.ablation, name);
  } else if (key == "score_source") c.score_source = parse_score_source(value);
  else if (key == "corruption") c.corruption = parse_corruption_scope(value);
  else if (key == "time_convention") c.time_convention = parse_sinusoid_convention(value);
  else if (key == "bpr_per_type") c.bpr_per_type = parse_bool(key, value);
  else if (key == "validation_top_n") c.validation_top_n = parse_int<std::size_t>(key, value);
  else if (key == "eval_negatives") c.eval_negatives = parse_int<std::size_t>(key, value);
  else if (key == "divergence_threshold") c.divergence_threshold = parse_double(key, value);
  else if (key == "eval_threads") c.eval_threads = parse_int<std::size_t>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::vector<KeyValue> parse_key_values(const std::string& text, const std::string& source) {
  std::vector<KeyValue> out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected 'key = value'", source, line_no));
    }
    KeyValue kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (kv.key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", source, line_no));
    if (!seen.insert(kv.key).second) {
      throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", source, line_no, kv.key));
    }
    out.push_back(std::move(kv));
  }
  return out;
}

std::vector<std::string> parse_ablation_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty() && item != "none") out.push_back(item);
  }
  return out;
}

void apply_ablation(Ablation& a, const std::string& name) {
  if (name == "no_multi_type") a.no_multi_type = true;
  else if (name == "no_social") a.no_social = true;
  else if (name == "no_item_graph") a.no_item_graph = true;
  else if (name == "no_temporal") a.no_temporal = true;
  else if (name == "no_mi") a.no_mi = true;
  else throw ConfigError("unknown ablation '" + name +
                         "' (no_multi_type|no_social|no_item_graph|no_temporal|no_mi)");
}

std::string format_ablation(const Ablation& a) {
  const bool flags[] = {a.no_multi_type, a.no_social, a.no_item_graph, a.no_temporal, a.no_mi};
  std::string out;
  for (std::size_t i = 0; i < std::size(flags); ++i) {
    if (!flags[i]) continue;
    if (!out.empty()) out += ',';
    out += kAblationNames[i];
  }
  return out.empty() ? "none" : out;
}

const std::vector<std::string>& required_run_keys() {
  static const std::vector<std::string> keys = {"bundle", "output"};
  return keys;
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  RunConfig run;
  std::set<std::string> present;
  for (const auto& kv : parse_key_values(text, source)) {
    present.insert(kv.key);
    try {
      if (kv.key == "bundle") run.bundle = kv.value;
      else if (kv.key == "output") run.output = kv.value;
      else set_config_value(run.train, kv.key, kv.value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", source, kv.line, e.what()));
    }
  }
  std::vector<std::string> missing;
  for (const auto& k : required_run_keys())
    if (!present.count(k)) missing.push_back(k);
  if (!missing.empty()) {
    std::string msg = fmt::format("{}: missing required key(s):", source);
    for (const auto& k : missing) msg += " " + k;
    msg += "\n  bundle = <directory written by `kcgn prepare`> (no default)";
    msg += "\n  output = <run directory for checkpoint and history> (no default)";
    msg += "\nother keys and their defaults:";
    for (const auto& k : train_config_keys()) {
      msg += fmt::format("\n  {} = {}{}", k.name, k.default_value,
                         present.count(k.name) ? "  (set)" : "");
    }
    throw ConfigError(msg);
  }
  run.train.validate();
  return run;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path);
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_entries(config)) out += k + " = " + v + "\n";
  return out;
}

std::string default_config_text() {
  std::string out = "# kcgn run config\nbundle = data/synthetic/bundle\noutput = runs/example\n\n";
  for (const auto& k : train_config_keys()) {
    out += "# " + k.description + "\n" + k.name + " = " + k.default_value + "\n";
  }
  return out;
}

}  // namespace kcgn
