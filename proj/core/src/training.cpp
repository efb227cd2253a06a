#include "kcgn/training.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "kcgn/error.hpp"

namespace kcgn {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("train config: " + what); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (epochs == 0) fail("epochs must be positive");
  if (patience == 0) fail("patience must be positive");
  if (l2 < 0.0 || mi_user < 0.0 || mi_item < 0.0) fail("loss weights must be non-negative");
  if (dim == 0 || dim % 2 != 0) fail("dim must be even and positive");
  if (relation_layers == 0) fail("relation_layers must be >= 1");
  if (!(slope >= 0.0 && slope <= 1.0)) fail("slope must lie in [0, 1]");
  if (granularity <= 0) fail("granularity must be positive");
  if (validation_top_n == 0) fail("validation_top_n must be positive");
  if (eval_negatives == 0) fail("eval_negatives must be positive");
  if (!(divergence_threshold > 0.0)) fail("divergence_threshold must be positive");
}

PositiveIndex::PositiveIndex(std::span<const InteractionRecord> train, std::size_t users,
                             std::size_t items, std::size_t types, bool per_type)
    : items_(items), types_(per_type ? types : 1), per_type_(per_type) {
  observed_.assign(users * types_, {});
  for (const auto& r : train) {
    if (r.user >= users || r.item >= items || r.type >= types) {
      throw IngestionError("PositiveIndex: training record out of range");
    }
    observed_[per_type_ ? r.user * types_ + r.type : r.user].push_back(r.item);
  }
  for (std::size_t slot = 0; slot < observed_.size(); ++slot) {
    auto& list = observed_[slot];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    if (list.empty()) continue;
    if (list.size() >= items) {
      ++skipped_users_;
      spdlog::warn("BPR sampling: user {} observed every item; skipped", slot / types_);
      continue;
    }
    const auto user = static_cast<std::uint32_t>(slot / types_);
    const auto type = static_cast<std::uint32_t>(slot % types_);
    for (std::uint32_t item : list) pairs_.push_back({user, item, type});
  }
}

bool PositiveIndex::observed(std::uint32_t user, std::uint32_t item, std::uint32_t type) const {
  const auto& list = observed_[per_type_ ? user * types_ + type : user];
  return std::binary_search(list.begin(), list.end(), item);
}

std::vector<BprTriple> sample_bpr_triples(const PositiveIndex& index, std::size_t batch_size,
                                          Rng& rng) {
  std::vector<BprTriple> out;
  if (index.pairs_.empty()) return out;
  out.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const auto& p = index.pairs_[rng.below(index.pairs_.size())];
    std::uint32_t neg;
    do {
      neg = static_cast<std::uint32_t>(rng.below(index.items_));
    } while (index.observed(p.user, neg, p.type));
    out.push_back({p.user, p.item, neg});
  }
  return out;
}

double bpr_term(double positive_score, double negative_score) {
  const double x = positive_score - negative_score;
  // -log sigmoid(x) = softplus(-x)
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

std::vector<std::size_t> corruption_sources(const Components& components, Rng& rng,
                                            CorruptionScope scope) {
  const std::size_t n = components.labels.size();
  std::vector<std::size_t> src(n);
  for (std::size_t i = 0; i < n; ++i) src[i] = i;
  auto permute_group = [&](const std::vector<std::size_t>& nodes) {
    std::vector<std::size_t> shuffled = nodes;
    rng.shuffle(std::span<std::size_t>(shuffled));
    for (std::size_t i = 0; i < nodes.size(); ++i) src[nodes[i]] = shuffled[i];
  };
  auto eligible = [&](std::size_t i) { return components.sizes[components.labels[i]] >= 2; };

  if (scope == CorruptionScope::Misplaced && components.count() > 1) {
    // Nodes grouped by component; the nodes outside component c are
    // order[0, begin[c]) followed by order[begin[c] + size[c], n).
    std::vector<std::size_t> begin(components.count() + 1, 0);
    for (std::size_t c = 0; c < components.count(); ++c)
      begin[c + 1] = begin[c] + components.sizes[c];
    std::vector<std::size_t> order(n), fill(begin.begin(), begin.end() - 1);
    for (std::size_t i = 0; i < n; ++i) order[fill[components.labels[i]]++] = i;
    for (std::size_t i = 0; i < n; ++i) {
      if (!eligible(i)) continue;
      const std::size_t c = components.labels[i];
      const std::size_t k = rng.below(n - components.sizes[c]);
      src[i] = k < begin[c] ? order[k] : order[k + components.sizes[c]];
    }
    return src;
  }
  if (scope == CorruptionScope::WithinComponent) {
    std::vector<std::vector<std::size_t>> groups(components.count());
    for (std::size_t i = 0; i < n; ++i) groups[components.labels[i]].push_back(i);
    for (const auto& g : groups)
      if (g.size() >= 2) permute_group(g);
    return src;
  }
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < n; ++i)
    if (eligible(i)) nodes.push_back(i);
  permute_group(nodes);
  return src;
}

Tensor shuffle_corrupt(const Tensor& z, const Components& components, Rng& rng,
                       CorruptionScope scope) {
  if (components.labels.size() != z.rows()) {
    throw DimensionError("shuffle_corrupt: " + std::to_string(components.labels.size()) +
                         " labels for " + z.shape_string());
  }
  const auto perm = corruption_sources(components, rng, scope);
  Tensor out(z.rows(), z.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    auto src = z.row(perm[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

namespace {
constexpr double kProbabilityClamp = 1e-12;
}  // namespace

Var contrastive_term(Var positive_logits, Var negative_logits) {
  const double n = static_cast<double>(positive_logits.rows() + negative_logits.rows());
  if (n == 0.0) return positive_logits.tape().constant(Tensor::scalar(0.0));
  Var pos = sum(log_sigmoid(positive_logits, kProbabilityClamp));
  Var neg = sum(log_sigmoid(scale(negative_logits, -1.0), kProbabilityClamp));
  return scale(pos + neg, -1.0 / n);
}

MiPairs make_mi_pairs(const Components& components, std::span<const std::size_t> sources) {
  if (sources.size() != components.labels.size()) {
    throw DimensionError("make_mi_pairs: sources do not cover every node");
  }
  MiPairs pairs;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const std::size_t label = components.labels[i];
    if (components.sizes[label] < 2) continue;
    pairs.anchors.push_back(i);
    pairs.corrupted.push_back(sources[i]);
    pairs.summaries.push_back(label);
  }
  return pairs;
}

Var mi_graph_loss(Var z, Var summaries, const MiPairs& pairs, double weight) {
  if (pairs.empty() || weight == 0.0) return z.tape().constant(Tensor::scalar(0.0));
  Var f = gather_rows(summaries, pairs.summaries);
  Var pos = rowwise_dot(gather_rows(z, pairs.anchors), f);
  Var neg = rowwise_dot(gather_rows(z, pairs.corrupted), f);
  return scale(contrastive_term(pos, neg), weight);
}

Var mi_loss(Tape& tape, const ForwardOutput& forward, const MiPairs* user_pairs,
            const MiPairs* item_pairs, double user_weight, double item_weight) {
  Var total = tape.constant(Tensor::scalar(0.0));
  if (user_pairs != nullptr && forward.user_propagated.valid()) {
    total = total + mi_graph_loss(forward.user_propagated, forward.user_summary, *user_pairs,
                                  user_weight);
  }
  if (item_pairs != nullptr && forward.item_propagated.valid()) {
    total = total + mi_graph_loss(forward.item_propagated, forward.item_summary, *item_pairs,
                                  item_weight);
  }
  return total;
}

LossBreakdown total_loss(Tape& tape, std::span<const BprTriple> triples,
                         const ForwardOutput& forward, const ParamVars& params, double l2,
                         const MiPairs* user_pairs, const MiPairs* item_pairs, double user_weight,
                         double item_weight) {
  LossBreakdown out;
  if (triples.empty()) {
    out.bpr = tape.constant(Tensor::scalar(0.0));
  } else {
    std::vector<std::size_t> users, pos, neg;
    for (const auto& t : triples) {
      users.push_back(t.user);
      pos.push_back(t.positive);
      neg.push_back(t.negative);
    }
    Var u = gather_rows(forward.user_final, users);
    Var diff = rowwise_dot(u, gather_rows(forward.item_final, pos)) -
               rowwise_dot(u, gather_rows(forward.item_final, neg));
    out.bpr = scale(sum(log_sigmoid(diff)), -1.0 / static_cast<double>(triples.size()));
  }

  Var reg = tape.constant(Tensor::scalar(0.0));
  if (l2 != 0.0) {
    std::vector<Var> all{params.user_embedding, params.item_embedding, params.gate};
    all.insert(all.end(), params.neighbor_weight.begin(), params.neighbor_weight.end());
    all.insert(all.end(), params.self_weight.begin(), params.self_weight.end());
    for (Var p : all) reg = reg + squared_norm(p);
    reg = scale(reg, l2);
  }
  out.regularizer = reg;
  out.mi = mi_loss(tape, forward, user_pairs, item_pairs, user_weight, item_weight);
  out.total = out.bpr + out.regularizer + out.mi;
  return out;
}

bool EarlyStopping::update(std::size_t epoch, double metric) {
  if (!any_ || metric > best_) {
    any_ = true;
    best_ = metric;
    best_epoch_ = epoch;
    bad_epochs_ = 0;
    return true;
  }
  ++bad_epochs_;
  return false;
}

std::vector<InteractionRecord> merge_types(std::span<const InteractionRecord> records) {
  std::vector<InteractionRecord> out(records.begin(), records.end());
  for (auto& r : out) r.type = 0;
  return out;
}

ModelShape model_shape(const TrainingSet& data, const TrainConfig& config) {
  ModelShape shape;
  shape.users = data.split.users;
  shape.items = data.split.items;
  shape.types = config.ablation.no_multi_type ? 1 : data.split.types;
  shape.dim = config.dim;
  shape.layers = config.layers;
  shape.relation_layers = config.relation_layers;
  shape.slope = config.slope;
  return shape;
}

KcgnModel build_model(const TrainingSet& data, const TrainConfig& config) {
  const ModelShape shape = model_shape(data, config);
  std::vector<InteractionRecord> records =
      config.ablation.no_multi_type ? merge_types(data.split.train) : data.split.train;
  std::vector<std::int64_t> stamps;
  stamps.reserve(records.size());
  for (const auto& r : records) stamps.push_back(r.timestamp);
  const TimeCodec codec =
      TimeCodec::fit(stamps, config.granularity, config.dim, config.time_convention);
  const MultiTypedGraph graph =
      build_multityped_graph(records, shape.users, shape.items, shape.types, codec);
  ModelOptions options;
  options.use_temporal = !config.ablation.no_temporal;
  options.use_social = !config.ablation.no_social;
  options.use_item_graph = !config.ablation.no_item_graph;
  options.score_source = config.score_source;
  return KcgnModel(shape, options, graph, codec, data.social, data.item_graph);
}

FitResult fit(const TrainingSet& data, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const KcgnModel model = build_model(data, config);
  const ModelShape& shape = model.shape();

  std::vector<InteractionRecord> train =
      config.ablation.no_multi_type ? merge_types(data.split.train) : data.split.train;
  const PositiveIndex positives(train, shape.users, shape.items, shape.types,
                                config.bpr_per_type);
  if (positives.pair_count() == 0) throw IngestionError("fit: no trainable positive pairs");

  std::optional<Evaluator> validator;
  if (data.split.validation_user_count() > 0) {
    EvalOptions eo;
    eo.top_n = config.validation_top_n;
    eo.negatives = config.eval_negatives;
    eo.seed = config.seed;
    eo.split = HeldOutSplit::Validation;
    eo.threads = config.eval_threads;
    validator.emplace(data.split, eo);
  } else {
    spdlog::warn("fit: no validation users; early stopping tracks the negated training loss");
  }

  const double user_weight = config.ablation.no_mi ? 0.0 : config.mi_user;
  const double item_weight = config.ablation.no_mi ? 0.0 : config.mi_item;

  FitResult result;
  ModelParams params = init_params(shape, config.seed);
  result.best = params;
  result.last = params;
  std::vector<Tensor*> tensors = params.tensors();
  std::vector<const Tensor*> const_tensors(tensors.begin(), tensors.end());
  AdamState adam = AdamState::for_params(const_tensors);
  AdamOptions adam_options;
  adam_options.learning_rate = config.learning_rate;

  const Rng root(config.seed);
  Rng sampler = root.split(10);
  const Rng corruption = root.split(11);
  const std::size_t steps =
      std::max<std::size_t>(1, (positives.pair_count() + config.batch_size - 1) / config.batch_size);
  EarlyStopping stopper(config.patience);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng epoch_rng = corruption.split(epoch);
    MiPairs user_pairs, item_pairs;
    if (user_weight > 0.0 && model.options().use_social) {
      const auto& comps = model.social().components();
      user_pairs = make_mi_pairs(comps, corruption_sources(comps, epoch_rng, config.corruption));
    }
    if (item_weight > 0.0 && model.options().use_item_graph) {
      const auto& comps = model.item_graph().components();
      item_pairs = make_mi_pairs(comps, corruption_sources(comps, epoch_rng, config.corruption));
    }

    EpochRecord record;
    record.epoch = epoch;
    bool diverged = false;
    for (std::size_t step = 0; step < steps; ++step) {
      const auto triples = sample_bpr_triples(positives, config.batch_size, sampler);
      params.zero_grad();
      Tape tape;
      const ParamVars vars = bind_params(tape, params);
      const ForwardOutput fwd = model.forward(vars);
      const LossBreakdown loss = total_loss(tape, triples, fwd, vars, config.l2, &user_pairs,
                                            &item_pairs, user_weight, item_weight);
      const double value = loss.total.value().item();
      if (!std::isfinite(value) || value > config.divergence_threshold) {
        result.status = FitStatus::Diverged;
        result.message = "loss " + std::to_string(value) + " at epoch " + std::to_string(epoch) +
                         " step " + std::to_string(step) + " (bpr " +
                         std::to_string(loss.bpr.value().item()) + ", reg " +
                         std::to_string(loss.regularizer.value().item()) + ", mi " +
                         std::to_string(loss.mi.value().item()) + ")";
        spdlog::error("fit: divergence, {}", result.message);
        diverged = true;
        break;
      }
      tape.backward(loss.total);
      adam_step(tensors, adam, adam_options);
      record.loss += value / static_cast<double>(steps);
      record.bpr += loss.bpr.value().item() / static_cast<double>(steps);
      record.regularizer += loss.regularizer.value().item() / static_cast<double>(steps);
      record.mi += loss.mi.value().item() / static_cast<double>(steps);
    }
    if (diverged) break;

    double metric;
    if (validator) {
      const EvalReport report = validator->evaluate(model.embed(params));
      record.validation_hr = report.overall.hit_ratio;
      record.validation_ndcg = report.overall.ndcg;
      metric = record.validation_hr;
    } else {
      metric = -record.loss;
    }
    record.improved = stopper.update(epoch, metric);
    if (record.improved) {
      result.best = params;
      result.best_epoch = epoch;
      result.best_metric = metric;
    }
    result.last = params;
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
    if (stopper.should_stop()) {
      result.status = FitStatus::EarlyStopped;
      break;
    }
  }
  for (Tensor* t : result.best.tensors()) t->drop_grad();
  for (Tensor* t : result.last.tensors()) t->drop_grad();
  return result;
}

std::string format_history(std::span<const EpochRecord> history) {
  std::string out = "epoch\tloss\tbpr\tregularizer\tmi\tval_hr\tval_ndcg\timproved\n";
  for (const auto& r : history) {
    out += fmt::format("{}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{}\n", r.epoch,
                       r.loss, r.bpr, r.regularizer, r.mi, r.validation_hr, r.validation_ndcg,
                       r.improved ? 1 : 0);
  }
  return out;
}

std::string to_string(FitStatus status) {
  switch (status) {
    case FitStatus::Completed:
      return "completed";
    case FitStatus::EarlyStopped:
      return "early_stopped";
    case FitStatus::Diverged:
      return "diverged";
  }
  return "completed";
}

std::string to_string(CorruptionScope scope) {
  switch (scope) {
    case CorruptionScope::Misplaced:
      return "misplaced";
    case CorruptionScope::Global:
      return "global";
    case CorruptionScope::WithinComponent:
      return "within_component";
  }
  return "misplaced";
}

CorruptionScope parse_corruption_scope(const std::string& text) {
  if (text == "misplaced") return CorruptionScope::Misplaced;
  if (text == "global") return CorruptionScope::Global;
  if (text == "within_component") return CorruptionScope::WithinComponent;
  throw ConfigError("unknown corruption scope '" + text + "' (misplaced|global|within_component)");
}

}  // namespace kcgn
