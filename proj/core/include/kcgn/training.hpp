#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kcgn/evaluation.hpp"
#include "kcgn/graphs.hpp"
#include "kcgn/model.hpp"
#include "kcgn/optim.hpp"
#include "kcgn/rng.hpp"

namespace kcgn {

struct Ablation {
  bool no_multi_type = false;
  bool no_social = false;
  bool no_item_graph = false;
  bool no_temporal = false;
  bool no_mi = false;

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

/// How corrupted rows are drawn for the contrastive loss.
enum class CorruptionScope {
  /// Each anchor draws a node uniformly from outside its own component, so
  /// every negative pair is a misplaced node-graph pair. Falls back to
  /// Global when one component holds every node.
  Misplaced,
  /// One permutation across all nodes of non-singleton components.
  Global,
  /// Independent permutation inside each component.
  WithinComponent,
};

struct TrainConfig {
  double learning_rate = 0.005;
  std::size_t batch_size = 1024;
  std::size_t epochs = 200;
  std::size_t patience = 5;
  double l2 = 1e-4;       // lambda
  double mi_user = 0.1;   // lambda_1
  double mi_item = 0.1;   // lambda_2
  std::size_t layers = 2;
  std::size_t relation_layers = 2;
  std::size_t dim = 16;
  double slope = 0.2;
  std::int64_t granularity = 86400;
  std::uint64_t seed = 42;
  Ablation ablation;
  ScoreSource score_source = ScoreSource::Residual;
  CorruptionScope corruption = CorruptionScope::Misplaced;
  SinusoidConvention time_convention = SinusoidConvention::Literal;
  bool bpr_per_type = false;
  std::size_t validation_top_n = 10;
  std::size_t eval_negatives = 99;
  double divergence_threshold = 1e6;
  std::size_t eval_threads = 1;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Default tuning grids.
inline constexpr double kLearningRateGrid[] = {0.001, 0.005, 0.01};
inline constexpr std::size_t kBatchSizeGrid[] = {1024, 2048, 4096, 8192};
inline constexpr std::size_t kDimensionGrid[] = {8, 16, 32, 64};

struct BprTriple {
  std::uint32_t user = 0;
  std::uint32_t positive = 0;
  std::uint32_t negative = 0;

  friend bool operator==(const BprTriple&, const BprTriple&) = default;
};

/// Observed (user, item) pairs of the training split, merged over types or
/// kept per type. Users without any unobserved item are skipped.
class PositiveIndex {
 public:
  PositiveIndex(std::span<const InteractionRecord> train, std::size_t users, std::size_t items,
                std::size_t types, bool per_type = false);

  std::size_t pair_count() const { return pairs_.size(); }
  std::size_t items() const { return items_; }
  std::size_t skipped_users() const { return skipped_users_; }
  bool observed(std::uint32_t user, std::uint32_t item, std::uint32_t type = 0) const;

 private:
  friend std::vector<BprTriple> sample_bpr_triples(const PositiveIndex&, std::size_t, Rng&);

  struct Pair {
    std::uint32_t user, item, type;
  };
  std::size_t items_ = 0;
  std::size_t types_ = 1;
  bool per_type_ = false;
  std::vector<Pair> pairs_;
  /// Sorted observed items per (user, type) slot; slot = user * types + type
  /// in per-type mode, user otherwise.
  std::vector<std::vector<std::uint32_t>> observed_;
  std::size_t skipped_users_ = 0;
};

/// `batch_size` triples: positive pair uniform over observed pairs, negative
/// item uniform over the user's unobserved items (rejection sampled).
std::vector<BprTriple> sample_bpr_triples(const PositiveIndex& index, std::size_t batch_size,
                                          Rng& rng);

/// -ln sigmoid(pos - neg)
double bpr_term(double positive_score, double negative_score);

/// Source row of each corrupted row. Nodes of singleton components always
/// map to themselves. Global and WithinComponent scopes return a
/// permutation; Misplaced samples with replacement.
std::vector<std::size_t> corruption_sources(const Components& components, Rng& rng,
                                            CorruptionScope scope = CorruptionScope::Misplaced);
Tensor shuffle_corrupt(const Tensor& z, const Components& components, Rng& rng,
                       CorruptionScope scope = CorruptionScope::WithinComponent);

/// Noise-contrastive cross-entropy over positive and corrupted logits:
///   -1/(N+ + N-) * (sum log sigmoid(pos) + sum log(1 - sigmoid(neg)))
/// with the sigmoid clamped to [1e-12, 1 - 1e-12]. Both inputs are n x 1.
Var contrastive_term(Var positive_logits, Var negative_logits);

/// Node/summary pairs of one relation graph. Nodes in singleton components
/// take part in neither set.
struct MiPairs {
  std::vector<std::size_t> anchors;    // node index of each pair
  std::vector<std::size_t> corrupted;  // row supplying the corrupted embedding
  std::vector<std::size_t> summaries;  // component of the anchor
  bool empty() const { return anchors.empty(); }
};

MiPairs make_mi_pairs(const Components& components, std::span<const std::size_t> sources);

/// lambda-weighted contrastive term for one graph family; a constant zero
/// when there are no eligible pairs or the weight is zero.
Var mi_graph_loss(Var z, Var summaries, const MiPairs& pairs, double weight);

/// L_beta = mi_graph_loss(users) + mi_graph_loss(items).
Var mi_loss(Tape& tape, const ForwardOutput& forward, const MiPairs* user_pairs,
            const MiPairs* item_pairs, double user_weight, double item_weight);

struct LossBreakdown {
  Var total;
  Var bpr;
  Var regularizer;
  Var mi;
};

/// mean BPR over the triples + l2 * sum ||theta||^2 + L_beta.
LossBreakdown total_loss(Tape& tape, std::span<const BprTriple> triples,
                         const ForwardOutput& forward, const ParamVars& params, double l2,
                         const MiPairs* user_pairs, const MiPairs* item_pairs, double user_weight,
                         double item_weight);

/// Early-stopping state machine over a higher-is-better validation metric.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records an epoch's metric; returns true when it strictly improves.
  bool update(std::size_t epoch, double metric);
  bool should_stop() const { return bad_epochs_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t bad_epochs_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = 0.0;
  bool any_ = false;
};

/// Everything fit() needs: the leave-one-out split (graphs are built from
/// its training part) plus the social and item relation graphs.
struct TrainingSet {
  SplitDataset split;
  RelationGraph social;
  RelationGraph item_graph;
};

/// Returns the records with every type collapsed to 0 (single-type variant).
std::vector<InteractionRecord> merge_types(std::span<const InteractionRecord> records);

/// Model for a training set under a config (applies the ablation flags).
KcgnModel build_model(const TrainingSet& data, const TrainConfig& config);
ModelShape model_shape(const TrainingSet& data, const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double bpr = 0.0;
  double regularizer = 0.0;
  double mi = 0.0;
  double validation_hr = 0.0;
  double validation_ndcg = 0.0;
  bool improved = false;
};

enum class FitStatus { Completed, EarlyStopped, Diverged };

struct FitResult {
  ModelParams best;
  /// Parameters after the last completed epoch.
  ModelParams last;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  std::vector<EpochRecord> history;
  FitStatus status = FitStatus::Completed;
  std::string message;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam training with per-epoch validation HR@N and early stopping; returns
/// the best-validation parameters. Divergence (non-finite loss or loss above
/// the threshold) stops training and returns the last best parameters.
FitResult fit(const TrainingSet& data, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

/// Tab-separated per-epoch log with a header row; doubles use 17
/// significant digits.
std::string format_history(std::span<const EpochRecord> history);

std::string to_string(FitStatus status);
std::string to_string(CorruptionScope scope);
CorruptionScope parse_corruption_scope(const std::string& text);

}  // namespace kcgn
