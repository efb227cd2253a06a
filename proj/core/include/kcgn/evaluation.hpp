#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kcgn/graphs.hpp"
#include "kcgn/model.hpp"
#include "kcgn/rng.hpp"

namespace kcgn {

struct HeldOutEvent {
  std::uint32_t item = 0;
  std::uint32_t type = 0;
  std::int64_t timestamp = 0;
};

/// Leave-one-out split: per user the item of the latest event is held out
/// for test and the next most recent distinct item for validation. Every
/// event on a held-out item is removed from training.
struct SplitDataset {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t types = 1;
  std::vector<InteractionRecord> train;
  std::vector<std::optional<HeldOutEvent>> validation;
  std::vector<std::optional<HeldOutEvent>> test;
  /// Sorted distinct items each user touched in any split and type.
  std::vector<std::vector<std::uint32_t>> interacted;
  /// Number of training events per user.
  std::vector<std::size_t> train_count;
  /// Users with a single distinct item: kept in training, never evaluated.
  std::vector<std::uint32_t> train_only_users;

  std::size_t test_user_count() const;
  std::size_t validation_user_count() const;
};

/// Ties on timestamp are broken by input order (later input is more recent).
/// Throws IngestionError on out-of-range records.
SplitDataset leave_one_out_split(std::span<const InteractionRecord> records, std::size_t users,
                                 std::size_t items, std::size_t types);

struct NegativeSample {
  std::vector<std::uint32_t> items;
  std::size_t requested = 0;
  /// Fewer than `requested` candidates were available.
  bool short_of_candidates() const { return items.size() < requested; }
};

/// `count` distinct items outside `interacted` (sorted), uniform without
/// replacement. Returns every available item when fewer exist.
NegativeSample sample_eval_negatives(std::span<const std::uint32_t> interacted,
                                     std::size_t items, Rng& rng, std::size_t count = 99);

/// 1-based rank of scores[test_index] among all scores; candidates tied with
/// the test score count as ranked above it.
std::size_t rank_of(std::size_t test_index, std::span<const double> scores);

struct HitMetrics {
  double hit_ratio = 0.0;
  double ndcg = 0.0;
  std::size_t users = 0;
};

/// Mean of [rank <= n] and of 1/log2(rank + 1) for rank <= n.
/// Throws EvaluationError on an empty rank list.
HitMetrics hr_ndcg_at_n(std::span<const std::size_t> ranks, std::size_t n);

/// Quartile bucket (0..3) per entry of `counts`, by population quartiles of
/// the sorted counts; counts equal to a boundary fall in the lower bucket.
std::vector<std::size_t> sparsity_buckets(std::span<const std::size_t> counts);

enum class HeldOutSplit { Validation, Test };

struct EvalOptions {
  std::size_t top_n = 10;
  std::size_t negatives = 99;
  std::uint64_t seed = 0;
  HeldOutSplit split = HeldOutSplit::Test;
  /// Restrict to users whose held-out event has this type.
  std::optional<std::uint32_t> target_type;
  std::size_t threads = 1;
};

struct EvalReport {
  std::size_t top_n = 10;
  HitMetrics overall;
  std::array<HitMetrics, 4> buckets{};
  /// Largest training-event count in each bucket (inclusive).
  std::array<std::size_t, 4> bucket_upper{};
  std::map<std::uint32_t, HitMetrics> per_type;
  std::optional<std::uint32_t> target_type;
  std::size_t short_candidate_users = 0;
};

/// Per-user outcome of candidate ranking.
struct UserRank {
  std::uint32_t user = 0;
  std::uint32_t type = 0;
  std::size_t rank = 0;
  std::size_t candidates = 0;
};

/// Leave-one-out ranking evaluator. Candidate negatives are drawn once per
/// user from a seed stream specific to the held-out split and then reused
/// for every call.
class Evaluator {
 public:
  Evaluator(const SplitDataset& split, EvalOptions options);

  std::vector<UserRank> rank_users(const Embeddings& embeddings) const;
  EvalReport evaluate(const Embeddings& embeddings) const;

  const EvalOptions& options() const { return options_; }
  std::size_t user_count() const { return users_.size(); }
  const std::vector<std::uint32_t>& candidates(std::size_t k) const { return candidates_[k]; }

 private:
  struct Target {
    std::uint32_t user;
    HeldOutEvent event;
    std::size_t train_count;
  };

  EvalOptions options_;
  std::vector<Target> users_;
  std::vector<std::vector<std::uint32_t>> candidates_;  // held-out item first
  std::size_t short_users_ = 0;
};

EvalReport evaluate(const Embeddings& embeddings, const SplitDataset& split,
                    const EvalOptions& options);

/// Flat `key = value` block. `type_names` maps dense type ids to labels.
std::string format_report_text(const EvalReport& report,
                               std::span<const std::string> type_names = {});
/// Tab-separated table: one row per metric x group.
std::string format_report_table(const EvalReport& report,
                                std::span<const std::string> type_names = {});

}  // namespace kcgn
