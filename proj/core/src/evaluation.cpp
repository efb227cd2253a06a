#include "kcgn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <fmt/format.h>

#include "kcgn/error.hpp"

namespace kcgn {

std::size_t SplitDataset::test_user_count() const {
  return static_cast<std::size_t>(std::count_if(test.begin(), test.end(),
                                                [](const auto& t) { return t.has_value(); }));
}

std::size_t SplitDataset::validation_user_count() const {
  return static_cast<std::size_t>(std::count_if(
      validation.begin(), validation.end(), [](const auto& t) { return t.has_value(); }));
}

SplitDataset leave_one_out_split(std::span<const InteractionRecord> records, std::size_t users,
                                 std::size_t items, std::size_t types) {
  SplitDataset split;
  split.users = users;
  split.items = items;
  split.types = types;
  split.validation.assign(users, std::nullopt);
  split.test.assign(users, std::nullopt);
  split.interacted.assign(users, {});
  split.train_count.assign(users, 0);

  std::vector<std::vector<std::size_t>> by_user(users);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.user >= users || r.item >= items || r.type >= types) {
      throw IngestionError("leave_one_out_split: record " + std::to_string(i) +
                           " has an index out of range");
    }
    by_user[r.user].push_back(i);
  }

  std::vector<bool> held_out(records.size(), false);
  for (std::size_t u = 0; u < users; ++u) {
    auto& events = by_user[u];
    // Input order already increases within each user, so a stable sort by
    // time breaks ties in favour of later input.
    std::stable_sort(events.begin(), events.end(), [&](std::size_t a, std::size_t b) {
      return records[a].timestamp < records[b].timestamp;
    });
    auto& seen = split.interacted[u];
    for (std::size_t idx : events) seen.push_back(records[idx].item);
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    if (seen.empty()) continue;
    if (seen.size() == 1) {
      split.train_only_users.push_back(static_cast<std::uint32_t>(u));
      continue;
    }

    std::optional<std::uint32_t> test_item, val_item;
    for (auto it = events.rbegin(); it != events.rend(); ++it) {
      const auto& r = records[*it];
      const HeldOutEvent ev{r.item, r.type, r.timestamp};
      if (!test_item) {
        test_item = r.item;
        split.test[u] = ev;
      } else if (r.item != *test_item && seen.size() >= 3) {
        val_item = r.item;
        split.validation[u] = ev;
        break;
      }
    }
    for (std::size_t idx : events) {
      const auto item = records[idx].item;
      if (item == *test_item || (val_item && item == *val_item)) held_out[idx] = true;
    }
  }

  for (std::size_t i = 0; i < records.size(); ++i) {
    if (held_out[i]) continue;
    split.train.push_back(records[i]);
    ++split.train_count[records[i].user];
  }
  return split;
}

NegativeSample sample_eval_negatives(std::span<const std::uint32_t> interacted,
                                     std::size_t items, Rng& rng, std::size_t count) {
  NegativeSample out;
  out.requested = count;
  std::size_t excluded = 0;
  for (std::uint32_t i : interacted)
    if (i < items) ++excluded;
  const std::size_t available = items - std::min(items, excluded);
  auto is_interacted = [&](std::uint32_t j) {
    return std::binary_search(interacted.begin(), interacted.end(), j);
  };

  if (available <= 2 * count) {
    std::vector<std::uint32_t> pool;
    pool.reserve(available);
    for (std::uint32_t j = 0; j < items; ++j)
      if (!is_interacted(j)) pool.push_back(j);
    const std::size_t take = std::min(count, pool.size());
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng.below(pool.size() - k));
      std::swap(pool[k], pool[pick]);
    }
    pool.resize(take);
    out.items = std::move(pool);
    return out;
  }

  std::vector<std::uint32_t> chosen;
  chosen.reserve(count);
  while (out.items.size() < count) {
    const auto j = static_cast<std::uint32_t>(rng.below(items));
    if (is_interacted(j)) continue;
    auto pos = std::lower_bound(chosen.begin(), chosen.end(), j);
    if (pos != chosen.end() && *pos == j) continue;
    chosen.insert(pos, j);
    out.items.push_back(j);
  }
  return out;
}

std::size_t rank_of(std::size_t test_index, std::span<const double> scores) {
  if (test_index >= scores.size()) throw EvaluationError("rank_of: test index outside scores");
  const double target = scores[test_index];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i != test_index && scores[i] >= target) ++rank;
  }
  return rank;
}

HitMetrics hr_ndcg_at_n(std::span<const std::size_t> ranks, std::size_t n) {
  if (ranks.empty()) throw EvaluationError("hr_ndcg_at_n: no ranks to aggregate");
  HitMetrics m;
  for (std::size_t r : ranks) {
    if (r == 0) throw EvaluationError("hr_ndcg_at_n: ranks are 1-based");
    if (r <= n) {
      m.hit_ratio += 1.0;
      m.ndcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
  }
  m.users = ranks.size();
  m.hit_ratio /= static_cast<double>(ranks.size());
  m.ndcg /= static_cast<double>(ranks.size());
  return m;
}

namespace {

std::array<std::size_t, 3> quartile_bounds(std::span<const std::size_t> counts) {
  std::vector<std::size_t> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  std::array<std::size_t, 3> bounds{};
  const std::size_t n = sorted.size();
  for (std::size_t q = 1; q <= 3; ++q) {
    const std::size_t pos = (n * q + 3) / 4;  // ceil(n q / 4)
    bounds[q - 1] = sorted[pos == 0 ? 0 : pos - 1];
  }
  return bounds;
}

}  // namespace

std::vector<std::size_t> sparsity_buckets(std::span<const std::size_t> counts) {
  std::vector<std::size_t> out(counts.size(), 0);
  if (counts.empty()) return out;
  const auto bounds = quartile_bounds(counts);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::size_t b = 0;
    while (b < 3 && counts[i] > bounds[b]) ++b;
    out[i] = b;
  }
  return out;
}

Evaluator::Evaluator(const SplitDataset& split, EvalOptions options) : options_(options) {
  if (options_.top_n == 0) throw ConfigError("evaluation: top_n must be positive");
  const auto& held = options_.split == HeldOutSplit::Test ? split.test : split.validation;
  const Rng root = Rng(options_.seed).split(options_.split == HeldOutSplit::Test ? 2 : 1);
  for (std::size_t u = 0; u < split.users; ++u) {
    if (!held[u]) continue;
    if (options_.target_type && held[u]->type != *options_.target_type) continue;
    Rng rng = root.split(u);
    NegativeSample neg = sample_eval_negatives(split.interacted[u], split.items, rng,
                                               options_.negatives);
    if (neg.short_of_candidates()) ++short_users_;
    std::vector<std::uint32_t> cands;
    cands.reserve(neg.items.size() + 1);
    cands.push_back(held[u]->item);
    cands.insert(cands.end(), neg.items.begin(), neg.items.end());
    users_.push_back({static_cast<std::uint32_t>(u), *held[u], split.train_count[u]});
    candidates_.push_back(std::move(cands));
  }
}

std::vector<UserRank> Evaluator::rank_users(const Embeddings& embeddings) const {
  std::vector<UserRank> out(users_.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores;
    for (std::size_t k = begin; k < end; ++k) {
      const auto& cands = candidates_[k];
      scores.resize(cands.size());
      for (std::size_t c = 0; c < cands.size(); ++c)
        scores[c] = embeddings.score(users_[k].user, cands[c]);
      out[k] = {users_[k].user, users_[k].event.type, rank_of(0, scores), cands.size()};
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(options_.threads, users_.size()));
  if (threads == 1) {
    work(0, users_.size());
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (users_.size() + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t b = t * chunk, e = std::min(users_.size(), b + chunk);
    if (b < e) pool.emplace_back(work, b, e);
  }
  pool.clear();  // join before handing out the results
  return out;
}

EvalReport Evaluator::evaluate(const Embeddings& embeddings) const {
  if (users_.empty()) throw EvaluationError("evaluation: no users with a held-out item");
  const auto ranks = rank_users(embeddings);
  EvalReport report;
  report.top_n = options_.top_n;
  report.target_type = options_.target_type;
  report.short_candidate_users = short_users_;

  std::vector<std::size_t> all, counts;
  for (std::size_t k = 0; k < ranks.size(); ++k) {
    all.push_back(ranks[k].rank);
    counts.push_back(users_[k].train_count);
  }
  report.overall = hr_ndcg_at_n(all, options_.top_n);

  const auto bucket_of = sparsity_buckets(counts);
  std::array<std::vector<std::size_t>, 4> bucket_ranks;
  for (std::size_t k = 0; k < ranks.size(); ++k) {
    bucket_ranks[bucket_of[k]].push_back(ranks[k].rank);
    report.bucket_upper[bucket_of[k]] =
        std::max(report.bucket_upper[bucket_of[k]], counts[k]);
  }
  for (std::size_t b = 0; b < 4; ++b) {
    if (!bucket_ranks[b].empty()) report.buckets[b] = hr_ndcg_at_n(bucket_ranks[b], options_.top_n);
  }

  std::map<std::uint32_t, std::vector<std::size_t>> by_type;
  for (const auto& r : ranks) by_type[r.type].push_back(r.rank);
  for (const auto& [type, list] : by_type) report.per_type[type] = hr_ndcg_at_n(list, options_.top_n);
  return report;
}

EvalReport evaluate(const Embeddings& embeddings, const SplitDataset& split,
                    const EvalOptions& options) {
  return Evaluator(split, options).evaluate(embeddings);
}

namespace {

std::string type_label(std::uint32_t type, std::span<const std::string> names) {
  return type < names.size() ? names[type] : std::to_string(type);
}

}  // namespace

std::string format_report_text(const EvalReport& report, std::span<const std::string> type_names) {
  const std::size_t n = report.top_n;
  std::string out;
  auto metrics = [&](const std::string& prefix, const HitMetrics& m) {
    out += fmt::format("{}users = {}\n", prefix, m.users);
    out += fmt::format("{}hr@{} = {:.6f}\n", prefix, n, m.hit_ratio);
    out += fmt::format("{}ndcg@{} = {:.6f}\n", prefix, n, m.ndcg);
  };
  out += fmt::format("top_n = {}\n", n);
  if (report.target_type) {
    out += fmt::format("target_type = {}\n", type_label(*report.target_type, type_names));
  }
  out += fmt::format("short_candidate_users = {}\n", report.short_candidate_users);
  metrics("", report.overall);
  for (std::size_t b = 0; b < 4; ++b) {
    const std::string prefix = fmt::format("sparsity_q{}.", b + 1);
    out += fmt::format("{}max_train_events = {}\n", prefix, report.bucket_upper[b]);
    metrics(prefix, report.buckets[b]);
  }
  for (const auto& [type, m] : report.per_type) {
    metrics(fmt::format("type.{}.", type_label(type, type_names)), m);
  }
  return out;
}

std::string format_report_table(const EvalReport& report,
                                std::span<const std::string> type_names) {
  const std::size_t n = report.top_n;
  std::string out = "metric\tgroup\tvalue\tusers\n";
  auto rows = [&](const std::string& group, const HitMetrics& m) {
    out += fmt::format("hr@{}\t{}\t{:.6f}\t{}\n", n, group, m.hit_ratio, m.users);
    out += fmt::format("ndcg@{}\t{}\t{:.6f}\t{}\n", n, group, m.ndcg, m.users);
  };
  rows("overall", report.overall);
  for (std::size_t b = 0; b < 4; ++b) rows(fmt::format("sparsity_q{}", b + 1), report.buckets[b]);
  for (const auto& [type, m] : report.per_type) rows("type:" + type_label(type, type_names), m);
  return out;
}

}  // namespace kcgn
