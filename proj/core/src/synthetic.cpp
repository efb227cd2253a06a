#include "kcgn/synthetic.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "kcgn/error.hpp"
#include "kcgn/evaluation.hpp"
#include "kcgn/rng.hpp"

namespace kcgn {
namespace {

std::vector<std::string> default_type_names(std::size_t types) {
  if (types == 2) return {"click", "purchase"};
  if (types == 3) return {"view", "cart", "purchase"};
  std::vector<std::string> out;
  for (std::size_t k = 0; k < types; ++k) out.push_back("t" + std::to_string(k));
  return out;
}

/// Members of group g when n entities are dealt into `groups` contiguous blocks.
std::pair<std::size_t, std::size_t> block(std::size_t n, std::size_t groups, std::size_t g) {
  return {n * g / groups, n * (g + 1) / groups};
}

}  // namespace

SyntheticDataset planted_dataset(const PlantedOptions& o) {
  if (o.communities == 0 || o.types == 0 || o.users < o.communities || o.items < o.communities) {
    throw ConfigError("planted_dataset: need at least one user and item per community");
  }
  SyntheticDataset ds;
  ds.users = o.users;
  ds.items = o.items;
  ds.types = o.types;
  ds.categories = o.communities;
  ds.type_names = default_type_names(o.types);
  ds.user_community.resize(o.users);
  const Rng root(o.seed);

  for (std::size_t c = 0; c < o.communities; ++c) {
    const auto [ub, ue] = block(o.users, o.communities, c);
    const auto [ib, ie] = block(o.items, o.communities, c);
    const std::size_t members = ue - ub;
    if (o.interactions_per_user > ie - ib) {
      throw ConfigError("planted_dataset: more interactions per user than category items");
    }
    for (std::size_t i = ib; i < ie; ++i)
      ds.item_categories.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(c));
    for (std::size_t k = 0; k < members; ++k) {
      const auto u = static_cast<std::uint32_t>(ub + k);
      ds.user_community[u] = static_cast<std::uint32_t>(c);
      if (members > 1) {
        ds.social.emplace_back(u, static_cast<std::uint32_t>(ub + (k + 1) % members));
        if (o.chord_step > 1 && members > o.chord_step + 1) {
          ds.social.emplace_back(u, static_cast<std::uint32_t>(ub + (k + o.chord_step) % members));
        }
      }
    }
  }

  for (std::size_t u = 0; u < o.users; ++u) {
    Rng rng = root.split(u);
    const auto [ib, ie] = block(o.items, o.communities, ds.user_community[u]);
    const auto order = rng.permutation(ie - ib);
    for (std::size_t n = 0; n < o.interactions_per_user; ++n) {
      InteractionRecord r;
      r.user = static_cast<std::uint32_t>(u);
      r.item = static_cast<std::uint32_t>(ib + order[n]);
      r.type = static_cast<std::uint32_t>(rng.below(o.types));
      r.timestamp = o.start_time + static_cast<std::int64_t>(n) * o.spacing +
                    static_cast<std::int64_t>(u) * 60;
      ds.records.push_back(r);
    }
  }
  return ds;
}

SyntheticDataset random_dataset(const RandomOptions& o) {
  if (o.interactions_per_user > o.items || o.types == 0 || o.users < 2 || o.categories == 0) {
    throw ConfigError("random_dataset: inconsistent sizes");
  }
  SyntheticDataset ds;
  ds.users = o.users;
  ds.items = o.items;
  ds.types = o.types;
  ds.categories = o.categories;
  ds.type_names = default_type_names(o.types);
  ds.user_community.assign(o.users, 0);
  const Rng root(o.seed);

  Rng social_rng = root.split(1);
  for (std::size_t u = 0; u < o.users; ++u) {
    for (std::size_t e = 0; e < o.social_degree; ++e) {
      const auto v = social_rng.below(o.users);
      if (v != u) ds.social.emplace_back(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
    }
  }
  Rng cat_rng = root.split(2);
  for (std::size_t i = 0; i < o.items; ++i) {
    ds.item_categories.emplace_back(static_cast<std::uint32_t>(i),
                                    static_cast<std::uint32_t>(cat_rng.below(o.categories)));
  }
  const Rng event_root = root.split(3);
  for (std::size_t u = 0; u < o.users; ++u) {
    Rng rng = event_root.split(u);
    const auto order = rng.permutation(o.items);
    for (std::size_t n = 0; n < o.interactions_per_user; ++n) {
      ds.records.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(order[n]),
                            static_cast<std::uint32_t>(rng.below(o.types)),
                            o.start_time + static_cast<std::int64_t>(n) * o.spacing});
    }
  }
  return ds;
}

std::vector<InteractionRecord> random_interactions(std::size_t users, std::size_t items,
                                                   std::size_t types, std::size_t edges,
                                                   std::uint64_t seed) {
  const std::size_t total = users * items * types;
  if (edges > total) {
    throw ConfigError(fmt::format("random_interactions: {} edges exceed {} possible keys", edges,
                                  total));
  }
  Rng rng(seed);
  std::vector<std::uint64_t> keys;
  keys.reserve(edges);
  if (edges * 4 >= total) {
    const auto perm = rng.permutation(total);
    keys.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(edges));
  } else {
    std::vector<bool> taken(total, false);
    while (keys.size() < edges) {
      const auto k = rng.below(total);
      if (taken[k]) continue;
      taken[k] = true;
      keys.push_back(k);
    }
  }
  std::vector<InteractionRecord> out;
  out.reserve(edges);
  for (std::size_t n = 0; n < keys.size(); ++n) {
    const std::uint64_t k = keys[n];
    out.push_back({static_cast<std::uint32_t>(k / (items * types)),
                   static_cast<std::uint32_t>((k / types) % items),
                   static_cast<std::uint32_t>(k % types),
                   1'600'000'000 + static_cast<std::int64_t>(rng.below(365)) * 86400});
  }
  return out;
}

TrainingSet to_training_set(const SyntheticDataset& ds, const CategoryGraphOptions& options) {
  TrainingSet data;
  data.split = leave_one_out_split(ds.records, ds.users, ds.items, ds.types);
  data.social = build_social_graph(ds.social, ds.users);
  data.item_graph = build_item_graph_categories(ds.item_categories, ds.items, options);
  return data;
}

void write_raw_inputs(const SyntheticDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestionError("cannot write '" + (dir / name).string() + "'");
    return out;
  };
  auto interactions = open("interactions.tsv");
  for (const auto& r : ds.records) {
    interactions << fmt::format("u{}\ti{}\t{}\t{}\n", r.user, r.item, ds.type_names.at(r.type),
                                r.timestamp);
  }
  auto social = open("social.tsv");
  for (auto [u, v] : ds.social) social << fmt::format("u{}\tu{}\n", u, v);
  auto items = open("items.tsv");
  for (auto [i, c] : ds.item_categories) items << fmt::format("i{}\tc{}\n", i, c);
}

}  // namespace kcgn
