#include "kcgn/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "kcgn/error.hpp"
#include "kcgn/rng.hpp"

namespace kcgn {

namespace {

std::string describe(const InteractionRecord& r, std::size_t index) {
  return "record " + std::to_string(index) + " (user " + std::to_string(r.user) + ", item " +
         std::to_string(r.item) + ", type " + std::to_string(r.type) + ", t " +
         std::to_string(r.timestamp) + ")";
}

using Edge = std::pair<std::uint32_t, std::uint32_t>;

}  // namespace

MultiTypedGraph build_multityped_graph(std::span<const InteractionRecord> records,
                                       std::size_t users, std::size_t items, std::size_t types,
                                       const TimeCodec& codec) {
  if (users == 0 || items == 0 || types == 0) {
    throw ConfigError("build_multityped_graph: user, item and type counts must be >= 1");
  }
  MultiTypedGraph g;
  g.user_count = users;
  g.item_count = items;
  g.type_count = types;
  g.user_degree.assign(users, 0);
  g.sub_vertex_degree.assign(g.sub_vertex_count(), 0);

  struct Keyed {
    std::uint64_t key;
    std::int64_t timestamp;
    std::size_t order;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.user >= users || r.item >= items || r.type >= types) {
      throw IngestionError("build_multityped_graph: index out of range in " + describe(r, i));
    }
    if (r.timestamp < 0) {
      throw IngestionError("build_multityped_graph: negative timestamp in " + describe(r, i));
    }
    const std::uint64_t key =
        (static_cast<std::uint64_t>(r.user) << 32) | g.sub_vertex(r.item, r.type);
    keyed.push_back({key, r.timestamp, i});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.key != b.key) return a.key < b.key;
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.order < b.order;
  });

  for (std::size_t i = 0; i < keyed.size(); ++i) {
    if (i + 1 < keyed.size() && keyed[i + 1].key == keyed[i].key) continue;  // latest wins
    TypedEdge e;
    e.user = static_cast<std::uint32_t>(keyed[i].key >> 32);
    e.sub_vertex = static_cast<std::uint32_t>(keyed[i].key & 0xFFFFFFFFu);
    e.timestamp = keyed[i].timestamp;
    e.slot = codec.slot_of(e.timestamp);
    ++g.user_degree[e.user];
    ++g.sub_vertex_degree[e.sub_vertex];
    g.edges.push_back(e);
  }
  return g;
}

RelationGraph RelationGraph::from_edges(std::size_t nodes, std::span<const Edge> edges) {
  RelationGraph g;
  std::vector<Triplet> triplets;
  triplets.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    if (a >= nodes || b >= nodes) {
      throw IngestionError("relation graph: edge (" + std::to_string(a) + ", " +
                           std::to_string(b) + ") outside " + std::to_string(nodes) + " nodes");
    }
    if (a == b) {
      ++g.dropped_self_edges_;
      continue;
    }
    triplets.push_back({a, b, 1.0});
    triplets.push_back({b, a, 1.0});
  }
  if (g.dropped_self_edges_ > 0) {
    spdlog::warn("relation graph: dropped {} self edge(s)", g.dropped_self_edges_);
  }
  SparseMatrix summed = SparseMatrix::from_triplets(nodes, nodes, std::move(triplets));
  // Duplicates were summed; reset every stored entry to 1.
  std::vector<double> ones(summed.nnz(), 1.0);
  g.adjacency_ = SparseMatrix::from_csr(
      nodes, nodes, std::vector<std::size_t>(summed.row_ptr().begin(), summed.row_ptr().end()),
      std::vector<std::uint32_t>(summed.col_idx().begin(), summed.col_idx().end()),
      std::move(ones));
  g.normalized_ = normalize(g);
  g.components_ = connected_components(g);
  return g;
}

SparseMatrix normalize(const RelationGraph& graph) {
  const SparseMatrix& a = graph.adjacency();
  const std::size_t n = a.rows();
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Self loop contributes 1 to every degree.
    inv_sqrt_deg[i] = 1.0 / std::sqrt(1.0 + static_cast<double>(a.row_indices(i).size()));
  }
  std::vector<std::size_t> row_ptr(n + 1, 0);
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  cols.reserve(a.nnz() + n);
  vals.reserve(a.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool self_done = false;
    for (std::uint32_t j : a.row_indices(i)) {
      if (!self_done && j > i) {
        cols.push_back(static_cast<std::uint32_t>(i));
        vals.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[i]);
        self_done = true;
      }
      cols.push_back(j);
      vals.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
    if (!self_done) {
      cols.push_back(static_cast<std::uint32_t>(i));
      vals.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[i]);
    }
    row_ptr[i + 1] = cols.size();
  }
  return SparseMatrix::from_csr(n, n, std::move(row_ptr), std::move(cols), std::move(vals));
}

Components connected_components(const RelationGraph& graph) {
  const std::size_t n = graph.node_count();
  constexpr std::size_t unset = static_cast<std::size_t>(-1);
  Components c;
  c.labels.assign(n, unset);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (c.labels[start] != unset) continue;
    const std::size_t label = c.sizes.size();
    c.sizes.push_back(0);
    c.labels[start] = label;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      ++c.sizes[label];
      for (std::uint32_t w : graph.neighbors(v)) {
        if (c.labels[w] == unset) {
          c.labels[w] = label;
          stack.push_back(w);
        }
      }
    }
  }
  return c;
}

RelationGraph build_social_graph(std::span<const Edge> edges, std::size_t users) {
  return RelationGraph::from_edges(users, edges);
}

RelationGraph build_item_graph_categories(std::span<const Edge> item_categories,
                                          std::size_t items,
                                          const CategoryGraphOptions& options) {
  std::map<std::uint32_t, std::vector<std::uint32_t>> members;
  for (const auto& [item, category] : item_categories) {
    if (item >= items) {
      throw IngestionError("item categories: unknown item id " + std::to_string(item) +
                           " (item count " + std::to_string(items) + ")");
    }
    members[category].push_back(item);
  }

  const Rng root(options.seed);
  std::vector<Edge> edges;
  for (auto& [category, list] : members) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    const std::size_t n = list.size();
    if (n < 2) continue;
    const std::size_t clique = n * (n - 1) / 2;
    if (clique <= options.max_edges_per_category) {
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) edges.emplace_back(list[a], list[b]);
      continue;
    }
    const std::size_t per_member = std::max<std::size_t>(1, options.max_edges_per_category / n);
    Rng rng = root.split(category);
    std::vector<std::uint32_t> others;
    for (std::size_t a = 0; a < n; ++a) {
      others.clear();
      for (std::size_t b = 0; b < n; ++b)
        if (b != a) others.push_back(list[b]);
      const std::size_t take = std::min(per_member, others.size());
      for (std::size_t k = 0; k < take; ++k) {
        const std::size_t pick = k + static_cast<std::size_t>(rng.below(others.size() - k));
        std::swap(others[k], others[pick]);
        edges.emplace_back(list[a], others[k]);
      }
    }
  }
  return RelationGraph::from_edges(items, edges);
}

RelationGraph build_item_graph_cointeraction(std::span<const InteractionRecord> records,
                                             std::size_t items, std::size_t types,
                                             std::size_t min_common_users) {
  if (min_common_users < 1) throw ConfigError("co-interaction graph: min_common_users must be >= 1");
  // (user, type) -> items
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> baskets;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.item >= items || r.type >= types) {
      throw IngestionError("co-interaction graph: index out of range in " + describe(r, i));
    }
    baskets[{r.user, r.type}].push_back(r.item);
  }

  std::unordered_map<std::uint64_t, std::size_t> common;
  std::vector<std::uint64_t> user_pairs;
  auto flush = [&] {
    std::sort(user_pairs.begin(), user_pairs.end());
    user_pairs.erase(std::unique(user_pairs.begin(), user_pairs.end()), user_pairs.end());
    for (std::uint64_t p : user_pairs) ++common[p];
    user_pairs.clear();
  };
  std::uint32_t current_user = 0;
  bool any = false;
  for (auto& [key, basket] : baskets) {
    if (any && key.first != current_user) flush();
    current_user = key.first;
    any = true;
    std::sort(basket.begin(), basket.end());
    basket.erase(std::unique(basket.begin(), basket.end()), basket.end());
    for (std::size_t a = 0; a < basket.size(); ++a)
      for (std::size_t b = a + 1; b < basket.size(); ++b)
        user_pairs.push_back((static_cast<std::uint64_t>(basket[a]) << 32) | basket[b]);
  }
  flush();

  std::vector<Edge> edges;
  for (const auto& [pair, count] : common) {
    if (count >= min_common_users) {
      edges.emplace_back(static_cast<std::uint32_t>(pair >> 32),
                         static_cast<std::uint32_t>(pair & 0xFFFFFFFFu));
    }
  }
  std::sort(edges.begin(), edges.end());
  return RelationGraph::from_edges(items, edges);
}

}  // namespace kcgn
