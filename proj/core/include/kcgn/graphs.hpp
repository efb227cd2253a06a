#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "kcgn/sparse.hpp"
#include "kcgn/temporal.hpp"

namespace kcgn {

/// One (user, item, type, timestamp) event.
struct InteractionRecord {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::uint32_t type = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

/// Edge between a user and the type-specific sub-vertex item * K + type.
struct TypedEdge {
  std::uint32_t user = 0;
  std::uint32_t sub_vertex = 0;
  std::int64_t timestamp = 0;
  std::int64_t slot = 0;
};

/// Bipartite graph over I users and J*K type-specific item sub-vertices.
///
/// Edges are unique per (user, sub-vertex) and sorted by that key; the
/// degree tables are the edge tallies on each side.
struct MultiTypedGraph {
  std::size_t user_count = 0;
  std::size_t item_count = 0;
  std::size_t type_count = 1;
  std::vector<TypedEdge> edges;
  std::vector<std::uint32_t> user_degree;
  std::vector<std::uint32_t> sub_vertex_degree;

  std::size_t sub_vertex_count() const { return item_count * type_count; }
  std::size_t vertex_count() const { return user_count + sub_vertex_count(); }
  std::uint32_t sub_vertex(std::uint32_t item, std::uint32_t type) const {
    return static_cast<std::uint32_t>(item * type_count + type);
  }
};

/// Builds G_m from interaction records. Duplicate (user, item, type) events
/// keep the latest timestamp (later input wins on equal timestamps).
/// Throws IngestionError naming the first out-of-range record.
MultiTypedGraph build_multityped_graph(std::span<const InteractionRecord> records,
                                       std::size_t users, std::size_t items, std::size_t types,
                                       const TimeCodec& codec);

/// Connected-component labelling of a relation graph.
struct Components {
  std::vector<std::size_t> labels;  // label per node, numbered by first node
  std::vector<std::size_t> sizes;   // size per label
  std::size_t count() const { return sizes.size(); }
};

/// Undirected user-user or item-item graph with its normalized propagation
/// operator and component labels.
class RelationGraph {
 public:
  RelationGraph() = default;

  /// Symmetrizes the edge list, removes duplicates and drops self edges
  /// (with a warning). Throws IngestionError on out-of-range endpoints.
  static RelationGraph from_edges(std::size_t nodes,
                                  std::span<const std::pair<std::uint32_t, std::uint32_t>> edges);

  std::size_t node_count() const { return adjacency_.rows(); }
  /// Number of undirected edges.
  std::size_t edge_count() const { return adjacency_.nnz() / 2; }
  std::size_t dropped_self_edges() const { return dropped_self_edges_; }

  const SparseMatrix& adjacency() const { return adjacency_; }
  std::span<const std::uint32_t> neighbors(std::size_t node) const {
    return adjacency_.row_indices(node);
  }
  bool has_edge(std::size_t a, std::size_t b) const { return adjacency_.at(a, b) != 0.0; }

  /// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
  const SparseMatrix& normalized() const { return normalized_; }
  const Components& components() const { return components_; }

 private:
  SparseMatrix adjacency_;
  SparseMatrix normalized_;
  Components components_;
  std::size_t dropped_self_edges_ = 0;
};

SparseMatrix normalize(const RelationGraph& graph);
Components connected_components(const RelationGraph& graph);

/// Social graph G_u over `users` nodes; one-way input edges become undirected.
RelationGraph build_social_graph(std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                                 std::size_t users);

struct CategoryGraphOptions {
  /// Largest clique emitted for one category. Larger categories connect each
  /// member to floor(cap / size) sampled members instead.
  std::size_t max_edges_per_category = 500;
  std::uint64_t seed = 0;
};

/// Item graph G_v: items sharing at least one category are connected.
/// `item_categories` holds (item, category) pairs. Throws IngestionError on
/// an item id >= items.
RelationGraph build_item_graph_categories(
    std::span<const std::pair<std::uint32_t, std::uint32_t>> item_categories, std::size_t items,
    const CategoryGraphOptions& options = {});

/// Item graph G_v: (j, j') connected iff at least `min_common_users` users
/// interacted with both under one and the same type.
RelationGraph build_item_graph_cointeraction(std::span<const InteractionRecord> records,
                                             std::size_t items, std::size_t types,
                                             std::size_t min_common_users = 1);

}  // namespace kcgn
