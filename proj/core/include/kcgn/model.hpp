#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kcgn/graphs.hpp"
#include "kcgn/tape.hpp"
#include "kcgn/temporal.hpp"

namespace kcgn {

/// Which embedding feeds the inner-product preference score.
enum class ScoreSource {
  /// h* + z: interaction encoding plus its relational propagation.
  Residual,
  /// z only (post relational propagation).
  Propagated,
  /// h* only (pre relational propagation).
  Interaction,
};

struct ModelShape {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t types = 1;
  std::size_t dim = 16;
  std::size_t layers = 2;           // interaction message-passing layers (L)
  std::size_t relation_layers = 2;  // social / item graph propagation layers
  double slope = 0.2;               // LeakyReLU negative slope

  std::size_t encoded_width() const { return (layers + 1) * dim; }
  void validate() const;
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// All trainable tensors.
struct ModelParams {
  ModelShape shape;
  Tensor user_embedding;                 // I x d
  Tensor item_embedding;                 // (J*K) x d, row item*K + type
  std::vector<Tensor> neighbor_weight;   // per layer, d x d
  std::vector<Tensor> self_weight;       // per layer, d x d
  Tensor gate;                           // (L+1)d x 1

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  /// Stable names, parallel to tensors().
  std::vector<std::string> tensor_names() const;
  /// Expected shape of the named tensor under `shape`.
  void validate() const;
  void zero_grad();
};

/// Glorot-uniform embeddings and transforms, zero gate.
ModelParams init_params(const ModelShape& shape, std::uint64_t seed);

/// Sparse operators and constant time context derived from G_m once per
/// graph. Neighbour messages are normalized by the neighbour's degree and
/// self messages by the node's own degree (zero degree counts as one).
struct InteractionOperators {
  SparseMatrix user_from_items;   // I x JK, entry 1/|N_sub|
  SparseMatrix items_from_users;  // JK x I, entry 1/|N_user|
  std::vector<double> user_self_scale;
  std::vector<double> item_self_scale;
  /// Degree-weighted sum of the time embeddings on each node's edges.
  /// Empty when temporal context is disabled.
  Tensor user_time_context;
  Tensor item_time_context;

  bool has_time_context() const { return !user_time_context.empty(); }
};

InteractionOperators build_interaction_operators(const MultiTypedGraph& graph,
                                                 const TimeCodec& codec, bool use_temporal);

/// Parameters recorded on a tape.
struct ParamVars {
  Var user_embedding;
  Var item_embedding;
  std::vector<Var> neighbor_weight;
  std::vector<Var> self_weight;
  Var gate;
};

/// Records every tensor as a differentiable parameter.
ParamVars bind_params(Tape& tape, ModelParams& params);
/// Records every tensor as a constant (forward-only inference).
ParamVars bind_constants(Tape& tape, const ModelParams& params);

struct LayerOutput {
  Var users;
  Var items;
};

/// One layer of time-aware multi-typed message passing:
///   H_u' = LeakyReLU(diag(1/|N_u|) H_u W_self + (A_uv H_v + B_u) W_nbr)
/// and the mirrored rule for item sub-vertices.
LayerOutput propagate_layer(Var users, Var items, const InteractionOperators& ops,
                            Var neighbor_weight, Var self_weight, double slope);

struct EncodedInteractions {
  std::vector<Var> user_layers;  // L + 1 states
  std::vector<Var> item_layers;
  Var users;                     // I x (L+1)d
  Var sub_vertices;              // JK x (L+1)d
};

EncodedInteractions encode_interactions(const ParamVars& params,
                                        const InteractionOperators& ops, double slope);

struct FusionOutput {
  Var items;  // J x W
  Var gates;  // J x K, rows sum to one
};

/// Softmax gate over the K type-specific rows of each item, scored against
/// the learned query `gate`.
FusionOutput gated_fusion(Var sub_vertices, Var gate, std::size_t types);

/// Z <- LeakyReLU(eta Z), repeated `layers` times. Parameter free.
Var relational_propagate(Var z0, const SparseMatrix& eta, std::size_t layers, double slope);

/// Mean of member rows per connected component.
Var readout(Var z, const Components& components);

/// sigmoid(z . f)
double discriminate(std::span<const double> z, std::span<const double> f);
/// Inner-product preference score.
double score(std::span<const double> user, std::span<const double> item);

struct ModelOptions {
  bool use_temporal = true;
  bool use_social = true;
  bool use_item_graph = true;
  ScoreSource score_source = ScoreSource::Residual;
};

struct ForwardOutput {
  EncodedInteractions encoded;
  FusionOutput fused;
  Var user_propagated;  // valid when social propagation is enabled
  Var item_propagated;  // valid when item-graph propagation is enabled
  Var user_summary;     // per social component, valid with user_propagated
  Var item_summary;
  Var user_final;       // I x (L+1)d scoring embeddings
  Var item_final;       // J x (L+1)d
};

/// Final scoring embeddings for every user and item.
struct Embeddings {
  Tensor users;
  Tensor items;

  double score(std::size_t user, std::size_t item) const {
    return kcgn::score(users.row(user), items.row(item));
  }
};

/// The full forward pass over fixed graphs. Immutable after construction,
/// so frozen-parameter inference may run from several threads.
class KcgnModel {
 public:
  KcgnModel(ModelShape shape, ModelOptions options, const MultiTypedGraph& interactions,
            TimeCodec codec, RelationGraph social, RelationGraph item_graph);

  ForwardOutput forward(const ParamVars& params) const;
  Embeddings embed(const ModelParams& params) const;

  const ModelShape& shape() const { return shape_; }
  const ModelOptions& options() const { return options_; }
  const TimeCodec& codec() const { return codec_; }
  const InteractionOperators& operators() const { return operators_; }
  const RelationGraph& social() const { return social_; }
  const RelationGraph& item_graph() const { return item_graph_; }

 private:
  ModelShape shape_;
  ModelOptions options_;
  TimeCodec codec_;
  InteractionOperators operators_;
  RelationGraph social_;
  RelationGraph item_graph_;
};

std::string to_string(ScoreSource source);
ScoreSource parse_score_source(const std::string& text);

}  // namespace kcgn
