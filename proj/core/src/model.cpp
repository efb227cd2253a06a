#include "kcgn/model.hpp"

#include <algorithm>
#include <cmath>

#include "kcgn/error.hpp"
#include "kcgn/rng.hpp"

namespace kcgn {

void ModelShape::validate() const {
  if (users == 0 || items == 0 || types == 0) {
    throw ConfigError("model: user, item and type counts must be positive");
  }
  if (dim == 0 || dim % 2 != 0) throw ConfigError("model: dim must be even and positive");
  if (relation_layers == 0) throw ConfigError("model: relation_layers must be >= 1");
  if (!(slope >= 0.0 && slope <= 1.0)) throw ConfigError("model: slope must lie in [0, 1]");
}

std::vector<Tensor*> ModelParams::tensors() {
  std::vector<Tensor*> out{&user_embedding, &item_embedding};
  for (auto& w : neighbor_weight) out.push_back(&w);
  for (auto& w : self_weight) out.push_back(&w);
  out.push_back(&gate);
  return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
  std::vector<const Tensor*> out{&user_embedding, &item_embedding};
  for (const auto& w : neighbor_weight) out.push_back(&w);
  for (const auto& w : self_weight) out.push_back(&w);
  out.push_back(&gate);
  return out;
}

std::vector<std::string> ModelParams::tensor_names() const {
  std::vector<std::string> names{"user_embedding", "item_embedding"};
  for (std::size_t l = 0; l < neighbor_weight.size(); ++l)
    names.push_back("neighbor_weight_" + std::to_string(l));
  for (std::size_t l = 0; l < self_weight.size(); ++l)
    names.push_back("self_weight_" + std::to_string(l));
  names.push_back("gate");
  return names;
}

void ModelParams::validate() const {
  shape.validate();
  auto check = [](const Tensor& t, const std::string& name, std::size_t r, std::size_t c) {
    if (t.rows() != r || t.cols() != c) {
      throw DimensionError("tensor " + name + " has shape " + t.shape_string() + ", expected [" +
                           std::to_string(r) + " x " + std::to_string(c) + "]");
    }
    if (!t.all_finite()) throw NumericalError("tensor " + name + " has non-finite entries");
  };
  const std::size_t d = shape.dim;
  check(user_embedding, "user_embedding", shape.users, d);
  check(item_embedding, "item_embedding", shape.items * shape.types, d);
  if (neighbor_weight.size() != shape.layers || self_weight.size() != shape.layers) {
    throw DimensionError("model: expected " + std::to_string(shape.layers) +
                         " layer transforms, found " + std::to_string(neighbor_weight.size()));
  }
  for (std::size_t l = 0; l < shape.layers; ++l) {
    check(neighbor_weight[l], "neighbor_weight_" + std::to_string(l), d, d);
    check(self_weight[l], "self_weight_" + std::to_string(l), d, d);
  }
  check(gate, "gate", shape.encoded_width(), 1);
}

void ModelParams::zero_grad() {
  for (Tensor* t : tensors()) t->zero_grad();
}

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

ModelParams init_params(const ModelShape& shape, std::uint64_t seed) {
  shape.validate();
  const Rng root(seed);
  ModelParams p;
  p.shape = shape;
  Rng users = root.split(1), items = root.split(2), transforms = root.split(3);
  p.user_embedding = glorot(shape.users, shape.dim, users);
  p.item_embedding = glorot(shape.items * shape.types, shape.dim, items);
  for (std::size_t l = 0; l < shape.layers; ++l) {
    p.neighbor_weight.push_back(glorot(shape.dim, shape.dim, transforms));
    p.self_weight.push_back(glorot(shape.dim, shape.dim, transforms));
  }
  p.gate = Tensor(shape.encoded_width(), 1);
  return p;
}

InteractionOperators build_interaction_operators(const MultiTypedGraph& graph,
                                                 const TimeCodec& codec, bool use_temporal) {
  const std::size_t users = graph.user_count;
  const std::size_t subs = graph.sub_vertex_count();
  auto inv = [](std::uint32_t degree) { return 1.0 / std::max<double>(1.0, degree); };

  InteractionOperators ops;
  std::vector<Triplet> to_users, to_items;
  to_users.reserve(graph.edges.size());
  to_items.reserve(graph.edges.size());
  for (const auto& e : graph.edges) {
    to_users.push_back({e.user, e.sub_vertex, inv(graph.sub_vertex_degree[e.sub_vertex])});
    to_items.push_back({e.sub_vertex, e.user, inv(graph.user_degree[e.user])});
  }
  ops.user_from_items = SparseMatrix::from_triplets(users, subs, std::move(to_users));
  ops.items_from_users = SparseMatrix::from_triplets(subs, users, std::move(to_items));
  ops.user_self_scale.resize(users);
  ops.item_self_scale.resize(subs);
  for (std::size_t u = 0; u < users; ++u) ops.user_self_scale[u] = inv(graph.user_degree[u]);
  for (std::size_t s = 0; s < subs; ++s) ops.item_self_scale[s] = inv(graph.sub_vertex_degree[s]);

  if (use_temporal) {
    codec.validate();
    ops.user_time_context = Tensor(users, codec.dim);
    ops.item_time_context = Tensor(subs, codec.dim);
    for (const auto& e : graph.edges) {
      const std::vector<double> b = codec.embedding(e.slot);
      const double to_user = inv(graph.sub_vertex_degree[e.sub_vertex]);
      const double to_item = inv(graph.user_degree[e.user]);
      auto urow = ops.user_time_context.row(e.user);
      auto irow = ops.item_time_context.row(e.sub_vertex);
      for (std::size_t c = 0; c < codec.dim; ++c) {
        urow[c] += to_user * b[c];
        irow[c] += to_item * b[c];
      }
    }
  }
  return ops;
}

ParamVars bind_params(Tape& tape, ModelParams& params) {
  ParamVars v;
  v.user_embedding = tape.parameter(params.user_embedding);
  v.item_embedding = tape.parameter(params.item_embedding);
  for (auto& w : params.neighbor_weight) v.neighbor_weight.push_back(tape.parameter(w));
  for (auto& w : params.self_weight) v.self_weight.push_back(tape.parameter(w));
  v.gate = tape.parameter(params.gate);
  return v;
}

ParamVars bind_constants(Tape& tape, const ModelParams& params) {
  ParamVars v;
  v.user_embedding = tape.constant(params.user_embedding);
  v.item_embedding = tape.constant(params.item_embedding);
  for (const auto& w : params.neighbor_weight) v.neighbor_weight.push_back(tape.constant(w));
  for (const auto& w : params.self_weight) v.self_weight.push_back(tape.constant(w));
  v.gate = tape.constant(params.gate);
  return v;
}

LayerOutput propagate_layer(Var users, Var items, const InteractionOperators& ops,
                            Var neighbor_weight, Var self_weight, double slope) {
  const bool timed = ops.has_time_context();
  Var user_msgs = spmm(ops.user_from_items, items, timed ? &ops.user_time_context : nullptr);
  Var item_msgs = spmm(ops.items_from_users, users, timed ? &ops.item_time_context : nullptr);
  Var next_users = leaky_relu(matmul(scale_rows(users, ops.user_self_scale), self_weight) +
                                  matmul(user_msgs, neighbor_weight),
                              slope);
  Var next_items = leaky_relu(matmul(scale_rows(items, ops.item_self_scale), self_weight) +
                                  matmul(item_msgs, neighbor_weight),
                              slope);
  return {next_users, next_items};
}

EncodedInteractions encode_interactions(const ParamVars& params,
                                        const InteractionOperators& ops, double slope) {
  EncodedInteractions out;
  out.user_layers.push_back(params.user_embedding);
  out.item_layers.push_back(params.item_embedding);
  for (std::size_t l = 0; l < params.neighbor_weight.size(); ++l) {
    LayerOutput next = propagate_layer(out.user_layers.back(), out.item_layers.back(), ops,
                                       params.neighbor_weight[l], params.self_weight[l], slope);
    out.user_layers.push_back(next.users);
    out.item_layers.push_back(next.items);
  }
  if (out.user_layers.size() == 1) {
    out.users = out.user_layers.front();
    out.sub_vertices = out.item_layers.front();
  } else {
    out.users = concat_cols(out.user_layers);
    out.sub_vertices = concat_cols(out.item_layers);
  }
  return out;
}

FusionOutput gated_fusion(Var sub_vertices, Var gate, std::size_t types) {
  if (types == 0 || sub_vertices.rows() % types != 0) {
    throw DimensionError("gated_fusion: " + sub_vertices.value().shape_string() +
                         " rows not divisible by " + std::to_string(types) + " types");
  }
  const std::size_t items = sub_vertices.rows() / types;
  Var logits = reshape(matmul(sub_vertices, gate), items, types);
  Var gates = softmax_rows(logits);
  return {group_weighted_sum(gates, sub_vertices), gates};
}

Var relational_propagate(Var z0, const SparseMatrix& eta, std::size_t layers, double slope) {
  if (eta.rows() != z0.rows() || eta.cols() != z0.rows()) {
    throw DimensionError("relational_propagate: operator [" + std::to_string(eta.rows()) + " x " +
                         std::to_string(eta.cols()) + "] for " + z0.value().shape_string());
  }
  Var z = z0;
  for (std::size_t l = 0; l < layers; ++l) z = leaky_relu(spmm(eta, z), slope);
  return z;
}

Var readout(Var z, const Components& components) {
  return segment_mean(z, components.labels, components.count());
}

double score(std::span<const double> user, std::span<const double> item) {
  if (user.size() != item.size()) {
    throw DimensionError("score: widths " + std::to_string(user.size()) + " vs " +
                         std::to_string(item.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < user.size(); ++i) s += user[i] * item[i];
  return s;
}

double discriminate(std::span<const double> z, std::span<const double> f) {
  const double x = score(z, f);
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

KcgnModel::KcgnModel(ModelShape shape, ModelOptions options, const MultiTypedGraph& interactions,
                     TimeCodec codec, RelationGraph social, RelationGraph item_graph)
    : shape_(shape),
      options_(options),
      codec_(codec),
      social_(std::move(social)),
      item_graph_(std::move(item_graph)) {
  shape_.validate();
  if (interactions.user_count != shape_.users || interactions.item_count != shape_.items ||
      interactions.type_count != shape_.types) {
    throw DimensionError("model: interaction graph does not match model shape");
  }
  if (social_.node_count() != shape_.users) {
    throw DimensionError("model: social graph has " + std::to_string(social_.node_count()) +
                         " nodes for " + std::to_string(shape_.users) + " users");
  }
  if (item_graph_.node_count() != shape_.items) {
    throw DimensionError("model: item graph has " + std::to_string(item_graph_.node_count()) +
                         " nodes for " + std::to_string(shape_.items) + " items");
  }
  codec_.dim = shape_.dim;
  operators_ = build_interaction_operators(interactions, codec_, options_.use_temporal);
}

ForwardOutput KcgnModel::forward(const ParamVars& params) const {
  if (params.neighbor_weight.size() != shape_.layers) {
    throw DimensionError("model: parameter layer count does not match model shape");
  }
  ForwardOutput out;
  out.encoded = encode_interactions(params, operators_, shape_.slope);
  out.fused = gated_fusion(out.encoded.sub_vertices, params.gate, shape_.types);

  if (options_.use_social) {
    out.user_propagated = relational_propagate(out.encoded.users, social_.normalized(),
                                               shape_.relation_layers, shape_.slope);
    out.user_summary = readout(out.user_propagated, social_.components());
  }
  if (options_.use_item_graph) {
    out.item_propagated = relational_propagate(out.fused.items, item_graph_.normalized(),
                                               shape_.relation_layers, shape_.slope);
    out.item_summary = readout(out.item_propagated, item_graph_.components());
  }

  auto combine = [&](Var encoded, Var propagated) {
    if (!propagated.valid()) return encoded;
    switch (options_.score_source) {
      case ScoreSource::Residual:
        return encoded + propagated;
      case ScoreSource::Propagated:
        return propagated;
      case ScoreSource::Interaction:
        return encoded;
    }
    return encoded;
  };
  out.user_final = combine(out.encoded.users, out.user_propagated);
  out.item_final = combine(out.fused.items, out.item_propagated);
  return out;
}

Embeddings KcgnModel::embed(const ModelParams& params) const {
  Tape tape;
  ForwardOutput out = forward(bind_constants(tape, params));
  return {out.user_final.value(), out.item_final.value()};
}

std::string to_string(ScoreSource source) {
  switch (source) {
    case ScoreSource::Residual:
      return "residual";
    case ScoreSource::Propagated:
      return "propagated";
    case ScoreSource::Interaction:
      return "interaction";
  }
  return "residual";
}

ScoreSource parse_score_source(const std::string& text) {
  if (text == "residual") return ScoreSource::Residual;
  if (text == "propagated") return ScoreSource::Propagated;
  if (text == "interaction") return ScoreSource::Interaction;
  throw ConfigError("unknown score_source '" + text + "' (residual|propagated|interaction)");
}

}  // namespace kcgn
