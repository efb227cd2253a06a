#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kcgn/bundle.hpp"
#include "kcgn/evaluation.hpp"
#include "kcgn/model.hpp"
#include "kcgn/rng.hpp"
#include "kcgn/synthetic.hpp"
#include "kcgn/training.hpp"

namespace kcgn::testing {

/// 5 users, 8 items, 2 types; social components {0,1,2} and {3,4}; items in
/// two categories of four.
inline TrainingSet canonical_training_set() {
  const std::vector<InteractionRecord> records = {
      {0, 0, 0, 100}, {0, 1, 1, 200}, {0, 2, 0, 300}, {0, 5, 1, 400},
      {1, 1, 0, 150}, {1, 3, 1, 250}, {1, 4, 0, 350}, {1, 3, 0, 450},
      {2, 2, 1, 120}, {2, 6, 0, 220}, {2, 7, 1, 320},
      {3, 4, 0, 130}, {3, 5, 1, 230}, {3, 0, 1, 330}, {3, 6, 0, 430},
      {4, 7, 0, 140}, {4, 1, 1, 240}, {4, 3, 0, 340},
  };
  const std::vector<std::pair<std::uint32_t, std::uint32_t>> social = {{0, 1}, {1, 2}, {3, 4}};
  const std::vector<std::pair<std::uint32_t, std::uint32_t>> cats = {
      {0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 1}, {5, 1}, {6, 1}, {7, 1}};
  TrainingSet data;
  data.split = leave_one_out_split(records, 5, 8, 2);
  data.social = build_social_graph(social, 5);
  data.item_graph = build_item_graph_categories(cats, 8);
  return data;
}

inline TrainConfig canonical_config() {
  TrainConfig c;
  c.dim = 4;
  c.layers = 1;
  c.relation_layers = 1;
  c.l2 = 1e-2;
  c.mi_user = 0.5;
  c.mi_item = 0.5;
  c.granularity = 100;
  c.seed = 3;
  return c;
}

/// Parameters with a nonzero gate so every path carries gradient.
inline ModelParams canonical_params(const ModelShape& shape, std::uint64_t seed = 11) {
  ModelParams p = init_params(shape, seed);
  Rng rng(seed, 99);
  for (double& g : p.gate.values()) g = rng.uniform(-0.5, 0.5);
  return p;
}

inline PlantedOptions planted_options() { return PlantedOptions{}; }

/// Settings used for the overfit and contrastive checks on the planted set.
inline TrainConfig planted_config() {
  TrainConfig c;
  c.learning_rate = 0.005;
  c.epochs = 200;
  c.patience = 200;
  c.batch_size = 16;
  c.dim = 16;
  c.layers = 2;
  c.relation_layers = 2;
  c.seed = 5;
  return c;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("kcgn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace kcgn::testing
