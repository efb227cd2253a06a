#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "kcgn/graphs.hpp"
#include "kcgn/training.hpp"

namespace kcgn {

/// Generated dataset with dense ids and optional community structure.
struct SyntheticDataset {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t types = 0;
  std::size_t categories = 0;
  std::vector<InteractionRecord> records;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> social;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> item_categories;
  std::vector<std::uint32_t> user_community;
  std::vector<std::string> type_names;
};

/// Users and items split evenly into communities. Each community's users are
/// linked by a ring plus chords, each community owns one item category, and
/// every user interacts with distinct items of their own category only.
struct PlantedOptions {
  std::size_t users = 20;
  std::size_t items = 30;
  std::size_t communities = 2;
  std::size_t types = 2;
  std::size_t interactions_per_user = 8;
  std::size_t chord_step = 3;
  std::int64_t start_time = 1'600'000'000;
  std::int64_t spacing = 86400;
  std::uint64_t seed = 1;
};
SyntheticDataset planted_dataset(const PlantedOptions& options = {});

/// Uniformly random interactions, social edges and categories.
struct RandomOptions {
  std::size_t users = 600;
  std::size_t items = 300;
  std::size_t types = 2;
  std::size_t interactions_per_user = 6;
  std::size_t social_degree = 3;
  std::size_t categories = 10;
  std::int64_t start_time = 1'600'000'000;
  std::int64_t spacing = 86400;
  std::uint64_t seed = 2;
};
SyntheticDataset random_dataset(const RandomOptions& options = {});

/// `edges` interactions with distinct (user, item, type) keys, drawn
/// uniformly. Throws ConfigError when edges exceeds users * items * types.
std::vector<InteractionRecord> random_interactions(std::size_t users, std::size_t items,
                                                   std::size_t types, std::size_t edges,
                                                   std::uint64_t seed);

TrainingSet to_training_set(const SyntheticDataset& dataset,
                            const CategoryGraphOptions& category_options = {});

/// Writes interactions.tsv, social.tsv and items.tsv with external ids
/// (u<n>, i<n>, c<n>, type names) in the raw input format.
void write_raw_inputs(const SyntheticDataset& dataset, const std::filesystem::path& dir);

}  // namespace kcgn
