#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kcgn/graphs.hpp"
#include "kcgn/training.hpp"

namespace kcgn {

/// External id <-> dense index, dense ids assigned in first-appearance order.
class Vocabulary {
 public:
  std::uint32_t intern(const std::string& id);
  std::optional<std::uint32_t> find(const std::string& id) const;
  const std::string& id(std::size_t index) const { return ids_.at(index); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }

  static Vocabulary from_ids(std::vector<std::string> ids);

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// How raw type labels become dense type ids.
enum class TypeOrder {
  FirstAppearance,
  /// Labels sorted by numeric value.
  Numeric,
  /// Ratings 1..5 become five types: negative, below_average, neutral,
  /// above_average, positive.
  Rating,
  /// Exactly the labels in PrepareOptions::type_labels, in that order.
  Explicit,
};

inline const std::vector<std::string> kRatingTypeLabels = {
    "negative", "below_average", "neutral", "above_average", "positive"};

struct PrepareOptions {
  std::filesystem::path interactions;
  std::optional<std::filesystem::path> social;
  std::optional<std::filesystem::path> items;
  std::filesystem::path out_dir;
  TypeOrder type_order = TypeOrder::FirstAppearance;
  std::vector<std::string> type_labels;
};

struct PrepareSummary {
  std::size_t records = 0;
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t types = 0;
  std::size_t social_edges = 0;
  std::size_t dropped_social = 0;
  std::size_t item_rows = 0;
  std::size_t dropped_item_rows = 0;
  std::size_t categories = 0;
  std::size_t train_events = 0;
  std::size_t validation_users = 0;
  std::size_t test_users = 0;
  std::size_t train_only_users = 0;
};

/// A prepared dataset directory, loaded.
struct DatasetBundle {
  Vocabulary users;
  Vocabulary items;
  Vocabulary types;
  Vocabulary categories;
  std::vector<InteractionRecord> records;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> social;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> item_categories;
  bool has_categories = false;
};

/// Parses the raw TSV inputs (`user item type timestamp`, `user user`,
/// `item category`) into dense ids. Malformed lines raise IngestionError
/// with file and line; social or category rows naming unknown users or
/// items are dropped and counted.
DatasetBundle parse_inputs(const PrepareOptions& options, PrepareSummary* summary = nullptr);

/// parse_inputs followed by write_bundle.
PrepareSummary prepare(const PrepareOptions& options);

/// Writes records.bin, the vocabularies, social.tsv, item_categories.tsv,
/// bundle.manifest, split.manifest and split.tsv. Output is a pure function
/// of the bundle.
PrepareSummary write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);

DatasetBundle load_bundle(const std::filesystem::path& dir);

void write_records(const std::filesystem::path& path, std::span<const InteractionRecord> records);
std::vector<InteractionRecord> read_records(const std::filesystem::path& path);

struct ItemGraphOptions {
  CategoryGraphOptions categories;
  std::size_t min_common_users = 1;
};

/// Leave-one-out split plus relation graphs. The item graph comes from the
/// categories when present, else from co-interaction on the training split.
TrainingSet make_training_set(const DatasetBundle& bundle, const ItemGraphOptions& options = {});

}  // namespace kcgn
