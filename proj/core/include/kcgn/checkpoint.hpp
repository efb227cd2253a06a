#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "kcgn/model.hpp"
#include "kcgn/training.hpp"

namespace kcgn {

/// Saved model state. On disk a checkpoint is a directory holding
/// `checkpoint.manifest` (key = value lines plus one `tensor NAME ROWS COLS
/// FILE` line per parameter) and one raw little-endian float64 file per
/// tensor, row-major.
struct Checkpoint {
  ModelParams params;
  TrainConfig config;
  std::size_t epoch = 0;
  double metric = 0.0;
  /// Bundle directory the model was trained on; may be empty.
  std::string bundle;
};

inline constexpr const char* kCheckpointManifest = "checkpoint.manifest";

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);

/// Throws IngestionError on unreadable or truncated files and DimensionError
/// when a tensor disagrees with the shape recorded in the manifest.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// (name, rows, cols) of every parameter tensor of a model shape.
struct TensorSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
};
std::vector<TensorSpec> expected_tensors(const ModelShape& shape);

/// Throws DimensionError naming the first tensor whose shape differs from
/// what `shape` requires.
void require_compatible(const ModelParams& params, const ModelShape& shape);

void write_f64_file(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64_file(const std::filesystem::path& path);

}  // namespace kcgn
