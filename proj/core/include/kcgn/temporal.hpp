#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kcgn/tensor.hpp"

namespace kcgn {

/// Exponent convention for the sinusoidal time embedding.
enum class SinusoidConvention {
  /// Element e uses frequency 10000^(e/d) for both sin (even e) and cos
  /// (odd e), so the two halves of a pair have different frequencies.
  Literal,
  /// Transformer convention: both elements of pair i use 10000^(2i/d).
  Standard,
};

/// Maps raw timestamps to discrete slots and slots to sinusoidal vectors.
struct TimeCodec {
  std::int64_t origin = 0;
  std::int64_t granularity = 86400;
  std::size_t dim = 16;
  SinusoidConvention convention = SinusoidConvention::Literal;

  /// Codec whose origin is the earliest timestamp in `timestamps` (zero when
  /// empty). Throws ConfigError on non-positive granularity or odd dim.
  static TimeCodec fit(const std::vector<std::int64_t>& timestamps, std::int64_t granularity,
                       std::size_t dim,
                       SinusoidConvention convention = SinusoidConvention::Literal);

  void validate() const;

  /// floor((timestamp - origin) / granularity). Timestamps before the origin
  /// are clamped to slot 0 with a warning.
  std::int64_t slot_of(std::int64_t timestamp) const;

  /// Length-`dim` embedding of a slot; every element lies in [-1, 1].
  std::vector<double> embedding(std::int64_t slot) const;
};

std::int64_t slot_of(const TimeCodec& codec, std::int64_t timestamp);
std::vector<double> time_embedding(const TimeCodec& codec, std::int64_t slot);

std::string to_string(SinusoidConvention convention);
SinusoidConvention parse_sinusoid_convention(const std::string& text);

}  // namespace kcgn
