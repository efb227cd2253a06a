#include "kcgn/temporal.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "kcgn/error.hpp"

namespace kcgn {

TimeCodec TimeCodec::fit(const std::vector<std::int64_t>& timestamps, std::int64_t granularity,
                         std::size_t dim, SinusoidConvention convention) {
  TimeCodec codec;
  codec.origin = timestamps.empty() ? 0 : *std::min_element(timestamps.begin(), timestamps.end());
  codec.granularity = granularity;
  codec.dim = dim;
  codec.convention = convention;
  codec.validate();
  return codec;
}

void TimeCodec::validate() const {
  if (granularity <= 0) throw ConfigError("TimeCodec: granularity must be positive");
  if (dim == 0 || dim % 2 != 0) {
    throw ConfigError("TimeCodec: embedding dim must be even and positive, got " +
                      std::to_string(dim));
  }
}

std::int64_t TimeCodec::slot_of(std::int64_t timestamp) const {
  if (timestamp < origin) {
    spdlog::warn("timestamp {} precedes time origin {}; clamped to slot 0", timestamp, origin);
    return 0;
  }
  return (timestamp - origin) / granularity;
}

std::vector<double> TimeCodec::embedding(std::int64_t slot) const {
  std::vector<double> out(dim);
  const double t = static_cast<double>(slot);
  const double d = static_cast<double>(dim);
  for (std::size_t e = 0; e < dim; ++e) {
    const std::size_t pair_base = e - (e % 2);
    const double exponent = convention == SinusoidConvention::Literal
                                ? static_cast<double>(e) / d
                                : static_cast<double>(pair_base) / d;
    const double angle = t / std::pow(10000.0, exponent);
    out[e] = (e % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
  return out;
}

std::int64_t slot_of(const TimeCodec& codec, std::int64_t timestamp) {
  return codec.slot_of(timestamp);
}

std::vector<double> time_embedding(const TimeCodec& codec, std::int64_t slot) {
  return codec.embedding(slot);
}

std::string to_string(SinusoidConvention convention) {
  return convention == SinusoidConvention::Literal ? "literal" : "standard";
}

SinusoidConvention parse_sinusoid_convention(const std::string& text) {
  if (text == "literal") return SinusoidConvention::Literal;
  if (text == "standard") return SinusoidConvention::Standard;
  throw ConfigError("unknown time convention '" + text + "' (literal|standard)");
}

}  // namespace kcgn
