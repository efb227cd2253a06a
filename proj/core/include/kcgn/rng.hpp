#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace kcgn {

/// Counter-based pseudo-random stream.
///
/// Every draw is a pure function of (key, counter), so results do not depend
/// on the standard library's distribution implementations and a stream can be
/// split into independent children with `split`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  /// Child stream whose draws are independent of this one and of siblings
  /// with a different `stream_id`. Does not advance this stream.
  [[nodiscard]] Rng split(std::uint64_t stream_id) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  /// Uniform random permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace kcgn
