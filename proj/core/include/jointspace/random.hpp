#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace jointspace {

// Counter-based generator: the n-th draw of a stream is a pure function of
// (key, n). Streams are derived from a seed plus a name or tag, so adding a
// consumer never perturbs the draws of another.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(mix(key)) {}

  static Rng stream(std::uint64_t seed, std::string_view name);

  // Independent child stream. Does not advance this generator.
  Rng fork(std::uint64_t tag) const;
  Rng fork(std::string_view name) const;

  std::uint64_t next_u64() { return mix(key_ + kGamma * ++counter_); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Standard normal via Box-Muller; the spare draw is cached.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  static std::uint64_t mix(std::uint64_t z);
  static std::uint64_t hash(std::string_view text);

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace jointspace
