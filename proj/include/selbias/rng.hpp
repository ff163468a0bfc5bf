#pragma once

#include <cstdint>
#include <string_view>

namespace selbias {

/// Seeded xoshiro256** stream. Every draw advances `counter()` by one
/// uniform; transforms below are written out by hand so draw sequences do
/// not depend on the standard library's distribution implementations.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed = 0);

  /// Independent child stream for one purpose (noise, treatment, ...).
  /// Derived from the root seed and the tag only, so adding draws to one
  /// purpose never shifts another.
  [[nodiscard]] RngStream split(std::string_view purpose) const;

  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double low, double high);
  double normal();                        // N(0, 1)
  double normal(double mean, double sd);
  double laplace(double location, double scale);
  double pareto(double scale_min, double shape);
  double lognormal(double mu, double sigma);
  bool bernoulli(double p);

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  std::uint64_t s_[4];
};

RngStream new_rng(std::uint64_t seed);

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace selbias
