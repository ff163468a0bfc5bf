#include "selbias/rng.hpp"

#include <cmath>
#include <numbers>

namespace selbias {

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t state = seed;
  for (auto& word : s_) word = splitmix64(state);
}

RngStream RngStream::split(std::string_view purpose) const {
  std::uint64_t state = seed_ ^ fnv1a64(purpose);
  return RngStream(splitmix64(state));
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  ++counter_;
  return result;
}

double RngStream::uniform() {
  // 53 random bits mapped onto [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double low, double high) {
  return low + (high - low) * uniform();
}

double RngStream::normal() {
  // Box-Muller, one output per pair; no cached spare keeps the stream
  // position a pure function of the number of calls.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::normal(double mean, double sd) { return mean + sd * normal(); }

double RngStream::laplace(double location, double scale) {
  double u = uniform() - 0.5;
  while (u == -0.5) u = uniform() - 0.5;
  const double sign = u < 0 ? -1.0 : 1.0;
  return location - scale * sign * std::log(1.0 - 2.0 * std::abs(u));
}

double RngStream::pareto(double scale_min, double shape) {
  double u = uniform();
  while (u <= 0.0) u = uniform();
  // Inverse CDF of F(y) = 1 - (ym / y)^shape.
  return scale_min * std::pow(u, -1.0 / shape);
}

double RngStream::lognormal(double mu, double sigma) {
  return std::exp(normal(mu, sigma));
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

RngStream new_rng(std::uint64_t seed) { return RngStream(seed); }

}  // namespace selbias
