// Deterministic seeded random streams.
//
// Streams are addressed by (master_seed, label, index). Identical triples
// produce bit-identical draw sequences on every platform, which is why the
// generator (xoshiro256**) and every variate mapping are spelled out here
// instead of going through std:: distributions, whose outputs are
// implementation-defined.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string_view>

namespace ambicp {

struct SeedSpec {
  std::uint64_t master_seed = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::string_view label, std::uint64_t index = 0)
      : origin_(mix(master_seed, label, index)) {
    std::uint64_t s = origin_;
    for (auto& w : state_) w = detail::splitmix64(s);
  }

  RandomStream(const SeedSpec& seed, std::string_view label, std::uint64_t index = 0)
      : RandomStream(seed.master_seed, label, index) {}

  // Child stream addressed relative to this stream's key. Independent of how
  // many draws the parent has made, so sub-tasks can be re-ordered or run in
  // parallel without changing results.
  RandomStream fork(std::string_view label, std::uint64_t index = 0) const {
    return RandomStream(origin_, label, index);
  }

  // Keyed fork, e.g. one stream per example id.
  RandomStream fork(std::string_view label, std::string_view key) const {
    return RandomStream(origin_, label, detail::fnv1a64(key));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53 mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound); rejection sampling, bound >= 1.
  std::uint64_t uniform_int(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via Box-Muller; consumes exactly two uniforms.
  double gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  Eigen::VectorXd gaussian_vector(Eigen::Index dim) {
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = gaussian();
    return v;
  }

  // Categorical draw by inverse CDF walk; probs must lie on the simplex.
  // One-hot inputs return their support index exactly.
  int categorical(const Eigen::Ref<const Eigen::VectorXd>& probs) {
    const double u = uniform();
    double acc = 0.0;
    int last_positive = 0;
    for (Eigen::Index k = 0; k < probs.size(); ++k) {
      if (probs[k] > 0.0) last_positive = static_cast<int>(k);
      acc += probs[k];
      if (u < acc) return static_cast<int>(k);
    }
    return last_positive;  // u landed in the rounding slack at the top
  }

  std::uint64_t origin() const { return origin_; }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t mix(std::uint64_t master, std::string_view label, std::uint64_t index) {
    std::uint64_t s = master;
    s ^= detail::fnv1a64(label);
    std::uint64_t h = detail::splitmix64(s);
    s = h ^ index;
    return detail::splitmix64(s);
  }

  std::uint64_t origin_;
  std::uint64_t state_[4];
};

}  // namespace ambicp
