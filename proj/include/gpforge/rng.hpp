#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

namespace gpforge {

/// SplitMix64 finaliser. Used both as the uniform source and for seed
/// derivation, so every stream is a pure function of (seed, tags).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named random streams. Each sampler draws from its own stream so that
/// changing one fidelity parameter does not perturb unrelated draws.
enum class Stream : std::uint64_t {
  Inputs = 1,
  Latent = 2,
  Frequencies = 3,
  Weights = 4,
  Noise = 5,
  Experiment = 6,
};

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) noexcept {
  return splitmix64(base ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t base, Stream s) noexcept {
  return derive_seed(base, static_cast<std::uint64_t>(s));
}

template <typename... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, Tags... rest) noexcept {
  return derive_seed(derive_seed(base, tag), static_cast<std::uint64_t>(rest)...);
}

template <typename... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t base, Stream s, Tags... rest) noexcept {
  return derive_seed(derive_seed(base, s), static_cast<std::uint64_t>(rest)...);
}

/// Standard-normal generator: SplitMix64 counter stream + Box-Muller.
/// Output is a pure function of the seed and the number of draws taken.
class NormalGenerator {
 public:
  explicit NormalGenerator(std::uint64_t seed) noexcept : state_(seed) {}

  double operator()() noexcept;
  double uniform() noexcept;  // in (0, 1]

  void fill(std::span<double> out) noexcept;
  Eigen::VectorXd vector(Eigen::Index n);

 private:
  std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gpforge
