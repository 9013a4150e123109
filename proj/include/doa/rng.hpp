#ifndef DOA_RNG_HPP
#define DOA_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace doa {

// Derives an independent substream seed from (seed, index), splitmix64 style.
// Used everywhere a per-sample / per-trial generator is needed so that results
// do not depend on evaluation order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// Circularly symmetric complex Gaussian CN(0, variance): the real and
// imaginary parts are independent N(0, variance / 2).
inline std::complex<double> complex_gaussian(std::mt19937_64& rng, double variance) {
  std::normal_distribution<double> comp(0.0, std::sqrt(variance * 0.5));
  const double re = comp(rng);
  const double im = comp(rng);
  return {re, im};
}

}  // namespace doa

#endif  // DOA_RNG_HPP
