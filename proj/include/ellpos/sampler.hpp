#pragma once

// Deterministic, splittable Gaussian randomness.
//
// Generation method (fixed; changing any step changes every downstream number):
//   1. A SeedSpec (master, stream) selects a Philox4x32-10 block: key = master,
//      128-bit counter = (stream << 64) | j for j = 0, 1.
//   2. Those 256 output bits seed a xoshiro256++ engine for that stream.
//   3. Boost.Random's ziggurat normal_distribution<double> maps the engine to
//      standard normals.
// Distinct (master, stream) pairs select disjoint Philox counter ranges, so
// streams never share state and can be generated on any worker in any order.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <boost/random/normal_distribution.hpp>

namespace ellpos {

struct SeedSpec {
  std::uint64_t master = 0;
  std::uint64_t stream = 0;

  bool operator==(const SeedSpec&) const = default;
};

/// Injective in `child` for a fixed parent; pure.
SeedSpec split_seed(const SeedSpec& seed, std::uint64_t child);

/// Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  explicit Xoshiro256pp(const SeedSpec& seed);

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<std::uint64_t, 4> s_{};
};

/// Standard normal variates for one SeedSpec.
class GaussianStream {
 public:
  explicit GaussianStream(const SeedSpec& seed) : engine_(seed) {}

  double operator()() { return normal_(engine_); }
  void fill(std::span<double> out) {
    for (double& v : out) v = normal_(engine_);
  }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  Xoshiro256pp engine_;
  boost::random::normal_distribution<double> normal_;
};

std::vector<double> gaussian_vector(const SeedSpec& seed, std::size_t n);

/// Orthonormal n x k frame; columns span a Haar-distributed subspace.
struct SubspaceBasis {
  Eigen::MatrixXd columns;

  std::size_t n() const { return static_cast<std::size_t>(columns.rows()); }
  std::size_t k() const { return static_cast<std::size_t>(columns.cols()); }
};

/// Orthonormal factor of an n x k Gaussian matrix, with R's diagonal made positive.
SubspaceBasis haar_subspace(const SeedSpec& seed, std::size_t n, std::size_t k);

}  // namespace ellpos
