#include "ellpos/sampler.hpp"

#include <stdexcept>

namespace ellpos {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ key[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return c;
}

SeedSpec split_seed(const SeedSpec& seed, std::uint64_t child) {
  // odd multiplier: child -> child * K is a bijection mod 2^64
  const std::uint64_t base = mix64(seed.stream ^ 0x6A09E667F3BCC909ull);
  return {seed.master, base + (child + 1) * 0x9E3779B97F4A7C15ull};
}

Xoshiro256pp::Xoshiro256pp(const SeedSpec& seed) {
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed.master),
                                         static_cast<std::uint32_t>(seed.master >> 32)};
  const auto hi_lo = static_cast<std::uint32_t>(seed.stream);
  const auto hi_hi = static_cast<std::uint32_t>(seed.stream >> 32);
  for (std::uint32_t j = 0; j < 2; ++j) {
    const auto block = philox4x32({j, 0u, hi_lo, hi_hi}, key);
    s_[2 * j] = (static_cast<std::uint64_t>(block[0]) << 32) | block[1];
    s_[2 * j + 1] = (static_cast<std::uint64_t>(block[2]) << 32) | block[3];
  }
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // all-zero state is a fixed point
}

std::vector<double> gaussian_vector(const SeedSpec& seed, std::size_t n) {
  if (n == 0) throw std::invalid_argument("gaussian_vector: n must be positive");
  std::vector<double> out(n);
  GaussianStream stream(seed);
  stream.fill(out);
  return out;
}

SubspaceBasis haar_subspace(const SeedSpec& seed, std::size_t n, std::size_t k) {
  if (k == 0 || k > n) throw std::invalid_argument("haar_subspace: need 1 <= k <= n");
  GaussianStream stream(seed);
  Eigen::MatrixXd g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  // column-major fill: column j is the j-th Gaussian vector
  stream.fill(std::span<double>(g.data(), static_cast<std::size_t>(g.size())));

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return {std::move(q)};
}

}  // namespace ellpos
