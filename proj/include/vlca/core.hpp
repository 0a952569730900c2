// SPDX-License-Identifier: Apache-2.0
//
// Shared numeric types, the portable random source, and LossValue.
#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <string_view>

namespace vlca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Scalar loss together with its gradients.
///
/// `grad_features` is taken with respect to the loss's primary matrix input
/// (features for decouple/approximate, logits for semantic, the matrix itself
/// for rank_surrogate). `grad_params` is the flattened (row-major) gradient
/// of any trainable parameter the loss touches. `grad_logits` is only filled
/// by the combined objective, which has two differentiable inputs.
struct LossValue {
  double value = 0.0;
  Matrix grad_features;
  Vector grad_params;
  Matrix grad_logits;
  std::map<std::string, double> diagnostics;
};

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// splitmix64-seeded xoshiro256**. Library distributions in <random> are not
/// specified bit-for-bit across standard libraries, so uniform and normal
/// draws are derived here to keep seeded runs identical everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept {
    for (auto& s : state_) s = splitmix(seed);
  }

  std::uint64_t next() noexcept {
    const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = std::rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept {
    // rejection keeps the draw unbiased
    const std::uint64_t limit = n ? (~std::uint64_t{0} - (~std::uint64_t{0} % n)) : 0;
    std::uint64_t x;
    do x = next();
    while (x >= limit);
    return x % n;
  }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do u1 = uniform();
    while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * normal();
    return m;
  }

  Vector normal_vector(Eigen::Index n, double scale = 1.0) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * normal();
    return v;
  }

  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  static std::uint64_t splitmix(std::uint64_t& x) noexcept {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Derive an independent stream seed from a base seed and a purpose label.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) noexcept {
  return fnv1a(purpose, seed ^ 0x6a09e667f3bcc909ULL);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace vlca
