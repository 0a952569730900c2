// SPDX-License-Identifier: Apache-2.0
//
// Small feature extractor + linear classifier + projection head, with manual
// backpropagation and a versioned little-endian parameter dump.
#pragma once

#include "vlca/core.hpp"
#include "vlca/decouple.hpp"
#include "vlca/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace vlca {

struct ModelDims {
  int input = 24;
  int hidden = 32;
  int feature = 16;
  int classes = 7;
  int prompt = 16;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// x -> F = W2 tanh(W1 x + b1) + b2 -> logits = Wc F + bc; head maps F to
/// prompt space.
struct Model {
  ModelDims dims;
  Matrix w1;  // hidden x input
  Vector b1;
  Matrix w2;  // feature x hidden
  Vector b2;
  Matrix wc;  // classes x feature
  Vector bc;
  ProjectionHead head;

  static Model init(const ModelDims& d, std::uint64_t seed) {
    if (d.input < 1 || d.hidden < 1 || d.feature < 1 || d.classes < 2 || d.prompt < 1)
      throw Error(Errc::InvalidConfig, "invalid model dimensions");
    Rng rng(derive_seed(seed, "model-init"));
    auto glorot = [&](int rows, int cols) {
      const double lim = std::sqrt(6.0 / static_cast<double>(rows + cols));
      Matrix m(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-lim, lim);
      return m;
    };
    Model m;
    m.dims = d;
    m.w1 = glorot(d.hidden, d.input);
    m.b1 = Vector::Zero(d.hidden);
    m.w2 = glorot(d.feature, d.hidden);
    m.b2 = Vector::Zero(d.feature);
    m.wc = glorot(d.classes, d.feature);
    m.bc = Vector::Zero(d.classes);
    m.head = ProjectionHead::make(d.prompt, d.feature, seed);
    return m;
  }

  struct Activations {
    Matrix hidden;    // m x hidden (post-tanh)
    Matrix features;  // m x feature
    Matrix logits;    // m x classes
  };

  Activations forward(const Matrix& x) const {
    if (x.cols() != dims.input) throw Error(Errc::DimensionMismatch, "input width does not match model");
    Activations a;
    a.hidden = ((x * w1.transpose()).rowwise() + b1.transpose()).array().tanh();
    a.features = (a.hidden * w2.transpose()).rowwise() + b2.transpose();
    a.logits = (a.features * wc.transpose()).rowwise() + bc.transpose();
    return a;
  }

  /// First index of the row maximum, so ties go to the lower class.
  std::vector<int> predict(const Matrix& x) const {
    const Matrix logits = forward(x).logits;
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < logits.cols(); ++j)
        if (logits(i, j) > logits(i, best)) best = j;
      out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
  }

  template <class F>
  void for_each_param(F&& f) {
    f(w1); f(b1); f(w2); f(b2); f(wc); f(bc); f(head.w);
  }
  template <class F>
  void for_each_param(F&& f) const {
    f(w1); f(b1); f(w2); f(b2); f(wc); f(bc); f(head.w);
  }

  bool all_finite() const {
    bool ok = true;
    for_each_param([&](const auto& p) { ok = ok && p.allFinite(); });
    return ok;
  }

  friend bool operator==(const Model& a, const Model& b) {
    return a.dims == b.dims && a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2 && a.wc == b.wc &&
           a.bc == b.bc && a.head.w == b.head.w;
  }
};

/// Parameter gradients, same shapes as Model.
struct ModelGrads {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
  Matrix wc;
  Vector bc;
  Matrix head;
};

/// Backpropagate d/d logits, d/d features (direct terms), and d/d head.
inline ModelGrads backward(const Model& model, const Matrix& x, const Model::Activations& act, const Matrix& d_logits,
                           const Matrix& d_features_direct, const Matrix& d_head) {
  ModelGrads g;
  g.wc = d_logits.transpose() * act.features;
  g.bc = d_logits.colwise().sum().transpose();
  Matrix d_feat = d_logits * model.wc;
  if (d_features_direct.size() != 0) d_feat += d_features_direct;
  g.w2 = d_feat.transpose() * act.hidden;
  g.b2 = d_feat.colwise().sum().transpose();
  const Matrix d_pre = (d_feat * model.w2).array() * (1.0 - act.hidden.array().square());
  g.w1 = d_pre.transpose() * x;
  g.b1 = d_pre.colwise().sum().transpose();
  g.head = d_head.size() != 0 ? d_head : Matrix::Zero(model.head.w.rows(), model.head.w.cols());
  return g;
}

/// Plain SGD with decoupled-from-loss L2 weight decay on every parameter:
/// p <- p - lr (g + wd p).
inline void sgd_step(Model& m, const ModelGrads& g, double lr, double weight_decay) {
  auto upd = [&](auto& p, const auto& gp) { p -= lr * (gp + weight_decay * p); };
  upd(m.w1, g.w1);
  upd(m.b1, g.b1);
  upd(m.w2, g.w2);
  upd(m.b2, g.b2);
  upd(m.wc, g.wc);
  upd(m.bc, g.bc);
  upd(m.head.w, g.head);
}

// model.bin layout (little-endian):
//   16 bytes  magic "VLCAMODL" padded with NUL
//   u32       format version
//   u32 x 5   input, hidden, feature, classes, prompt dims
//   u64       parameter count
//   f64 x N   w1, b1, w2, b2, wc, bc, head (each row-major)
inline constexpr std::string_view kModelMagic = "VLCAMODL";
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.append(reinterpret_cast<const char*>(bits.data()), bits.size());
}

template <class T>
T get_le(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error(Errc::Io, "model file truncated");
  std::array<unsigned char, sizeof(T)> bits;
  std::memcpy(bits.data(), in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  pos += sizeof(T);
  return std::bit_cast<T>(bits);
}

}  // namespace detail

inline std::string serialize_model(const Model& m) {
  std::string out(kModelMagic);
  out.resize(16, '\0');
  detail::put_le<std::uint32_t>(out, kModelVersion);
  for (int v : {m.dims.input, m.dims.hidden, m.dims.feature, m.dims.classes, m.dims.prompt})
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  std::uint64_t count = 0;
  m.for_each_param([&](const auto& p) { count += static_cast<std::uint64_t>(p.size()); });
  detail::put_le<std::uint64_t>(out, count);
  m.for_each_param([&](const auto& p) {
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j) detail::put_le<double>(out, p(i, j));
  });
  return out;
}

inline Model deserialize_model(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, kModelMagic.size()) != kModelMagic)
    throw Error(Errc::BadHeader, "not a model file");
  std::size_t pos = 16;
  const auto version = detail::get_le<std::uint32_t>(bytes, pos);
  if (version != kModelVersion) throw Error(Errc::BadHeader, "unsupported model version " + std::to_string(version));
  ModelDims d;
  for (int* f : {&d.input, &d.hidden, &d.feature, &d.classes, &d.prompt})
    *f = static_cast<int>(detail::get_le<std::uint32_t>(bytes, pos));
  Model m = Model::init(d, 0);
  const auto count = detail::get_le<std::uint64_t>(bytes, pos);
  std::uint64_t expected = 0;
  m.for_each_param([&](const auto& p) { expected += static_cast<std::uint64_t>(p.size()); });
  if (count != expected) throw Error(Errc::DimensionMismatch, "parameter count does not match dims");
  m.for_each_param([&](auto& p) {
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j) p(i, j) = detail::get_le<double>(bytes, pos);
  });
  if (pos != bytes.size()) throw Error(Errc::Io, "trailing bytes in model file");
  return m;
}

}  // namespace vlca
