// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multi-domain classification data with controllable domain shift.
//
// Class prototypes are shared by every domain. Domain d observes a sample of
// class y as
//
//   core      = A_d (mu_y + noise * eps) + b_d,   A_d = I + strength * R_d
//   nuisance  = strength * (n_d + 0.5 * eps')
//
// with R_d, b_d and n_d drawn once per domain. strength = 0 makes every domain
// identically distributed.
#pragma once

#include "vlca/core.hpp"
#include "vlca/error.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vlca {

inline const std::vector<std::string>& pacs_domains() {
  static const std::vector<std::string> names{"photo", "art_painting", "cartoon", "sketch"};
  return names;
}

inline const std::vector<std::string>& pacs_classes() {
  static const std::vector<std::string> names{"dog", "elephant", "giraffe", "guitar", "horse", "house", "person"};
  return names;
}

struct SynthConfig {
  int num_domains = 4;
  int num_classes = 7;
  int samples_per_class = 40;  // per class, per domain
  int input_dim = 24;          // core + nuisance coordinates
  int nuisance_dim = 6;
  double class_separation = 1.0;
  double noise = 1.0;
  double strength = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::string> domain_names;  // empty -> defaults
  std::vector<std::string> class_names;

  std::vector<std::string> domains() const {
    if (!domain_names.empty()) return domain_names;
    if (num_domains <= static_cast<int>(pacs_domains().size()))
      return {pacs_domains().begin(), pacs_domains().begin() + num_domains};
    std::vector<std::string> out;
    for (int d = 0; d < num_domains; ++d) out.push_back("domain" + std::to_string(d));
    return out;
  }

  std::vector<std::string> classes() const {
    if (!class_names.empty()) return class_names;
    if (num_classes <= static_cast<int>(pacs_classes().size()))
      return {pacs_classes().begin(), pacs_classes().begin() + num_classes};
    std::vector<std::string> out;
    for (int c = 0; c < num_classes; ++c) out.push_back("class" + std::to_string(c));
    return out;
  }

  void validate() const {
    if (num_domains < 2) throw Error(Errc::InvalidConfig, "need at least two domains");
    if (num_classes < 2) throw Error(Errc::InvalidConfig, "need at least two classes");
    if (samples_per_class < 1) throw Error(Errc::InvalidConfig, "samples_per_class must be positive");
    if (nuisance_dim < 0 || input_dim - nuisance_dim < 1) throw Error(Errc::InvalidConfig, "bad input/nuisance dims");
    if (!domain_names.empty() && static_cast<int>(domain_names.size()) != num_domains)
      throw Error(Errc::InvalidConfig, "domain name count does not match num_domains");
    if (!class_names.empty() && static_cast<int>(class_names.size()) != num_classes)
      throw Error(Errc::InvalidConfig, "class name count does not match num_classes");
    if (noise < 0.0 || strength < 0.0 || class_separation <= 0.0)
      throw Error(Errc::InvalidConfig, "noise/strength must be nonnegative, separation positive");
  }
};

/// Labeled samples of one domain. `ids` are unique across all domains.
struct Dataset {
  Matrix x;
  std::vector<int> labels;
  std::vector<int> domains;
  std::vector<std::uint64_t> ids;

  Eigen::Index size() const noexcept { return x.rows(); }
};

inline constexpr std::uint64_t kDomainIdStride = 1'000'000'000ULL;

inline std::vector<Dataset> generate_synth(const SynthConfig& cfg) {
  cfg.validate();
  const int core = cfg.input_dim - cfg.nuisance_dim;
  const int nuis = cfg.nuisance_dim;

  Rng proto_rng(derive_seed(cfg.seed, "synth-prototypes"));
  const Matrix prototypes = proto_rng.normal_matrix(cfg.num_classes, core, cfg.class_separation);

  std::vector<Dataset> out;
  out.reserve(static_cast<std::size_t>(cfg.num_domains));
  for (int d = 0; d < cfg.num_domains; ++d) {
    Rng dom_rng(derive_seed(cfg.seed, "synth-domain-" + std::to_string(d)));
    const Matrix a = Matrix::Identity(core, core) +
                     cfg.strength * dom_rng.normal_matrix(core, core, 1.0 / std::sqrt(static_cast<double>(core)));
    const Vector b = cfg.strength * dom_rng.normal_vector(core);
    const Vector n_d = dom_rng.normal_vector(nuis, 2.0);

    Rng sample_rng(derive_seed(cfg.seed, "synth-samples-" + std::to_string(d)));
    const Eigen::Index rows = static_cast<Eigen::Index>(cfg.num_classes) * cfg.samples_per_class;
    Dataset ds{Matrix(rows, cfg.input_dim), {}, {}, {}};
    Eigen::Index r = 0;
    for (int y = 0; y < cfg.num_classes; ++y) {
      for (int s = 0; s < cfg.samples_per_class; ++s, ++r) {
        const Vector clean = prototypes.row(y).transpose() + sample_rng.normal_vector(core, cfg.noise);
        ds.x.row(r).head(core) = (a * clean + b).transpose();
        if (nuis > 0) ds.x.row(r).tail(nuis) = (cfg.strength * (n_d + sample_rng.normal_vector(nuis, 0.5))).transpose();
        ds.labels.push_back(y);
        ds.domains.push_back(d);
        ds.ids.push_back(static_cast<std::uint64_t>(d) * kDomainIdStride + static_cast<std::uint64_t>(r));
      }
    }
    out.push_back(std::move(ds));
  }
  return out;
}

}  // namespace vlca
