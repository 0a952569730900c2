// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlca/core.hpp"
#include "vlca/error.hpp"

#include <vector>

namespace vlca {

/// Rows of `features` are per-sample feature vectors.
struct FeatureBatch {
  Matrix features;
  std::vector<int> labels;
  std::vector<int> domains;

  Eigen::Index size() const noexcept { return features.rows(); }

  /// `num_classes` / `num_domains` of zero skip the corresponding range check.
  void validate(int num_classes = 0, int num_domains = 0) const {
    const auto m = static_cast<std::size_t>(features.rows());
    if (m == 0) throw Error(Errc::EmptyDataset, "feature batch is empty");
    if (labels.size() != m) throw Error(Errc::DimensionMismatch, "label count does not match feature rows");
    if (!domains.empty() && domains.size() != m)
      throw Error(Errc::DimensionMismatch, "domain count does not match feature rows");
    for (int y : labels)
      if (y < 0 || (num_classes > 0 && y >= num_classes))
        throw Error(Errc::LabelOutOfRange, "label " + std::to_string(y) + " out of range");
    for (int d : domains)
      if (d < 0 || (num_domains > 0 && d >= num_domains))
        throw Error(Errc::LabelOutOfRange, "domain " + std::to_string(d) + " out of range");
  }
};

}  // namespace vlca
