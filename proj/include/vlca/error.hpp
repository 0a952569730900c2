// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vlca {

enum class Errc {
  DimensionMismatch,
  MalformedNumber,
  MalformedRow,
  DuplicateToken,
  DuplicateName,
  TokenNotFound,
  NameNotFound,
  BadHeader,
  ZeroVector,
  LabelOutOfRange,
  ConvergenceFailure,
  NonFiniteLoss,
  EmptyDataset,
  InvalidConfig,
  InvalidArgument,
  Io,
};

constexpr std::string_view to_string(Errc e) noexcept {
  switch (e) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::MalformedNumber: return "MalformedNumber";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::DuplicateToken: return "DuplicateToken";
    case Errc::DuplicateName: return "DuplicateName";
    case Errc::TokenNotFound: return "TokenNotFound";
    case Errc::NameNotFound: return "NameNotFound";
    case Errc::BadHeader: return "BadHeader";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::ConvergenceFailure: return "ConvergenceFailure";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace vlca
