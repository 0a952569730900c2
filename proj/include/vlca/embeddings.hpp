// SPDX-License-Identifier: Apache-2.0
//
// Word-vector tables (GloVe text format), class-name resolution, and the
// portable prompt-table format shared with the CLIP exporter.
#pragma once

#include "vlca/core.hpp"
#include "vlca/error.hpp"
#include "vlca/io.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace vlca {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Immutable token -> vector map. Vectors live in one contiguous buffer.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(std::string_view token) const { return index_.count(to_lower(token)) != 0; }

  std::span<const double> lookup(std::string_view token) const {
    auto it = index_.find(to_lower(token));
    if (it == index_.end()) throw Error(Errc::TokenNotFound, "token '" + std::string(token) + "' not in table");
    return {values_.data() + it->second * dim_, dim_};
  }

  Vector vector(std::string_view token) const {
    auto s = lookup(token);
    return Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
  }

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// Builder used by the parsers; enforces the table invariants.
  void insert(std::string_view token, std::span<const double> values) {
    if (values.size() != dim_)
      throw Error(Errc::DimensionMismatch, "token '" + std::string(token) + "' has " +
                                               std::to_string(values.size()) + " values, expected " +
                                               std::to_string(dim_));
    if (token.empty() || token.find_first_of(" \t\r\n") != std::string_view::npos)
      throw Error(Errc::MalformedRow, "invalid token '" + std::string(token) + "'");
    auto key = to_lower(token);
    if (!index_.emplace(key, tokens_.size()).second)
      throw Error(Errc::DuplicateToken, "token '" + key + "' appears more than once");
    tokens_.push_back(std::move(key));
    values_.insert(values_.end(), values.begin(), values.end());
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> tokens_;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parse GloVe text: `token v1 ... vd`, single-space separated, one per line.
inline EmbeddingTable parse_glove(std::istream& in) {
  EmbeddingTable table;
  bool first = true;
  std::string line;
  std::vector<double> buf;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view sv(line);
    const auto sp = sv.find(' ');
    if (sp == std::string_view::npos || sp == 0)
      throw Error(Errc::MalformedRow, "line " + std::to_string(lineno) + " has no vector");
    const auto token = sv.substr(0, sp);
    buf.clear();
    std::size_t pos = sp + 1;
    while (pos <= sv.size()) {
      auto next = sv.find(' ', pos);
      if (next == std::string_view::npos) next = sv.size();
      buf.push_back(io::parse_double(sv.substr(pos, next - pos)));
      pos = next + 1;
    }
    if (first) {
      table = EmbeddingTable(buf.size());
      first = false;
    }
    if (buf.size() != table.dim())
      throw Error(Errc::DimensionMismatch, "line " + std::to_string(lineno) + " has " +
                                               std::to_string(buf.size()) + " values, expected " +
                                               std::to_string(table.dim()));
    table.insert(token, buf);
  }
  return table;
}

inline EmbeddingTable parse_glove(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_glove(in);
}

/// How class names map onto table tokens.
struct VocabularyPolicy {
  std::unordered_map<std::string, std::string> synonym_map;
  std::string compound_separator = " _-";

  /// Policy seeded with the two published substitutions.
  static VocabularyPolicy with_default_synonyms() {
    VocabularyPolicy p;
    p.synonym_map = {{"football", "soccer"}, {"flipflop", "slipper"}};
    return p;
  }
};

/// Parse `from=to` lines; `#` starts a comment.
inline std::unordered_map<std::string, std::string> parse_synonym_map(std::string_view text) {
  std::unordered_map<std::string, std::string> out;
  std::size_t lineno = 0;
  for (auto raw : io::split(text, '\n')) {
    ++lineno;
    auto line = raw.substr(0, raw.find('#'));
    line = io::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(Errc::MalformedRow, "synonym line " + std::to_string(lineno) + " lacks '='");
    auto from = to_lower(io::trim(line.substr(0, eq)));
    auto to = to_lower(io::trim(line.substr(eq + 1)));
    if (from.empty() || to.empty())
      throw Error(Errc::MalformedRow, "synonym line " + std::to_string(lineno) + " is incomplete");
    if (!out.emplace(from, to).second) throw Error(Errc::DuplicateName, "synonym for '" + from + "' given twice");
  }
  return out;
}

/// Split a normalized class name into lookup tokens.
inline std::vector<std::string> class_tokens(const VocabularyPolicy& policy, std::string_view class_name) {
  if (class_name.empty()) throw Error(Errc::InvalidArgument, "empty class name");
  auto name = to_lower(class_name);
  if (auto it = policy.synonym_map.find(name); it != policy.synonym_map.end()) name = it->second;
  std::vector<std::string> parts;
  std::string cur;
  for (char c : name) {
    if (policy.compound_separator.find(c) != std::string::npos) {
      if (!cur.empty()) parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(std::move(cur));
  if (parts.empty()) throw Error(Errc::TokenNotFound, "class name '" + std::string(class_name) + "' has no tokens");
  return parts;
}

/// Vector for a class name: synonym substitution, then the element-wise sum
/// of the compound parts.
inline Vector resolve_class(const EmbeddingTable& table, const VocabularyPolicy& policy,
                            std::string_view class_name) {
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(table.dim()));
  for (const auto& tok : class_tokens(policy, class_name)) {
    if (!table.contains(tok))
      throw Error(Errc::TokenNotFound, "'" + tok + "' (from class '" + std::string(class_name) + "') not in table");
    sum += table.vector(tok);
  }
  return sum;
}

/// Throws TokenNotFound for the first synonym target that does not resolve.
inline void check_policy(const EmbeddingTable& table, const VocabularyPolicy& policy) {
  VocabularyPolicy bare;
  bare.compound_separator = policy.compound_separator;
  for (const auto& [from, to] : policy.synonym_map) (void)resolve_class(table, bare, to);
}

/// A named k-vector row of a prompt table.
struct NamedVector {
  std::string name;
  Vector values;

  friend bool operator==(const NamedVector& a, const NamedVector& b) {
    return a.name == b.name && a.values.size() == b.values.size() && a.values == b.values;
  }
};

/// Per-domain style and per-class semantic prompt embeddings.
struct PromptEmbeddings {
  std::size_t k = 0;
  std::vector<NamedVector> style;
  std::vector<NamedVector> semantic;

  friend bool operator==(const PromptEmbeddings&, const PromptEmbeddings&) = default;

  const Vector* find_style(std::string_view name) const { return find(style, name); }
  const Vector* find_semantic(std::string_view name) const { return find(semantic, name); }

  /// Throws on any invariant violation.
  void validate() const {
    if (k == 0) throw Error(Errc::BadHeader, "prompt dimension must be positive");
    check_list(style, "style");
    check_list(semantic, "semantic");
  }

 private:
  static const Vector* find(const std::vector<NamedVector>& list, std::string_view name) {
    for (const auto& nv : list)
      if (nv.name == name) return &nv.values;
    return nullptr;
  }

  void check_list(const std::vector<NamedVector>& list, const char* kind) const {
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& nv = list[i];
      if (nv.name.empty()) throw Error(Errc::MalformedRow, std::string(kind) + " row with empty name");
      if (static_cast<std::size_t>(nv.values.size()) != k)
        throw Error(Errc::DimensionMismatch, std::string(kind) + " '" + nv.name + "' has " +
                                                 std::to_string(nv.values.size()) + " values, expected " +
                                                 std::to_string(k));
      if (!nv.values.allFinite()) throw Error(Errc::MalformedNumber, std::string(kind) + " '" + nv.name + "' is not finite");
      if (nv.values.norm() <= 0.0) throw Error(Errc::ZeroVector, std::string(kind) + " '" + nv.name + "' is the zero vector");
      for (std::size_t j = 0; j < i; ++j)
        if (list[j].name == nv.name) throw Error(Errc::DuplicateName, std::string(kind) + " '" + nv.name + "' repeated");
    }
  }
};

inline constexpr std::string_view kPromptMagic = "#vlca-prompts v1 dim=";

inline PromptEmbeddings read_prompt_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::BadHeader, "empty prompt table");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (!line.starts_with(kPromptMagic)) throw Error(Errc::BadHeader, "expected '" + std::string(kPromptMagic) + "<k>'");
  PromptEmbeddings p;
  try {
    const auto k = io::parse_int(std::string_view(line).substr(kPromptMagic.size()));
    if (k <= 0) throw Error(Errc::BadHeader, "non-positive dim");
    p.k = static_cast<std::size_t>(k);
  } catch (const Error& e) {
    if (e.code() == Errc::BadHeader) throw;
    throw Error(Errc::BadHeader, "malformed dim in header");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = io::split(line, '\t');
    if (fields.size() < 2) throw Error(Errc::MalformedRow, "line " + std::to_string(lineno) + " has too few fields");
    NamedVector nv{std::string(fields[1]), Vector(static_cast<Eigen::Index>(fields.size() - 2))};
    if (fields.size() - 2 != p.k)
      throw Error(Errc::DimensionMismatch, "line " + std::to_string(lineno) + " has " +
                                               std::to_string(fields.size() - 2) + " values, expected " +
                                               std::to_string(p.k));
    for (std::size_t i = 2; i < fields.size(); ++i) nv.values(static_cast<Eigen::Index>(i - 2)) = io::parse_double(fields[i]);
    if (fields[0] == "style")
      p.style.push_back(std::move(nv));
    else if (fields[0] == "semantic")
      p.semantic.push_back(std::move(nv));
    else
      throw Error(Errc::MalformedRow, "line " + std::to_string(lineno) + " has unknown kind '" + std::string(fields[0]) + "'");
  }
  p.validate();
  return p;
}

inline PromptEmbeddings read_prompt_table(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read_prompt_table(in);
}

inline std::string write_prompt_table(const PromptEmbeddings& p) {
  p.validate();
  std::string out(kPromptMagic);
  out += std::to_string(p.k);
  out += '\n';
  auto rows = [&](const std::vector<NamedVector>& list, std::string_view kind) {
    for (const auto& nv : list) {
      out += kind;
      out += '\t';
      out += nv.name;
      for (Eigen::Index i = 0; i < nv.values.size(); ++i) {
        out += '\t';
        out += io::format_double(nv.values(i));
      }
      out += '\n';
    }
  };
  rows(p.style, "style");
  rows(p.semantic, "semantic");
  return out;
}

inline std::string fill_template(std::string_view tmpl, std::string_view value) {
  const auto open = tmpl.find('{');
  const auto close = tmpl.find('}', open);
  if (open == std::string_view::npos || close == std::string_view::npos)
    throw Error(Errc::InvalidArgument, "template '" + std::string(tmpl) + "' has no placeholder");
  std::string out(tmpl.substr(0, open));
  out += value;
  out += tmpl.substr(close + 1);
  return out;
}

/// Deterministic unit vector keyed by a string. Stands in for text-encoder
/// output when no exported prompt table is supplied.
inline Vector pseudo_embedding(std::string_view text, std::size_t dim) {
  Rng rng(fnv1a(text, 0x5f3759df5f3759dfULL));
  Vector v = rng.normal_vector(static_cast<Eigen::Index>(dim));
  return v / v.norm();
}

inline constexpr std::string_view kDefaultStyleTemplate = "The image style is {domain}";
inline constexpr std::string_view kDefaultSemanticTemplate = "An image of {category}";

inline PromptEmbeddings pseudo_prompts(std::span<const std::string> domains, std::span<const std::string> classes,
                                       std::size_t k, std::string_view style_template = kDefaultStyleTemplate,
                                       std::string_view semantic_template = kDefaultSemanticTemplate) {
  PromptEmbeddings p;
  p.k = k;
  for (const auto& d : domains) p.style.push_back({d, pseudo_embedding(fill_template(style_template, d), k)});
  for (const auto& c : classes) p.semantic.push_back({c, pseudo_embedding(fill_template(semantic_template, c), k)});
  p.validate();
  return p;
}

}  // namespace vlca
