// SPDX-License-Identifier: Apache-2.0
//
// Plain-text key=value run configuration and the glue that turns it into
// data, prompts, a semantic distribution, and a trained model.
#pragma once

#include "vlca/embeddings.hpp"
#include "vlca/io.hpp"
#include "vlca/semantics.hpp"
#include "vlca/synth.hpp"
#include "vlca/trainer.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace vlca {

struct RunConfig {
  std::uint64_t seed = 0;
  SynthConfig synth;
  int hidden_dim = 32;
  int feature_dim = 16;
  TrainConfig train;
  std::string held_out;  // domain name; empty -> last domain

  std::string prompts_file;  // empty -> pseudo prompts
  int prompts_dim = 16;
  std::string style_template{kDefaultStyleTemplate};
  std::string semantic_template{kDefaultSemanticTemplate};

  std::string glove_file;  // empty -> pseudo word vectors
  std::string synonyms_file;
  int pseudo_word_dim = 50;
};

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  for (auto part : io::split(s, ',')) {
    auto t = io::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

/// Apply one key=value setting. Unknown keys are rejected.
inline void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
  auto as_int = [&] { return static_cast<int>(io::parse_int(value)); };
  auto as_double = [&] { return io::parse_double(value); };
  const std::map<std::string_view, std::function<void()>> setters{
      {"seed", [&] { c.seed = static_cast<std::uint64_t>(io::parse_int(value)); }},
      {"synth.num_domains", [&] { c.synth.num_domains = as_int(); }},
      {"synth.num_classes", [&] { c.synth.num_classes = as_int(); }},
      {"synth.samples_per_class", [&] { c.synth.samples_per_class = as_int(); }},
      {"synth.input_dim", [&] { c.synth.input_dim = as_int(); }},
      {"synth.nuisance_dim", [&] { c.synth.nuisance_dim = as_int(); }},
      {"synth.class_separation", [&] { c.synth.class_separation = as_double(); }},
      {"synth.noise", [&] { c.synth.noise = as_double(); }},
      {"synth.strength", [&] { c.synth.strength = as_double(); }},
      {"synth.domains", [&] { c.synth.domain_names = split_list(value); }},
      {"synth.classes", [&] { c.synth.class_names = split_list(value); }},
      {"model.hidden_dim", [&] { c.hidden_dim = as_int(); }},
      {"model.feature_dim", [&] { c.feature_dim = as_int(); }},
      {"train.epochs", [&] { c.train.epochs = as_int(); }},
      {"train.batch_size", [&] { c.train.batch_size = as_int(); }},
      {"train.lr", [&] { c.train.lr = as_double(); }},
      {"train.lr_decay", [&] { c.train.lr_decay = as_double(); }},
      {"train.lr_decay_every", [&] { c.train.lr_decay_every = as_int(); }},
      {"train.weight_decay", [&] { c.train.weight_decay = as_double(); }},
      {"train.val_fraction", [&] { c.train.val_fraction = as_double(); }},
      {"train.held_out", [&] { c.held_out = std::string(value); }},
      {"loss.alpha", [&] { c.train.weights.alpha = as_double(); }},
      {"loss.beta", [&] { c.train.weights.beta = as_double(); }},
      {"decouple.style_mode", [&] { c.train.style_mode = parse_style_mode(value); }},
      {"prompts.file", [&] { c.prompts_file = std::string(value); }},
      {"prompts.dim", [&] { c.prompts_dim = as_int(); }},
      {"prompts.style_template", [&] { c.style_template = std::string(value); }},
      {"prompts.semantic_template", [&] { c.semantic_template = std::string(value); }},
      {"semantic.glove", [&] { c.glove_file = std::string(value); }},
      {"semantic.synonyms", [&] { c.synonyms_file = std::string(value); }},
      {"semantic.pseudo_dim", [&] { c.pseudo_word_dim = as_int(); }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw Error(Errc::InvalidConfig, "unknown config key '" + std::string(key) + "'");
  try {
    it->second();
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidConfig) throw;
    throw Error(Errc::InvalidConfig, "bad value for '" + std::string(key) + "': " + e.what());
  }
}

/// Parse `key=value` lines; `#` starts a comment. Relative file paths are
/// resolved against `base_dir`.
inline RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {}) {
  RunConfig c;
  std::size_t lineno = 0;
  for (auto raw : io::split(text, '\n')) {
    ++lineno;
    auto line = io::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(Errc::InvalidConfig, "config line " + std::to_string(lineno) + " lacks '='");
    apply_setting(c, io::trim(line.substr(0, eq)), io::trim(line.substr(eq + 1)));
  }
  for (auto* path : {&c.prompts_file, &c.glove_file, &c.synonyms_file})
    if (!path->empty() && std::filesystem::path(*path).is_relative() && !base_dir.empty())
      *path = (base_dir / *path).string();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& file) {
  return parse_run_config(io::read_file(file), file.parent_path());
}

/// Everything train() needs, derived from a RunConfig.
struct Experiment {
  std::vector<Dataset> data;
  std::vector<std::string> domain_names;
  std::vector<std::string> class_names;
  PromptEmbeddings prompts;
  PromptBinding binding;
  SemanticDistribution dist;
  std::size_t held_out = 0;
  bool real_word_vectors = false;
};

inline SynthConfig effective_synth(const RunConfig& c) {
  SynthConfig s = c.synth;
  s.seed = derive_seed(c.seed, "synth");
  return s;
}

inline std::size_t domain_index(const std::vector<std::string>& names, std::string_view name) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw Error(Errc::NameNotFound, "no domain named '" + std::string(name) + "'");
}

inline SemanticDistribution semantic_distribution_for(const RunConfig& c, const std::vector<std::string>& classes,
                                                      bool* real = nullptr) {
  std::vector<Vector> vecs;
  if (!c.glove_file.empty()) {
    std::ifstream in(c.glove_file);
    if (!in) throw Error(Errc::Io, "cannot open " + c.glove_file);
    const auto table = parse_glove(in);
    auto policy = VocabularyPolicy::with_default_synonyms();
    if (!c.synonyms_file.empty()) {
      for (auto& [from, to] : parse_synonym_map(io::read_file(c.synonyms_file))) policy.synonym_map[from] = to;
    }
    for (const auto& name : classes) vecs.push_back(resolve_class(table, policy, name));
    if (real) *real = true;
  } else {
    for (const auto& name : classes) vecs.push_back(pseudo_embedding(name, static_cast<std::size_t>(c.pseudo_word_dim)));
    if (real) *real = false;
  }
  return build_distribution(build_similarity(vecs));
}

inline Experiment prepare_experiment(const RunConfig& c) {
  Experiment e;
  const auto synth = effective_synth(c);
  e.data = generate_synth(synth);
  e.domain_names = synth.domains();
  e.class_names = synth.classes();
  e.held_out = c.held_out.empty() ? e.domain_names.size() - 1 : domain_index(e.domain_names, c.held_out);
  if (!c.prompts_file.empty()) {
    std::ifstream in(c.prompts_file);
    if (!in) throw Error(Errc::Io, "cannot open " + c.prompts_file);
    e.prompts = read_prompt_table(in);
  } else {
    e.prompts = pseudo_prompts(e.domain_names, e.class_names, static_cast<std::size_t>(c.prompts_dim), c.style_template,
                               c.semantic_template);
  }
  // the held-out domain never reaches the loss, so its prompt is optional
  std::vector<std::string> bound_domains = e.domain_names;
  if (!e.prompts.find_style(bound_domains[e.held_out])) {
    e.prompts.style.push_back({bound_domains[e.held_out], Vector::Ones(static_cast<Eigen::Index>(e.prompts.k))});
  }
  e.binding = bind_prompts(e.prompts, bound_domains, e.class_names);
  e.dist = semantic_distribution_for(c, e.class_names, &e.real_word_vectors);
  return e;
}

inline ModelDims model_dims(const RunConfig& c, const Experiment& e) {
  return {c.synth.input_dim, c.hidden_dim, c.feature_dim, static_cast<int>(e.class_names.size()),
          static_cast<int>(e.prompts.k)};
}

struct RunOutput {
  Model model;
  TrainResult result;
};

inline RunOutput run_experiment(const RunConfig& c, const Experiment& e) {
  RunOutput out{Model::init(model_dims(c, e), derive_seed(c.seed, "model")), {}};
  TrainConfig tc = c.train;
  tc.seed = derive_seed(c.seed, "train");
  out.result = train(out.model, e.data, e.held_out, tc, e.binding, e.dist);
  return out;
}

inline constexpr std::string_view kMetricsHeader = "epoch,l_cls,l_decouple,l_semantic,l_approx,total,src_acc,lodo_acc";

inline std::string metrics_csv(const TrainResult& r) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& e : r.epochs) {
    out += std::to_string(e.epoch);
    for (double v : {e.l_cls, e.l_decouple, e.l_semantic, e.l_approx, e.total, e.src_acc, e.lodo_acc}) {
      out += ',';
      out += io::format_double(v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace vlca
