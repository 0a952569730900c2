// SPDX-License-Identifier: Apache-2.0
//
// vlca: command-line front end.
//
// Exit codes: 0 success, 1 runtime/domain error, 2 usage error.

#include <CLI11.hpp>

#include "vlca/vlca.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

vlca::EmbeddingTable load_glove(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw vlca::Error(vlca::Errc::Io, "cannot open " + path);
  return vlca::parse_glove(in);
}

int cmd_semdist(const std::string& glove, const std::string& classes_arg, const std::string& synonyms,
                const std::string& out) {
  const auto classes = vlca::split_list(classes_arg);
  if (classes.empty()) throw vlca::Error(vlca::Errc::InvalidArgument, "--classes is empty");
  auto policy = vlca::VocabularyPolicy::with_default_synonyms();
  if (!synonyms.empty())
    for (auto& [from, to] : vlca::parse_synonym_map(vlca::io::read_file(synonyms))) policy.synonym_map[from] = to;
  const auto table = load_glove(glove);
  std::vector<vlca::Vector> vecs;
  for (const auto& c : classes) vecs.push_back(vlca::resolve_class(table, policy, c));
  const auto dist = vlca::build_distribution(vlca::build_similarity(vecs));

  std::string csv;
  for (std::size_t i = 0; i < classes.size(); ++i) csv += (i ? "," : "") + vlca::io::csv_field(classes[i]);
  csv += '\n';
  for (Eigen::Index r = 0; r < dist.p.rows(); ++r) {
    for (Eigen::Index c = 0; c < dist.p.cols(); ++c) csv += (c ? "," : "") + vlca::io::format_double(dist.p(r, c));
    csv += '\n';
  }
  vlca::io::write_file_atomic(out, csv);
  return 0;
}

// Numeric CSV rows; a non-numeric first line is taken as a header.
std::vector<std::vector<double>> read_numeric_csv(const std::string& path) {
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 0;
  const std::string text = vlca::io::read_file(path);
  for (auto raw : vlca::io::split(text, '\n')) {
    ++lineno;
    auto line = vlca::io::trim(raw);
    if (line.empty()) continue;
    std::vector<double> row;
    try {
      for (auto f : vlca::io::split(line, ',')) row.push_back(vlca::io::parse_double(vlca::io::trim(f)));
    } catch (const vlca::Error&) {
      if (rows.empty() && lineno == 1) continue;
      throw;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_svd_analyze(const std::string& features_path, const std::string& labels_path, const std::string& out) {
  const auto feat_rows = read_numeric_csv(features_path);
  const auto label_rows = read_numeric_csv(labels_path);
  std::vector<int> labels;
  for (const auto& r : label_rows)
    for (double v : r) {
      if (v != std::floor(v) || v < 0) throw vlca::Error(vlca::Errc::LabelOutOfRange, "labels must be nonnegative integers");
      labels.push_back(static_cast<int>(v));
    }
  if (feat_rows.empty()) throw vlca::Error(vlca::Errc::EmptyDataset, "no feature rows");
  if (labels.size() != feat_rows.size())
    throw vlca::Error(vlca::Errc::DimensionMismatch, std::to_string(feat_rows.size()) + " feature rows but " +
                                                         std::to_string(labels.size()) + " labels");
  vlca::FeatureBatch batch;
  batch.features.resize(static_cast<Eigen::Index>(feat_rows.size()), static_cast<Eigen::Index>(feat_rows[0].size()));
  for (std::size_t i = 0; i < feat_rows.size(); ++i) {
    if (feat_rows[i].size() != feat_rows[0].size())
      throw vlca::Error(vlca::Errc::DimensionMismatch, "feature row " + std::to_string(i + 1) + " has a different width");
    for (std::size_t j = 0; j < feat_rows[i].size(); ++j)
      batch.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = feat_rows[i][j];
  }
  batch.labels = labels;

  const auto groups = vlca::group_by_label(batch);
  Eigen::Index widest = 0;
  for (const auto& g : groups) widest = std::max(widest, std::min(g.matrix.rows(), g.matrix.cols()));
  std::string csv = "class,rows,numerical_rank,surrogate";
  for (Eigen::Index i = 0; i < widest; ++i) csv += ",sigma_" + std::to_string(i + 1);
  csv += '\n';
  for (const auto& g : groups) {
    const auto f = vlca::svd(g.matrix);
    const auto s = vlca::rank_surrogate(g.matrix);
    csv += std::to_string(g.label) + ',' + std::to_string(g.rows.size()) + ',' +
           std::to_string(vlca::numerical_rank(f.sigma)) + ',' + vlca::io::format_double(s.value);
    for (Eigen::Index i = 0; i < widest; ++i) {
      csv += ',';
      if (i < f.sigma.size()) csv += vlca::io::format_double(f.sigma(i));
    }
    csv += '\n';
  }
  if (out.empty())
    std::cout << csv;
  else
    vlca::io::write_file_atomic(out, csv);
  return 0;
}

vlca::RunConfig config_from(const std::string& path, const std::optional<std::uint64_t>& seed) {
  vlca::RunConfig cfg = path.empty() ? vlca::RunConfig{} : vlca::load_run_config(path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, const std::optional<std::uint64_t>& seed) {
  const auto cfg = config_from(config_path, seed);
  const auto exp = vlca::prepare_experiment(cfg);
  if (!exp.real_word_vectors)
    std::cerr << "note: no semantic.glove configured; using pseudo word vectors for class semantics\n";
  const auto run = vlca::run_experiment(cfg, exp);
  fs::create_directories(out_dir);
  vlca::io::write_file_atomic(fs::path(out_dir) / "metrics.csv", vlca::metrics_csv(run.result));
  vlca::io::write_file_atomic(fs::path(out_dir) / "model.bin", vlca::serialize_model(run.model));
  const auto& last = run.result.epochs.back();
  std::cout << "epochs=" << last.epoch << " total=" << vlca::io::format_double(last.total)
            << " src_acc=" << vlca::io::format_double(last.src_acc)
            << " lodo_acc=" << vlca::io::format_double(last.lodo_acc) << " held_out=" << exp.domain_names[exp.held_out]
            << '\n';
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& domain, const std::string& config_path,
             const std::optional<std::uint64_t>& seed) {
  const auto model = vlca::deserialize_model(vlca::io::read_file(model_path));
  auto cfg = config_from(config_path, seed);
  const auto synth = vlca::effective_synth(cfg);
  const auto names = synth.domains();
  const auto idx = vlca::domain_index(names, domain);
  if (model.dims.input != synth.input_dim || model.dims.classes != synth.num_classes)
    throw vlca::Error(vlca::Errc::DimensionMismatch, "model does not match the configured synthetic task");
  const auto data = vlca::generate_synth(synth);
  std::cout << "domain,accuracy\n" << vlca::io::csv_field(domain) << ','
            << vlca::io::format_double(vlca::evaluate_lodo(model, data[idx])) << '\n';
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, int instances) {
  std::map<std::string, vlca::GradCheckReport> worst;
  std::vector<std::string> order;
  for (int i = 0; i < instances; ++i) {
    for (auto& r : vlca::run_gradient_suite(seed + static_cast<std::uint64_t>(i))) {
      auto it = worst.find(r.name);
      if (it == worst.end()) {
        order.push_back(r.name);
        worst.emplace(r.name, r);
      } else if (!r.skipped && (it->second.skipped || r.max_rel_error > it->second.max_rel_error)) {
        it->second = r;
      }
    }
  }
  bool ok = true;
  std::cout << "loss,max_rel_error,threshold,status\n";
  for (const auto& name : order) {
    const auto& r = worst.at(name);
    ok = ok && r.passed();
    std::cout << name << ',' << vlca::io::format_double(r.max_rel_error) << ',' << vlca::io::format_double(r.threshold)
              << ',' << (r.skipped ? "skipped" : r.passed() ? "pass" : "FAIL") << '\n';
  }
  return ok ? 0 : kExitRuntime;
}

int cmd_prompts_validate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw vlca::Error(vlca::Errc::Io, "cannot open " + path);
  const auto p = vlca::read_prompt_table(in);
  std::cout << "ok dim=" << p.k << " style=" << p.style.size() << " semantic=" << p.semantic.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vlca: semantic-supervision losses for domain generalization"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string glove, classes, synonyms, out;
  auto* semdist = app.add_subcommand("semdist", "Write the interclass semantic distribution as CSV");
  semdist->add_option("--glove", glove, "GloVe-format word vectors")->required();
  semdist->add_option("--classes", classes, "Comma-separated class names")->required();
  semdist->add_option("--synonyms", synonyms, "Synonym map (from=to per line)");
  semdist->add_option("--out", out, "Output CSV")->required();

  std::string features, labels, svd_out;
  auto* svd_cmd = app.add_subcommand("svd-analyze", "Per-class singular value spectra and rank surrogate");
  svd_cmd->add_option("--features", features, "Feature matrix CSV (one row per sample)")->required();
  svd_cmd->add_option("--labels", labels, "Class label per row")->required();
  svd_cmd->add_option("--out", svd_out, "Write CSV here instead of standard output");

  std::string config, out_dir;
  std::optional<std::uint64_t> train_seed;
  auto* train = app.add_subcommand("train", "Leave-one-domain-out training on synthetic domains");
  train->add_option("--config", config, "key=value config file")->required();
  train->add_option("--out", out_dir, "Output directory for metrics.csv and model.bin")->required();
  train->add_option("--seed", train_seed, "Override the config seed");

  std::string model_path, domain, eval_config;
  std::optional<std::uint64_t> eval_seed;
  auto* eval = app.add_subcommand("eval", "Accuracy of a saved model on one synthetic domain");
  eval->add_option("--model", model_path, "model.bin")->required();
  eval->add_option("--domain", domain, "Domain name")->required();
  eval->add_option("--config", eval_config, "Config the model was trained with (defaults if omitted)");
  eval->add_option("--seed", eval_seed, "Override the config seed");

  std::uint64_t gc_seed = 0;
  int gc_instances = 1;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  gradcheck->add_option("--seed", gc_seed, "Instance seed");
  gradcheck->add_option("--instances", gc_instances, "Number of consecutive seeds")->check(CLI::PositiveNumber);

  std::string prompts_file;
  auto* prompts = app.add_subcommand("prompts", "Prompt-table utilities");
  prompts->require_subcommand(1);
  auto* validate = prompts->add_subcommand("validate", "Parse and check a prompt table");
  validate->add_option("file", prompts_file, "Prompt table")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*semdist) return cmd_semdist(glove, classes, synonyms, out);
    if (*svd_cmd) return cmd_svd_analyze(features, labels, svd_out);
    if (*train) return cmd_train(config, out_dir, train_seed);
    if (*eval) return cmd_eval(model_path, domain, eval_config, eval_seed);
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_instances);
    if (*validate) return cmd_prompts_validate(prompts_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
