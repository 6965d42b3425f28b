// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/config.hpp"
#include "fc/connectivity.hpp"
#include "fc/dataset.hpp"
#include "fc/dimred.hpp"
#include "fc/evaluation.hpp"
#include "fc/models.hpp"
#include "fc/report.hpp"
#include "fc/tuning.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fc {

/// A failure inside one pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error("[" + stage + "] " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

enum class PcaMode { Off, Count, Variance };
enum class PcaFit { All, Train };
enum class Protocol { Cv, Split };

struct PipelineConfig {
  // ingest
  std::filesystem::path series_dir;
  std::filesystem::path labels_file;
  char delimiter = ',';
  bool synthetic = false;
  std::size_t synth_n_per_class = 50;
  Index synth_t = 60;
  Index synth_r = 20;
  double synth_effect = 0.8;
  // connectivity
  Method method = Method::Pearson;
  ShrinkageConfig shrinkage;
  // pca
  PcaMode pca_mode = PcaMode::Count;
  Index pca_k = 600;
  double pca_variance = 0.8;
  PcaFit pca_fit = PcaFit::All;
  // model
  ModelKind model = ModelKind::Gru;
  ModelParams params;
  // tuning
  bool tune = false;
  HyperGrid grid;
  int tune_max_epochs = 100;
  int tune_patience = 5;
  // evaluation
  Protocol protocol = Protocol::Split;
  std::size_t k = 10;
  std::size_t repeats = 10;
  std::size_t replicates = 10;
  double test_fraction = 0.2;
  StdConvention std_convention = StdConvention::Sample;
  // run
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "fc_out";

  /// Unknown keys are rejected so a misspelt setting cannot silently fall back
  /// to its default. `seed` is mandatory.
  static PipelineConfig from_config(const Config& cfg) {
    PipelineConfig pc;
    if (!cfg.has("seed")) throw DataError("config: 'seed' is required");
    pc.seed = cfg.get_seed("seed", 0);
    pc.synthetic = cfg.get_bool("synthetic", false);
    if (pc.synthetic) {
      pc.synth_n_per_class = static_cast<std::size_t>(cfg.get_int("synth_n_per_class", 50));
      pc.synth_t = cfg.get_int("synth_t", pc.synth_t);
      pc.synth_r = cfg.get_int("synth_r", pc.synth_r);
      pc.synth_effect = cfg.get_double("synth_effect", pc.synth_effect);
    } else {
      auto dir = cfg.get("series_dir");
      auto labels = cfg.get("labels");
      if (!dir || !labels) throw DataError("config: set series_dir and labels, or synthetic = true");
      pc.series_dir = *dir;
      pc.labels_file = *labels;
    }
    const auto delim = cfg.get_or("delimiter", "comma");
    if (delim == "comma") pc.delimiter = ',';
    else if (delim == "tab") pc.delimiter = '\t';
    else throw DataError("config: delimiter must be comma|tab");
    pc.method = parse_method(cfg.get_or("method", "pearson"));
    pc.shrinkage.lambda = cfg.get_double("lambda", pc.shrinkage.lambda);
    const auto pca = cfg.get_or("pca", "count");
    if (pca == "off") pc.pca_mode = PcaMode::Off;
    else if (pca == "count") pc.pca_mode = PcaMode::Count;
    else if (pca == "variance") pc.pca_mode = PcaMode::Variance;
    else throw DataError("config: pca must be off|count|variance");
    pc.pca_k = cfg.get_int("pca_k", pc.pca_k);
    pc.pca_variance = cfg.get_double("pca_variance", pc.pca_variance);
    const auto fit = cfg.get_or("pca_fit", "all");
    if (fit == "all") pc.pca_fit = PcaFit::All;
    else if (fit == "train") pc.pca_fit = PcaFit::Train;
    else throw DataError("config: pca_fit must be all|train");
    pc.model = parse_model_kind(cfg.get_or("model", "gru"));
    pc.params = ModelParams::from_config(cfg);
    pc.tune = cfg.get_bool("tune", false);
    pc.grid = HyperGrid::from_config(cfg);
    pc.tune_max_epochs = static_cast<int>(cfg.get_int("tune_max_epochs", pc.tune_max_epochs));
    pc.tune_patience = static_cast<int>(cfg.get_int("tune_patience", pc.tune_patience));
    const auto proto = cfg.get_or("protocol", is_recurrent(pc.model) ? "split" : "cv");
    if (proto == "cv") pc.protocol = Protocol::Cv;
    else if (proto == "split") pc.protocol = Protocol::Split;
    else throw DataError("config: protocol must be cv|split");
    pc.k = static_cast<std::size_t>(cfg.get_int("k", 10));
    pc.repeats = static_cast<std::size_t>(cfg.get_int("repeats", 10));
    pc.replicates = static_cast<std::size_t>(cfg.get_int("replicates_eval", 10));
    pc.test_fraction = cfg.get_double("test_fraction", pc.test_fraction);
    const auto sd = cfg.get_or("std", "sample");
    if (sd == "sample") pc.std_convention = StdConvention::Sample;
    else if (sd == "population") pc.std_convention = StdConvention::Population;
    else throw DataError("config: std must be sample|population");
    pc.output_dir = cfg.get_or("output_dir", pc.output_dir.string());
    if (pc.tune && !is_recurrent(pc.model)) throw DataError("config: tune = true needs model lstm or gru");
    if (const auto unused = cfg.unused_keys(); !unused.empty()) {
      std::string list;
      for (const auto& k : unused) list += (list.empty() ? "" : ", ") + k;
      throw DataError("config: unknown key(s): " + list);
    }
    return pc;
  }

  /// Every setting the run depends on, including the ones the pipeline
  /// defaults, as `key = value` lines.
  std::string resolved() const {
    std::ostringstream os;
    os << "seed = " << seed << '\n';
    if (synthetic) {
      os << "synthetic = true\nsynth_n_per_class = " << synth_n_per_class << "\nsynth_t = " << synth_t
         << "\nsynth_r = " << synth_r << "\nsynth_effect = " << io::format_double(synth_effect) << '\n';
    } else {
      os << "series_dir = " << series_dir.string() << "\nlabels = " << labels_file.string() << '\n';
    }
    os << "method = " << to_string(method) << '\n';
    os << "lambda = " << io::format_double(shrinkage.lambda) << '\n';
    os << "pca = " << (pca_mode == PcaMode::Off ? "off" : pca_mode == PcaMode::Count ? "count" : "variance") << '\n';
    if (pca_mode == PcaMode::Count) os << "pca_k = " << pca_k << '\n';
    if (pca_mode == PcaMode::Variance) os << "pca_variance = " << io::format_double(pca_variance) << '\n';
    if (pca_mode != PcaMode::Off) os << "pca_fit = " << (pca_fit == PcaFit::All ? "all" : "train") << '\n';
    os << params.describe(model);
    if (tune) {
      os << "tune = true\noptimizers = ";
      for (std::size_t i = 0; i < grid.optimizers.size(); ++i) os << (i ? "," : "") << to_string(grid.optimizers[i]);
      os << "\nlearning_rates = ";
      for (std::size_t i = 0; i < grid.learning_rates.size(); ++i) os << (i ? "," : "") << io::format_double(grid.learning_rates[i]);
      os << "\nbatch_sizes = ";
      for (std::size_t i = 0; i < grid.batch_sizes.size(); ++i) os << (i ? "," : "") << grid.batch_sizes[i];
      os << "\nreplicates = " << grid.replicates << "\ntune_max_epochs = " << tune_max_epochs
         << "\ntune_patience = " << tune_patience << '\n';
    }
    os << "protocol = " << (protocol == Protocol::Cv ? "cv" : "split") << '\n';
    if (protocol == Protocol::Cv) os << "k = " << k << "\nrepeats = " << repeats << '\n';
    else os << "replicates_eval = " << replicates << "\ntest_fraction = " << io::format_double(test_fraction) << '\n';
    os << "std = " << to_string(std_convention) << '\n';
    os << "threshold = 0.5\n";
    return os.str();
  }
};

struct PipelineResult {
  MetricReport report;
  std::vector<std::string> stage_log;
  std::filesystem::path report_path;
};

inline std::string column_name(ModelKind k) {
  auto s = to_string(k);
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

inline PcaTarget pca_target(const PipelineConfig& cfg) {
  return cfg.pca_mode == PcaMode::Count ? PcaTarget::components(cfg.pca_k) : PcaTarget::explained(cfg.pca_variance);
}

/// Stage order: ingest -> connectivity -> pca -> tune -> train -> evaluate
/// -> report. Each stage reads the artifact the previous stage wrote. An
/// `INCOMPLETE` marker in the output directory names the failing stage and
/// is removed only when the run finishes.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  const fs::path marker = out / "INCOMPLETE";
  io::write_text(marker, "stage: starting\n");

  PipelineResult result;
  auto note = [&](const std::string& line) {
    result.stage_log.push_back(line);
    if (log) *log << line << '\n';
  };
  std::string stage;
  auto run_stage = [&](const std::string& name, const std::function<void()>& body) {
    stage = name;
    io::write_text(marker, "stage: " + name + "\n");
    try {
      body();
    } catch (const std::exception& e) {
      io::write_text(marker, "stage: " + name + "\nerror: " + e.what() + "\n");
      throw StageError(name, e.what());
    }
  };

  const fs::path features_path = out / "features.csv";
  const fs::path scores_path = out / "scores.csv";
  const fs::path pca_path = out / "pca_model.txt";

  run_stage("ingest", [&] {
    const Cohort cohort = cfg.synthetic ? generate_synthetic_cohort(cfg.synth_n_per_class, cfg.synth_t, cfg.synth_r,
                                                                    cfg.synth_effect, derive_seed(cfg.seed, 100))
                                        : load_cohort(cfg.series_dir, cfg.labels_file, cfg.delimiter);
    io::write_text(out / "cohort.txt", summary(cohort));
    note("[ingest] subjects=" + std::to_string(cohort.size()) + " time_points=" + std::to_string(cohort.time_points()) +
         " rois=" + std::to_string(cohort.rois()));
    const auto fm = build_feature_matrix(cohort, cfg.method, cfg.shrinkage);
    write_features(features_path, fm);
  });

  FeatureMatrix features;
  run_stage("connectivity", [&] {
    features = read_features(features_path);
    note("[connectivity] method=" + to_string(cfg.method) + " features=" + std::to_string(features.cols()));
  });

  FeatureMatrix model_input;
  run_stage("pca", [&] {
    if (cfg.pca_mode == PcaMode::Off || cfg.pca_fit == PcaFit::Train) {
      model_input = features;
      note(cfg.pca_mode == PcaMode::Off ? "[pca] off width=" + std::to_string(features.cols())
                                        : "[pca] fit per training partition, input width=" +
                                              std::to_string(features.cols()));
      return;
    }
    const auto model = fit_pca(features, pca_target(cfg));
    save_pca(pca_path, model);
    write_features(scores_path, transform(model, features));
    model_input = read_features(scores_path);
    note("[pca] width " + std::to_string(features.cols()) + " -> " + std::to_string(model.k()) +
         " explained=" + io::format_fixed(model.explained_ratio.sum(), 4));
  });

  // Leakage-safe mode refits PCA inside every training partition.
  auto with_pca = [&](ScoreFn inner) -> ScoreFn {
    if (cfg.pca_mode == PcaMode::Off || cfg.pca_fit == PcaFit::All) return inner;
    const auto target = pca_target(cfg);
    return [inner, target](const Matrix& xt, const Labels& yt, const Matrix& xe, std::uint64_t seed) {
      const auto model = fit_pca(xt, target);
      return inner(transform(model, xt), yt, transform(model, xe), seed);
    };
  };

  ModelParams params = cfg.params;
  run_stage("tune", [&] {
    if (!cfg.tune) {
      note("[tune] skipped");
      return;
    }
    const auto plan = split_stratified(model_input.labels, {0.64, 0.16, 0.20}, derive_seed(cfg.seed, 200));
    Matrix x_train = select_rows(model_input.values, plan.train_idx);
    Matrix x_val = select_rows(model_input.values, plan.val_idx);
    if (cfg.pca_mode != PcaMode::Off && cfg.pca_fit == PcaFit::Train) {
      const auto pm = fit_pca(x_train, pca_target(cfg));
      x_train = transform(pm, x_train);
      x_val = transform(pm, x_val);
    }
    TrainConfig base = params.train;
    base.max_epochs = cfg.tune_max_epochs;
    base.patience = cfg.tune_patience;
    const auto res = grid_search(recurrent_evaluator(cfg.model, x_train, select(model_input.labels, plan.train_idx),
                                                     x_val, select(model_input.labels, plan.val_idx), base),
                                 cfg.grid, params.neurons, derive_seed(cfg.seed, 201));
    io::write_text(out / "tuning.csv", format_tuning_result(res));
    const auto& best = res.best().spec;
    params.train.optimizer = best.optimizer;
    params.train.learning_rate = best.learning_rate;
    params.train.batch_size = best.batch_size;
    note("[tune] cells=" + std::to_string(res.cells.size()) + " trainings=" + std::to_string(res.trainings) +
         " best=" + to_string(best.optimizer) + "," + io::format_double(best.learning_rate) + "," +
         std::to_string(best.batch_size) + " score=" + io::format_double(res.best().score));
  });

  run_stage("train", [&] {
    const auto plan = split_stratified(model_input.labels, {1.0 - cfg.test_fraction, 0.0, cfg.test_fraction},
                                       derive_seed(cfg.seed, 300));
    Matrix x_train = select_rows(model_input.values, plan.train_idx);
    if (cfg.pca_mode != PcaMode::Off && cfg.pca_fit == PcaFit::Train) {
      const auto pm = fit_pca(x_train, pca_target(cfg));
      save_pca(pca_path, pm);
      x_train = transform(pm, x_train);
    }
    const auto clf = fit_classifier(cfg.model, x_train, select(model_input.labels, plan.train_idx), params,
                                    derive_seed(cfg.seed, 301));
    save_classifier(out / "model.json", clf);
    note("[train] model=" + to_string(cfg.model) + " train_rows=" + std::to_string(plan.train_idx.size()) +
         " input_width=" + std::to_string(x_train.cols()));
  });

  std::vector<ReportColumn> columns;
  run_stage("evaluate", [&] {
    const auto score = with_pca(make_score_fn(cfg.model, params));
    const auto seed = derive_seed(cfg.seed, 400);
    const auto run = cfg.protocol == Protocol::Cv
                         ? repeated_cv(score, model_input.values, model_input.labels, cfg.k, cfg.repeats, seed,
                                       cfg.std_convention)
                         : split_replicates(score, model_input.values, model_input.labels, cfg.replicates, seed,
                                            cfg.test_fraction, cfg.std_convention);
    result.report = run.report;
    columns.emplace_back(column_name(cfg.model), run.report);
    note("[evaluate] protocol=" + std::string(cfg.protocol == Protocol::Cv ? "cv" : "split") +
         " evaluations=" + std::to_string(run.samples.size()));
  });

  run_stage("report", [&] {
    std::ostringstream header;
    header << "# resolved configuration\n";
    std::istringstream resolved(cfg.resolved());
    std::string line;
    while (std::getline(resolved, line)) header << "#   " << line << '\n';
    header << "# stages\n";
    for (const auto& s : result.stage_log) header << "#   " << s << '\n';
    result.report_path = out / "report.txt";
    emit_report(result.report_path, columns, ReportFormat::Table, header.str());
    emit_report(out / "report.json", columns, ReportFormat::Structured);
  });

  fs::remove(marker);
  return result;
}

}  // namespace fc
