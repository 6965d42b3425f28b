// SPDX-License-Identifier: Apache-2.0
// fc: command-line front end for the connectivity classification pipeline.

#include "fc/config.hpp"
#include "fc/connectivity.hpp"
#include "fc/dataset.hpp"
#include "fc/dimred.hpp"
#include "fc/evaluation.hpp"
#include "fc/models.hpp"
#include "fc/pipeline.hpp"
#include "fc/report.hpp"
#include "fc/tuning.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace fc;

// Optional flags override keys of the --params file.
struct ParamOverrides {
  std::string params_file;
  std::optional<std::string> rfe, sfm, optimizer, stop_rule;
  std::optional<double> lr, c, gamma;
  std::optional<long> neurons, batch, patience, max_epochs;

  void attach(CLI::App* app) {
    app->add_option("--params", params_file, "key = value hyperparameter file");
    app->add_option("--rfe", rfe, "recursive feature elimination target: half | <count>");
    app->add_option("--sfm", sfm, "SelectFromModel threshold: mean | <value>");
    app->add_option("--optimizer", optimizer, "adam | nadam | adagrad");
    app->add_option("--stop-rule", stop_rule, "patience | nondecreasing");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--c", c, "inverse regularization strength");
    app->add_option("--gamma", gamma, "RBF kernel width");
    app->add_option("--neurons", neurons, "hidden units");
    app->add_option("--batch", batch, "mini-batch size");
    app->add_option("--patience", patience, "early stopping patience");
    app->add_option("--max-epochs", max_epochs, "epoch cap");
  }

  ModelParams resolve() const {
    Config cfg = params_file.empty() ? Config{} : Config::load(params_file);
    auto put = [&](const char* key, const auto& v) {
      if (!v) return;
      if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, std::string>) cfg.set(key, *v);
      else cfg.set(key, io::format_double(static_cast<double>(*v)));
    };
    put("rfe", rfe);
    put("sfm", sfm);
    put("optimizer", optimizer);
    put("stop_rule", stop_rule);
    put("learning_rate", lr);
    put("c", c);
    put("gamma", gamma);
    put("neurons", neurons);
    put("batch_size", batch);
    put("patience", patience);
    put("max_epochs", max_epochs);
    auto p = ModelParams::from_config(cfg);
    if (const auto unused = cfg.unused_keys(); !unused.empty()) throw DataError("params: unknown key '" + unused.front() + "'");
    return p;
  }
};

int fail(const std::string& stage, const std::string& what) {
  std::cerr << "fc: [" << stage << "] " << what << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functional-connectivity ASD classification"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::string stage = "cli";

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic labeled cohort");
  std::size_t n_per_class = 50;
  long t = 60, r = 20;
  double effect = 0.8;
  std::string synth_out;
  synth->add_option("--n-per-class", n_per_class)->check(CLI::PositiveNumber);
  synth->add_option("--t", t);
  synth->add_option("--r", r);
  synth->add_option("--effect", effect);
  synth->add_option("--seed", seed);
  synth->add_option("--out", synth_out, "output directory")->required();

  // connectivity
  auto* conn = app.add_subcommand("connectivity", "build the RSFC feature matrix");
  std::string method = "pearson", in_dir, labels_file, conn_out, delimiter = "comma";
  double lambda = 0.1;
  conn->add_option("--method", method)->check(CLI::IsMember({"pearson", "spearman", "partial"}));
  conn->add_option("--lambda", lambda);
  conn->add_option("--in", in_dir, "directory of subject series")->required();
  conn->add_option("--labels", labels_file, "id,label file")->required();
  conn->add_option("--delimiter", delimiter)->check(CLI::IsMember({"comma", "tab"}));
  conn->add_option("--out", conn_out, "feature file")->required();

  // pca
  auto* pca = app.add_subcommand("pca", "fit PCA and write component scores");
  std::optional<long> pca_k;
  std::optional<double> pca_var;
  std::string pca_in, pca_out, pca_model_out;
  auto* k_opt = pca->add_option("--k", pca_k, "component count");
  pca->add_option("--var", pca_var, "explained-variance target")->excludes(k_opt);
  pca->add_option("--in", pca_in)->required();
  pca->add_option("--out", pca_out)->required();
  pca->add_option("--model-out", pca_model_out);

  // tune
  auto* tune = app.add_subcommand("tune", "grid search over optimizer x learning rate x batch size");
  std::string tune_model = "gru", grid_file, tune_features, tune_out, table_file;
  long tune_neurons = 10;
  tune->add_option("--model", tune_model)->check(CLI::IsMember({"lstm", "gru"}));
  tune->add_option("--neurons", tune_neurons);
  tune->add_option("--grid", grid_file, "key = value grid file");
  tune->add_option("--features", tune_features, "feature file");
  tune->add_option("--table", table_file, "score table replacing training (optimizer,learning_rate,batch_size,score)");
  tune->add_option("--seed", seed);
  tune->add_option("--out", tune_out);

  // train
  auto* train_cmd = app.add_subcommand("train", "fit one model");
  std::string train_model, train_features, model_out, trace_out;
  ParamOverrides train_params;
  train_cmd->add_option("--model", train_model)->required()->check(
      CLI::IsMember({"lr", "lsvc", "ksvc", "rfc", "abc", "lstm", "gru"}));
  train_cmd->add_option("--features", train_features)->required();
  train_cmd->add_option("--model-out", model_out)->required();
  train_cmd->add_option("--trace-out", trace_out, "per-epoch loss trace (recurrent models)");
  train_cmd->add_option("--seed", seed);
  train_params.attach(train_cmd);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "repeated CV or replicated hold-out evaluation");
  std::string eval_model, eval_features, eval_out, protocol = "cv", std_conv = "sample";
  std::size_t k = 10, repeats = 10, replicates = 10;
  double test_fraction = 0.2;
  ParamOverrides eval_params;
  eval->add_option("--model", eval_model)->required()->check(
      CLI::IsMember({"lr", "lsvc", "ksvc", "rfc", "abc", "lstm", "gru"}));
  eval->add_option("--features", eval_features)->required();
  eval->add_option("--protocol", protocol)->check(CLI::IsMember({"cv", "split"}));
  eval->add_option("--k", k);
  eval->add_option("--repeats", repeats);
  eval->add_option("--replicates", replicates);
  eval->add_option("--test-fraction", test_fraction);
  eval->add_option("--std", std_conv)->check(CLI::IsMember({"sample", "population"}));
  eval->add_option("--seed", seed);
  eval->add_option("--out", eval_out, "structured report (JSON)");
  eval_params.attach(eval);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "run every stage from a config file");
  std::string config_file;
  pipe->add_option("--config", config_file)->required();

  // report
  auto* rep = app.add_subcommand("report", "render structured reports");
  std::vector<std::string> report_inputs;
  std::string report_format = "table", report_out;
  rep->add_option("--in", report_inputs, "structured report(s); columns are concatenated")->required();
  rep->add_option("--format", report_format)->check(CLI::IsMember({"table", "structured"}));
  rep->add_option("--out", report_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      stage = "synth";
      const auto cohort = generate_synthetic_cohort(n_per_class, t, r, effect, seed);
      save_cohort(cohort, synth_out);
      std::cout << summary(cohort);
    } else if (conn->parsed()) {
      stage = "connectivity";
      const char d = delimiter == "tab" ? '\t' : ',';
      const auto cohort = load_cohort(in_dir, labels_file, d);
      const auto fm = build_feature_matrix(cohort, parse_method(method), ShrinkageConfig{lambda});
      write_features(conn_out, fm);
      std::cout << "features: " << fm.rows() << " x " << fm.cols() << '\n';
    } else if (pca->parsed()) {
      stage = "pca";
      const auto fm = read_features(pca_in);
      const auto target = pca_k ? PcaTarget::components(*pca_k) : PcaTarget::explained(pca_var.value_or(0.8));
      const auto model = fit_pca(fm, target);
      write_features(pca_out, transform(model, fm));
      if (!pca_model_out.empty()) save_pca(pca_model_out, model);
      std::cout << "width " << fm.cols() << " -> " << model.k() << " explained "
                << io::format_fixed(model.explained_ratio.sum(), 4) << '\n';
    } else if (tune->parsed()) {
      stage = "tune";
      TuningResult res;
      if (!table_file.empty()) {
        const auto table = read_score_table(table_file);
        res = grid_search(table_evaluator(table), table.grid, tune_neurons, seed);
      } else {
        if (tune_features.empty()) throw DataError("tune needs --features or --table");
        Config cfg = grid_file.empty() ? Config{} : Config::load(grid_file);
        const auto grid = HyperGrid::from_config(cfg);
        TrainConfig base;
        base.max_epochs = static_cast<int>(cfg.get_int("max_epochs", 100));
        base.patience = static_cast<int>(cfg.get_int("patience", 5));
        if (const auto unused = cfg.unused_keys(); !unused.empty()) throw DataError("grid: unknown key '" + unused.front() + "'");
        const auto fm = read_features(tune_features);
        const auto plan = split_stratified(fm.labels, {0.8, 0.0, 0.2}, derive_seed(seed, 0));
        res = grid_search(recurrent_evaluator(parse_model_kind(tune_model), select_rows(fm.values, plan.train_idx),
                                              select(fm.labels, plan.train_idx), select_rows(fm.values, plan.test_idx),
                                              select(fm.labels, plan.test_idx), base),
                          grid, tune_neurons, seed);
      }
      const auto text = format_tuning_result(res);
      if (tune_out.empty()) std::cout << text;
      else io::write_text(tune_out, text);
    } else if (train_cmd->parsed()) {
      stage = "train";
      const auto params = train_params.resolve();
      const auto fm = read_features(train_features);
      const auto kind = parse_model_kind(train_model);
      const auto clf = fit_classifier(kind, fm.values, fm.labels, params, seed);
      save_classifier(model_out, clf);
      const auto acc = accuracy(confusion(fm.labels, predict(clf, fm.values)));
      std::cout << "training accuracy " << io::format_fixed(100.0 * *acc, 2) << '\n';
      if (const auto* rm = std::get_if<RecurrentModel>(&clf.model)) {
        std::cout << "stopped at epoch " << rm->stop_epoch << '\n';
        if (!trace_out.empty()) io::write_text(trace_out, loss_trace_csv(rm->trace));
      }
    } else if (eval->parsed()) {
      stage = "evaluate";
      const auto params = eval_params.resolve();
      const auto fm = read_features(eval_features);
      const auto kind = parse_model_kind(eval_model);
      const auto conv = std_conv == "sample" ? StdConvention::Sample : StdConvention::Population;
      const auto score = make_score_fn(kind, params);
      const auto run = protocol == "cv" ? repeated_cv(score, fm.values, fm.labels, k, repeats, seed, conv)
                                        : split_replicates(score, fm.values, fm.labels, replicates, seed, test_fraction, conv);
      const std::vector<ReportColumn> cols{{column_name(kind), run.report}};
      if (!eval_out.empty()) emit_report(eval_out, cols, ReportFormat::Structured);
      std::cout << format_report_table(cols);
    } else if (pipe->parsed()) {
      stage = "config";
      const auto cfg = PipelineConfig::from_config(Config::load(config_file));
      stage = "pipeline";
      const auto res = run_pipeline(cfg, &std::cout);
      std::cout << "report: " << res.report_path.string() << '\n';
    } else if (rep->parsed()) {
      stage = "report";
      std::vector<ReportColumn> cols;
      for (const auto& path : report_inputs) {
        auto more = parse_report_json(io::read_text(path));
        cols.insert(cols.end(), more.begin(), more.end());
      }
      const auto text = report_format == "table" ? format_report_table(cols) : format_report_json(cols);
      if (report_out.empty()) std::cout << text;
      else io::write_text(report_out, text);
    }
  } catch (const StageError& e) {
    std::cerr << "fc: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    return fail(stage, e.what());
  }
  return 0;
}
