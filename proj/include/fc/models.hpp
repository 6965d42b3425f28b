// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/classical/adaboost.hpp"
#include "fc/classical/forest.hpp"
#include "fc/classical/kernel_svm.hpp"
#include "fc/classical/linear.hpp"
#include "fc/classical/selection.hpp"
#include "fc/config.hpp"
#include "fc/core.hpp"
#include "fc/dataset.hpp"
#include "fc/evaluation.hpp"
#include "fc/recurrent/train.hpp"

#include <json.hpp>

#include <filesystem>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace fc {

enum class ModelKind { LogisticRegression, LinearSvm, KernelSvm, RandomForest, AdaBoost, Lstm, Gru };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::LogisticRegression: return "lr";
    case ModelKind::LinearSvm: return "lsvc";
    case ModelKind::KernelSvm: return "ksvc";
    case ModelKind::RandomForest: return "rfc";
    case ModelKind::AdaBoost: return "abc";
    case ModelKind::Lstm: return "lstm";
    case ModelKind::Gru: return "gru";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  for (auto k : {ModelKind::LogisticRegression, ModelKind::LinearSvm, ModelKind::KernelSvm, ModelKind::RandomForest,
                 ModelKind::AdaBoost, ModelKind::Lstm, ModelKind::Gru}) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown model '" + s + "' (expected lr|lsvc|ksvc|rfc|abc|lstm|gru)");
}

inline bool is_recurrent(ModelKind k) { return k == ModelKind::Lstm || k == ModelKind::Gru; }

/// Every hyperparameter of every model family. Values the source study does
/// not state carry conventional defaults.
struct ModelParams {
  // lr / lsvc / ksvc
  Penalty penalty = Penalty::l2();
  double c = 1.0;
  double gamma = 0.0;  // 0 = 1 / (F * Var(X))
  // rfc
  int n_trees = 2500;
  int max_depth = 5;
  Criterion criterion = Criterion::Gini;
  // abc
  int n_estimators = 500;
  double boost_learning_rate = 0.01;
  // lstm / gru
  Index neurons = 10;
  TrainConfig train;
  double val_fraction = 0.2;
  // feature selection: rfe_target 0 = off, -1 = half; sfm off unless enabled
  long rfe_target = 0;
  bool sfm = false;
  SfmThreshold sfm_threshold = SfmThreshold::mean();

  ModelParams() {
    train.patience = 3;
  }

  static ModelParams from_config(const Config& cfg) {
    ModelParams p;
    const auto pen = cfg.get_or("penalty", "l2");
    if (pen == "l1") p.penalty = Penalty::l1();
    else if (pen == "l2") p.penalty = Penalty::l2();
    else if (pen == "elasticnet") p.penalty = Penalty::elasticnet(cfg.get_double("l1_ratio", 0.5));
    else throw DataError("penalty must be l1|l2|elasticnet");
    if (pen != "elasticnet") cfg.get("l1_ratio");
    p.c = cfg.get_double("c", p.c);
    p.gamma = cfg.get_double("gamma", p.gamma);
    p.n_trees = static_cast<int>(cfg.get_int("n_trees", p.n_trees));
    p.max_depth = static_cast<int>(cfg.get_int("max_depth", p.max_depth));
    p.criterion = parse_criterion(cfg.get_or("criterion", "gini"));
    p.n_estimators = static_cast<int>(cfg.get_int("n_estimators", p.n_estimators));
    p.boost_learning_rate = cfg.get_double("boost_learning_rate", p.boost_learning_rate);
    p.neurons = cfg.get_int("neurons", p.neurons);
    p.train.optimizer = parse_optimizer(cfg.get_or("optimizer", "adam"));
    p.train.learning_rate = cfg.get_double("learning_rate", p.train.learning_rate);
    p.train.batch_size = static_cast<int>(cfg.get_int("batch_size", p.train.batch_size));
    p.train.max_epochs = static_cast<int>(cfg.get_int("max_epochs", p.train.max_epochs));
    p.train.patience = static_cast<int>(cfg.get_int("patience", p.train.patience));
    const auto rule = cfg.get_or("stop_rule", "patience");
    if (rule == "patience") p.train.stop_rule = StopRule::Patience;
    else if (rule == "nondecreasing") p.train.stop_rule = StopRule::NonDecreasing;
    else throw DataError("stop_rule must be patience|nondecreasing");
    p.val_fraction = cfg.get_double("val_fraction", p.val_fraction);
    const auto rfe = cfg.get_or("rfe", "off");
    if (rfe == "off") p.rfe_target = 0;
    else if (rfe == "half") p.rfe_target = -1;
    else p.rfe_target = cfg.get_int("rfe", 0);
    const auto sfm = cfg.get_or("sfm", "off");
    if (sfm == "off") p.sfm = false;
    else if (sfm == "mean") { p.sfm = true; p.sfm_threshold = SfmThreshold::mean(); }
    else { p.sfm = true; p.sfm_threshold = SfmThreshold::fixed(io::parse_double_or_throw(sfm, "sfm")); }
    return p;
  }

  /// Resolved settings relevant to `kind`, as `key = value` lines.
  std::string describe(ModelKind kind) const {
    std::ostringstream os;
    os << "model = " << to_string(kind) << '\n';
    switch (kind) {
      case ModelKind::LogisticRegression:
        os << "penalty = " << to_string(penalty) << '\n';
        if (penalty.kind == Penalty::Kind::ElasticNet) os << "l1_ratio = " << io::format_double(penalty.l1_ratio) << '\n';
        os << "c = " << io::format_double(c) << '\n';
        break;
      case ModelKind::LinearSvm:
        os << "c = " << io::format_double(c) << '\n';
        break;
      case ModelKind::KernelSvm:
        os << "c = " << io::format_double(c) << '\n'
           << "gamma = " << (gamma > 0.0 ? io::format_double(gamma) : std::string("auto(1/(F*var))")) << '\n';
        break;
      case ModelKind::RandomForest:
        os << "n_trees = " << n_trees << "\nmax_depth = " << max_depth << "\ncriterion = " << to_string(criterion)
           << '\n';
        break;
      case ModelKind::AdaBoost:
        os << "n_estimators = " << n_estimators << "\nboost_learning_rate = " << io::format_double(boost_learning_rate)
           << '\n';
        break;
      case ModelKind::Lstm:
      case ModelKind::Gru:
        os << "neurons = " << neurons << "\noptimizer = " << to_string(train.optimizer)
           << "\nlearning_rate = " << io::format_double(train.learning_rate) << "\nbatch_size = " << train.batch_size
           << "\nmax_epochs = " << train.max_epochs << "\npatience = " << train.patience
           << "\nstop_rule = " << (train.stop_rule == StopRule::Patience ? "patience" : "nondecreasing")
           << "\nval_fraction = " << io::format_double(val_fraction)
           << "\ninit = uniform(+-1/sqrt(k)) input, uniform(+-1/sqrt(d)) recurrent+head, zero bias"
           << "\nbeta1 = " << io::format_double(train.constants.beta1)
           << "\nbeta2 = " << io::format_double(train.constants.beta2)
           << "\nepsilon = " << io::format_double(train.constants.epsilon) << '\n';
        break;
    }
    if (rfe_target != 0) os << "rfe = " << (rfe_target < 0 ? std::string("half") : std::to_string(rfe_target)) << '\n';
    if (sfm) {
      os << "sfm = " << (sfm_threshold.use_mean ? std::string("mean") : io::format_double(sfm_threshold.value))
         << '\n';
    }
    return os.str();
  }
};

struct RecurrentModel {
  std::variant<LstmParams, GruParams> params;
  std::vector<EpochRecord> trace;
  int stop_epoch = 0;
};

using FittedModel = std::variant<LinearModel, KernelSvmModel, ForestModel, AdaBoostModel, RecurrentModel>;

/// A fitted model plus the columns it reads (empty = all columns).
struct Classifier {
  ModelKind kind = ModelKind::LogisticRegression;
  std::vector<std::size_t> columns;
  Index input_width = 0;
  FittedModel model;
};

namespace detail {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline Vector logistic_link(const Vector& v, double scale = 1.0) {
  return v.unaryExpr([scale](double z) { return fc::sigmoid(scale * z); });
}

}  // namespace detail

/// P(label = 1). SVM decision values and boosting scores pass through a fixed
/// logistic link, so thresholding at 0.5 equals thresholding the score at 0.
inline Vector predict_proba(const Classifier& clf, const Matrix& x_full) {
  if (x_full.cols() != clf.input_width) {
    throw DataError("predict: expected " + std::to_string(clf.input_width) + " features, got " +
                    std::to_string(x_full.cols()));
  }
  const Matrix x = clf.columns.empty() ? x_full : select_cols(x_full, clf.columns);
  return std::visit(detail::overloaded{
                        [&](const LinearModel& m) { return detail::logistic_link(m.decision(x)); },
                        [&](const KernelSvmModel& m) { return detail::logistic_link(m.decision(x)); },
                        [&](const ForestModel& m) { return m.vote_share(x); },
                        [&](const AdaBoostModel& m) { return detail::logistic_link(m.decision(x), 2.0); },
                        [&](const RecurrentModel& m) {
                          return std::visit([&](const auto& p) { return fc::predict_proba(p, {x}); }, m.params);
                        },
                    },
                    clf.model);
}

inline Labels predict(const Classifier& clf, const Matrix& x, double t = 0.5) { return threshold(predict_proba(clf, x), t); }

namespace detail {

template <RecurrentParams P>
RecurrentModel fit_recurrent(const Matrix& x, const Labels& y, const ModelParams& mp, std::uint64_t seed) {
  SequenceBatch train_set = as_sequences(x, y);
  SequenceBatch val_set;
  const bool can_split = mp.val_fraction > 0.0 && std::count(y.begin(), y.end(), 1) >= 2 &&
                         std::count(y.begin(), y.end(), 0) >= 2;
  if (can_split) {
    const auto plan = split_stratified(y, {1.0 - mp.val_fraction, 0.0, mp.val_fraction}, derive_seed(seed, 0));
    train_set = as_sequences(select_rows(x, plan.train_idx), select(y, plan.train_idx));
    val_set = as_sequences(select_rows(x, plan.test_idx), select(y, plan.test_idx));
  }
  TrainConfig tc = mp.train;
  tc.seed = derive_seed(seed, 2);
  auto result = train(init_params<P>(x.cols(), mp.neurons, derive_seed(seed, 1)), train_set, val_set, tc);
  return RecurrentModel{std::move(result.params), std::move(result.trace), result.stop_epoch};
}

inline FittedModel fit_model(ModelKind kind, const Matrix& x, const Labels& y, const ModelParams& mp,
                             std::uint64_t seed) {
  switch (kind) {
    case ModelKind::LogisticRegression:
      return fit_logistic(x, y, {mp.penalty, mp.c});
    case ModelKind::LinearSvm:
      return fit_linear_svm(x, y, {mp.c, 1e-4, 10000, seed});
    case ModelKind::KernelSvm:
      return fit_kernel_svm(x, y, {mp.c, mp.gamma});
    case ModelKind::RandomForest:
      return fit_random_forest(x, y, {mp.n_trees, mp.max_depth, mp.criterion, seed});
    case ModelKind::AdaBoost:
      return fit_adaboost(x, y, {mp.n_estimators, mp.boost_learning_rate});
    case ModelKind::Lstm:
      return fit_recurrent<LstmParams>(x, y, mp, seed);
    case ModelKind::Gru:
      return fit_recurrent<GruParams>(x, y, mp, seed);
  }
  throw Error("unknown model kind");
}

inline ImportanceFn importance_for(ModelKind kind, const ModelParams& mp, std::uint64_t seed) {
  switch (kind) {
    case ModelKind::LogisticRegression:
    case ModelKind::LinearSvm:
      return [=](const Matrix& x, const Labels& y) -> Vector {
        return std::get<LinearModel>(fit_model(kind, x, y, mp, seed)).weights.cwiseAbs();
      };
    case ModelKind::RandomForest:
      return [=](const Matrix& x, const Labels& y) -> Vector {
        return std::get<ForestModel>(fit_model(kind, x, y, mp, seed)).feature_importance;
      };
    case ModelKind::AdaBoost:
      return [=](const Matrix& x, const Labels& y) -> Vector {
        return std::get<AdaBoostModel>(fit_model(kind, x, y, mp, seed)).feature_importance(x.cols());
      };
    default:
      throw DataError("rfe: model '" + to_string(kind) + "' exposes no feature importance");
  }
}

}  // namespace detail

/// Optional feature selection (RFE, then SelectFromModel with an L2 logistic
/// selector), then the final fit on the retained columns.
inline Classifier fit_classifier(ModelKind kind, const Matrix& x, const Labels& y, const ModelParams& mp,
                                 std::uint64_t seed) {
  Classifier clf;
  clf.kind = kind;
  clf.input_width = x.cols();
  Matrix xs = x;
  std::vector<std::size_t> cols;
  auto compose = [&](const std::vector<std::size_t>& picked) {
    std::vector<std::size_t> next;
    for (auto j : picked) next.push_back(cols.empty() ? j : cols[j]);
    cols = std::move(next);
    xs = select_cols(xs, picked);
  };
  if (mp.rfe_target != 0) {
    const auto target = mp.rfe_target < 0 ? static_cast<std::size_t>(xs.cols() / 2) : static_cast<std::size_t>(mp.rfe_target);
    compose(rfe_select(detail::importance_for(kind, mp, seed), xs, y, target).selected);
  }
  if (mp.sfm) {
    const auto selector = fit_logistic(xs, y, {Penalty::l2(), mp.c});
    compose(select_from_model(selector, mp.sfm_threshold));
  }
  clf.columns = std::move(cols);
  clf.model = detail::fit_model(kind, xs, y, mp, seed);
  return clf;
}

inline ScoreFn make_score_fn(ModelKind kind, const ModelParams& mp) {
  return [kind, mp](const Matrix& xt, const Labels& yt, const Matrix& xe, std::uint64_t seed) {
    return predict_proba(fit_classifier(kind, xt, yt, mp, seed), xe);
  };
}

// ---- serialization -------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline Matrix json_matrix(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<Index>(), j.at("cols").get<Index>());
  const auto& data = j.at("data");
  for (Index i = 0; i < m.rows(); ++i)
    for (Index c = 0; c < m.cols(); ++c) m(i, c) = data.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c)).get<double>();
  return m;
}

template <RecurrentParams P>
nlohmann::json params_json(const P& p) {
  nlohmann::json j;
  for_each_tensor(p, [&](const char* name, const Matrix& t) { j[name] = matrix_json(t); });
  return j;
}

template <RecurrentParams P>
P json_params(const nlohmann::json& j) {
  P p;
  for_each_tensor(p, [&](const char* name, Matrix& t) { t = json_matrix(j.at(name)); });
  check_shapes(p);
  return p;
}

inline nlohmann::json tree_json(const DecisionTree& t) {
  auto nodes = nlohmann::json::array();
  for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.prob1, n.depth});
  return nodes;
}

inline DecisionTree json_tree(const nlohmann::json& j) {
  DecisionTree t;
  for (const auto& n : j) {
    t.nodes.push_back(TreeNode{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                               n.at(4).get<double>(), n.at(5).get<int>()});
  }
  return t;
}

}  // namespace detail

inline nlohmann::json to_json(const Classifier& clf) {
  nlohmann::json j;
  j["kind"] = to_string(clf.kind);
  j["input_width"] = clf.input_width;
  j["columns"] = clf.columns;
  std::visit(detail::overloaded{
                 [&](const LinearModel& m) {
                   j["weights"] = std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size());
                   j["bias"] = m.bias;
                   j["c"] = m.c_reg;
                   j["penalty"] = to_string(m.penalty);
                   j["l1_ratio"] = m.penalty.l1_ratio;
                   j["loss"] = m.loss == LinearLoss::Logistic ? "logistic" : "hinge";
                   j["converged"] = m.diagnostics.converged;
                   j["gradient_norm"] = m.diagnostics.gradient_norm;
                 },
                 [&](const KernelSvmModel& m) {
                   j["support_vectors"] = detail::matrix_json(m.support_vectors);
                   j["dual_coeffs"] = std::vector<double>(m.dual_coeffs.data(), m.dual_coeffs.data() + m.dual_coeffs.size());
                   j["bias"] = m.bias;
                   j["gamma"] = m.gamma;
                   j["c"] = m.c_reg;
                 },
                 [&](const ForestModel& m) {
                   j["n_trees"] = m.n_trees;
                   j["max_depth"] = m.max_depth;
                   j["criterion"] = to_string(m.criterion);
                   j["seed"] = m.seed;
                   auto trees = nlohmann::json::array();
                   for (const auto& t : m.trees) trees.push_back(detail::tree_json(t));
                   j["trees"] = std::move(trees);
                 },
                 [&](const AdaBoostModel& m) {
                   auto stumps = nlohmann::json::array();
                   for (const auto& s : m.stumps) stumps.push_back({s.feature, s.threshold, s.left_label, s.right_label});
                   j["stumps"] = std::move(stumps);
                   j["stage_weights"] = m.stage_weights;
                   j["stage_errors"] = m.stage_errors;
                   j["n_estimators"] = m.n_estimators;
                   j["learning_rate"] = m.learning_rate;
                 },
                 [&](const RecurrentModel& m) {
                   std::visit([&](const auto& p) { j["params"] = detail::params_json(p); }, m.params);
                   j["stop_epoch"] = m.stop_epoch;
                 },
             },
             clf.model);
  return j;
}

inline Classifier classifier_from_json(const nlohmann::json& j) {
  Classifier clf;
  clf.kind = parse_model_kind(j.at("kind").get<std::string>());
  clf.input_width = j.at("input_width").get<Index>();
  clf.columns = j.at("columns").get<std::vector<std::size_t>>();
  auto vec = [](const nlohmann::json& a) {
    const auto v = a.get<std::vector<double>>();
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
  };
  switch (clf.kind) {
    case ModelKind::LogisticRegression:
    case ModelKind::LinearSvm: {
      LinearModel m;
      m.weights = vec(j.at("weights"));
      m.bias = j.at("bias").get<double>();
      m.c_reg = j.at("c").get<double>();
      const auto pen = j.at("penalty").get<std::string>();
      m.penalty = pen == "l1" ? Penalty::l1() : pen == "l2" ? Penalty::l2() : Penalty::elasticnet(j.at("l1_ratio").get<double>());
      m.loss = j.at("loss").get<std::string>() == "logistic" ? LinearLoss::Logistic : LinearLoss::Hinge;
      m.diagnostics.converged = j.at("converged").get<bool>();
      m.diagnostics.gradient_norm = j.at("gradient_norm").get<double>();
      clf.model = std::move(m);
      break;
    }
    case ModelKind::KernelSvm: {
      KernelSvmModel m;
      m.support_vectors = detail::json_matrix(j.at("support_vectors"));
      m.dual_coeffs = vec(j.at("dual_coeffs"));
      m.bias = j.at("bias").get<double>();
      m.gamma = j.at("gamma").get<double>();
      m.c_reg = j.at("c").get<double>();
      clf.model = std::move(m);
      break;
    }
    case ModelKind::RandomForest: {
      ForestModel m;
      m.n_trees = j.at("n_trees").get<int>();
      m.max_depth = j.at("max_depth").get<int>();
      m.criterion = parse_criterion(j.at("criterion").get<std::string>());
      m.seed = j.at("seed").get<std::uint64_t>();
      for (const auto& t : j.at("trees")) m.trees.push_back(detail::json_tree(t));
      clf.model = std::move(m);
      break;
    }
    case ModelKind::AdaBoost: {
      AdaBoostModel m;
      for (const auto& s : j.at("stumps")) {
        m.stumps.push_back(Stump{s.at(0).get<Index>(), s.at(1).get<double>(), s.at(2).get<int>(), s.at(3).get<int>()});
      }
      m.stage_weights = j.at("stage_weights").get<std::vector<double>>();
      m.stage_errors = j.at("stage_errors").get<std::vector<double>>();
      m.n_estimators = j.at("n_estimators").get<int>();
      m.learning_rate = j.at("learning_rate").get<double>();
      clf.model = std::move(m);
      break;
    }
    case ModelKind::Lstm:
      clf.model = RecurrentModel{detail::json_params<LstmParams>(j.at("params")), {}, j.at("stop_epoch").get<int>()};
      break;
    case ModelKind::Gru:
      clf.model = RecurrentModel{detail::json_params<GruParams>(j.at("params")), {}, j.at("stop_epoch").get<int>()};
      break;
  }
  return clf;
}

inline void save_classifier(const std::filesystem::path& path, const Classifier& clf) {
  io::write_text(path, to_json(clf).dump() + "\n");
}

inline Classifier load_classifier(const std::filesystem::path& path) {
  return classifier_from_json(nlohmann::json::parse(io::read_text(path)));
}

}  // namespace fc
