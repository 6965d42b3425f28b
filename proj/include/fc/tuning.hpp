// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/evaluation.hpp"
#include "fc/io.hpp"
#include "fc/models.hpp"
#include "fc/recurrent/train.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace fc {

struct HyperGrid {
  std::vector<OptimizerKind> optimizers{OptimizerKind::Adam, OptimizerKind::Nadam, OptimizerKind::Adagrad};
  std::vector<double> learning_rates{0.01, 0.005, 0.001, 0.0005, 0.0001};
  std::vector<int> batch_sizes{4, 8, 16, 32};
  std::vector<Index> neurons{10, 30, 50, 100, 150, 200, 250};
  int replicates = 3;

  std::size_t cell_count() const { return optimizers.size() * learning_rates.size() * batch_sizes.size(); }

  void validate() const {
    if (optimizers.empty() || learning_rates.empty() || batch_sizes.empty() || neurons.empty()) {
      throw DataError("grid: every axis needs at least one value");
    }
    if (replicates < 1) throw DataError("grid: replicates must be >= 1");
  }

  /// Keys: optimizers, learning_rates, batch_sizes, neurons, replicates.
  static HyperGrid from_config(const Config& cfg) {
    HyperGrid g;
    if (cfg.has("optimizers")) {
      g.optimizers.clear();
      for (const auto& s : cfg.get_list("optimizers")) g.optimizers.push_back(parse_optimizer(s));
    }
    if (cfg.has("learning_rates")) {
      g.learning_rates.clear();
      for (const auto& s : cfg.get_list("learning_rates")) g.learning_rates.push_back(io::parse_double_or_throw(s, "learning_rates"));
    }
    if (cfg.has("batch_sizes")) {
      g.batch_sizes.clear();
      for (const auto& s : cfg.get_list("batch_sizes")) g.batch_sizes.push_back(static_cast<int>(io::parse_double_or_throw(s, "batch_sizes")));
    }
    if (cfg.has("neurons_grid")) {
      g.neurons.clear();
      for (const auto& s : cfg.get_list("neurons_grid")) g.neurons.push_back(static_cast<Index>(io::parse_double_or_throw(s, "neurons_grid")));
    }
    g.replicates = static_cast<int>(cfg.get_int("replicates", g.replicates));
    g.validate();
    return g;
  }
};

struct CellSpec {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 0.01;
  int batch_size = 32;
  Index neurons = 10;
};

struct CellResult {
  CellSpec spec;
  std::vector<double> replicate_scores;
  double score = 0.0;  // replicate mean
};

struct TuningResult {
  std::vector<CellResult> cells;  // grid order
  std::size_t best_index = 0;
  std::vector<std::string> log;  // one line per replicate training
  std::size_t trainings = 0;

  const CellResult& best() const { return cells.at(best_index); }
};

/// Validation accuracy of one replicate training of one cell.
using CellEvaluator = std::function<double(const CellSpec&, int replicate, std::uint64_t seed)>;

/// Exhaustive sweep: optimizer -> learning rate -> batch size -> replicate.
/// A replicate that diverges scores 0 and is logged; the sweep continues.
/// The best cell is the first maximum in grid order.
inline TuningResult grid_search(const CellEvaluator& evaluate, const HyperGrid& grid, Index neurons,
                                std::uint64_t seed) {
  grid.validate();
  TuningResult res;
  std::uint64_t cell_no = 0;
  for (auto opt : grid.optimizers) {
    for (double lr : grid.learning_rates) {
      for (int batch : grid.batch_sizes) {
        CellResult cell{{opt, lr, batch, neurons}, {}, 0.0};
        const auto cell_seed = derive_seed(seed, cell_no++);
        for (int r = 0; r < grid.replicates; ++r) {
          double score = 0.0;
          std::ostringstream line;
          line << to_string(opt) << ',' << io::format_double(lr) << ',' << batch << ",replicate " << r << ": ";
          try {
            score = evaluate(cell.spec, r, derive_seed(cell_seed, static_cast<std::uint64_t>(r)));
            line << io::format_double(score);
          } catch (const NumericalError& e) {
            line << "0 (" << e.what() << ')';
          }
          ++res.trainings;
          res.log.push_back(line.str());
          cell.replicate_scores.push_back(score);
        }
        double sum = 0.0;
        for (double s : cell.replicate_scores) sum += s;
        cell.score = sum / static_cast<double>(cell.replicate_scores.size());
        if (res.cells.empty() || cell.score > res.cells[res.best_index].score) res.best_index = res.cells.size();
        res.cells.push_back(std::move(cell));
      }
    }
  }
  return res;
}

/// Trains a recurrent model per replicate on `train_set` and scores accuracy on `val`.
inline CellEvaluator recurrent_evaluator(ModelKind kind, const Matrix& x_train, const Labels& y_train,
                                         const Matrix& x_val, const Labels& y_val, TrainConfig base) {
  if (!is_recurrent(kind)) throw DataError("tuning: model must be lstm or gru");
  return [=](const CellSpec& spec, int, std::uint64_t seed) {
    TrainConfig tc = base;
    tc.optimizer = spec.optimizer;
    tc.learning_rate = spec.learning_rate;
    tc.batch_size = spec.batch_size;
    tc.seed = derive_seed(seed, 2);
    const auto train_set = as_sequences(x_train, y_train);
    const auto val_set = as_sequences(x_val, y_val);
    Vector probs;
    if (kind == ModelKind::Lstm) {
      auto r = train(init_params<LstmParams>(x_train.cols(), spec.neurons, derive_seed(seed, 1)), train_set, val_set, tc);
      probs = predict_proba(r.params, val_set.steps);
    } else {
      auto r = train(init_params<GruParams>(x_train.cols(), spec.neurons, derive_seed(seed, 1)), train_set, val_set, tc);
      probs = predict_proba(r.params, val_set.steps);
    }
    return *accuracy(confusion(y_val, threshold(probs)));
  };
}

// ---- appendix-style score tables ------------------------------------------

/// A grid of recorded cell scores with header optimizer,learning_rate,batch_size,score.
struct ScoreTable {
  HyperGrid grid;
  std::map<std::tuple<OptimizerKind, double, int>, double> scores;

  double at(const CellSpec& c) const {
    auto it = scores.find({c.optimizer, c.learning_rate, c.batch_size});
    if (it == scores.end()) {
      throw DataError("score table has no cell (" + to_string(c.optimizer) + ", " + io::format_double(c.learning_rate) +
                      ", " + std::to_string(c.batch_size) + ")");
    }
    return it->second;
  }
};

/// Axis values are taken from the table in first-appearance order, so a
/// table with a partial grid defines its own sweep.
inline ScoreTable read_score_table(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  std::vector<std::string> header;
  ScoreTable st;
  st.grid.optimizers.clear();
  st.grid.learning_rates.clear();
  st.grid.batch_sizes.clear();
  st.grid.replicates = 1;
  auto add_unique = [](auto& v, auto x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
  };
  std::size_t c_opt = 0, c_lr = 0, c_batch = 0, c_score = 0;
  while (std::getline(in, line)) {
    const auto body = io::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto fields = io::split(body, ',');
    if (header.empty()) {
      header = std::move(fields);
      auto col = [&](const std::string& name) {
        for (std::size_t j = 0; j < header.size(); ++j)
          if (header[j] == name) return j;
        throw DataError(path.string() + ": missing column '" + name + "'");
      };
      c_opt = col("optimizer");
      c_lr = col("learning_rate");
      c_batch = col("batch_size");
      c_score = col("score");
      continue;
    }
    if (fields.size() != header.size()) throw DataError(path.string() + ": ragged row '" + std::string(body) + "'");
    const auto opt = parse_optimizer(fields[c_opt]);
    const double lr = io::parse_double_or_throw(fields[c_lr], "learning_rate");
    const int batch = static_cast<int>(io::parse_double_or_throw(fields[c_batch], "batch_size"));
    add_unique(st.grid.optimizers, opt);
    add_unique(st.grid.learning_rates, lr);
    add_unique(st.grid.batch_sizes, batch);
    st.scores[{opt, lr, batch}] = io::parse_double_or_throw(fields[c_score], "score");
  }
  if (st.scores.empty()) throw DataError(path.string() + ": empty score table");
  return st;
}

inline CellEvaluator table_evaluator(const ScoreTable& table) {
  return [table](const CellSpec& spec, int, std::uint64_t) { return table.at(spec); };
}

inline std::string format_tuning_result(const TuningResult& res) {
  std::ostringstream os;
  os << "optimizer,learning_rate,batch_size,neurons,score\n";
  for (const auto& c : res.cells) {
    os << to_string(c.spec.optimizer) << ',' << io::format_double(c.spec.learning_rate) << ',' << c.spec.batch_size
       << ',' << c.spec.neurons << ',' << io::format_double(c.score) << '\n';
  }
  const auto& b = res.best();
  os << "# best: " << to_string(b.spec.optimizer) << ',' << io::format_double(b.spec.learning_rate) << ','
     << b.spec.batch_size << ',' << b.spec.neurons << ',' << io::format_double(b.score) << '\n';
  os << "# trainings: " << res.trainings << '\n';
  return os.str();
}

// ---- classical models -----------------------------------------------------

struct ClassicalCell {
  ModelParams params;
  std::string label;
  double score = 0.0;  // mean k-fold accuracy
};

struct ClassicalTuningResult {
  std::vector<ClassicalCell> cells;
  std::size_t best_index = 0;

  const ClassicalCell& best() const { return cells.at(best_index); }
};

/// Cartesian grid over the hyperparameters of one classical model kind.
struct ClassicalGrid {
  std::vector<double> c_values{1.0};
  std::vector<Penalty> penalties{Penalty::l2()};
  std::vector<double> gammas{0.0};
  std::vector<int> n_trees{2500};
  std::vector<int> max_depths{5};
  std::vector<Criterion> criteria{Criterion::Gini};
  std::vector<int> n_estimators{500};
  std::vector<double> boost_learning_rates{0.01};

  std::vector<ClassicalCell> cells(ModelKind kind, const ModelParams& base) const {
    std::vector<ClassicalCell> out;
    auto push = [&](ModelParams p, std::string label) { out.push_back({std::move(p), std::move(label), 0.0}); };
    switch (kind) {
      case ModelKind::LogisticRegression:
        for (const auto& pen : penalties)
          for (double c : c_values) {
            ModelParams p = base;
            p.penalty = pen;
            p.c = c;
            push(p, "penalty=" + to_string(pen) + " c=" + io::format_double(c));
          }
        break;
      case ModelKind::LinearSvm:
        for (double c : c_values) {
          ModelParams p = base;
          p.c = c;
          push(p, "c=" + io::format_double(c));
        }
        break;
      case ModelKind::KernelSvm:
        for (double c : c_values)
          for (double g : gammas) {
            ModelParams p = base;
            p.c = c;
            p.gamma = g;
            push(p, "c=" + io::format_double(c) + " gamma=" + io::format_double(g));
          }
        break;
      case ModelKind::RandomForest:
        for (int t : n_trees)
          for (int d : max_depths)
            for (auto cr : criteria) {
              ModelParams p = base;
              p.n_trees = t;
              p.max_depth = d;
              p.criterion = cr;
              push(p, "n_trees=" + std::to_string(t) + " max_depth=" + std::to_string(d) + " criterion=" + to_string(cr));
            }
        break;
      case ModelKind::AdaBoost:
        for (int n : n_estimators)
          for (double lr : boost_learning_rates) {
            ModelParams p = base;
            p.n_estimators = n;
            p.boost_learning_rate = lr;
            push(p, "n_estimators=" + std::to_string(n) + " learning_rate=" + io::format_double(lr));
          }
        break;
      default:
        throw DataError("classical grid: model '" + to_string(kind) + "' is recurrent");
    }
    return out;
  }
};

/// Mean k-fold accuracy per cell; first maximum in grid order wins.
inline ClassicalTuningResult grid_search_classical(ModelKind kind, const Matrix& x, const Labels& y,
                                                   const std::vector<ClassicalCell>& cells, std::size_t k,
                                                   std::uint64_t seed) {
  if (cells.empty()) throw DataError("grid_search_classical: empty grid");
  ClassicalTuningResult res;
  for (const auto& cell : cells) {
    ClassicalCell scored = cell;
    try {
      const auto run = repeated_cv(make_score_fn(kind, cell.params), x, y, k, 1, seed);
      scored.score = run.report[MetricId::Accuracy]->average / 100.0;
    } catch (const Error& e) {
      throw Error("cell [" + cell.label + "]: " + e.what());
    }
    if (res.cells.empty() || scored.score > res.cells[res.best_index].score) res.best_index = res.cells.size();
    res.cells.push_back(std::move(scored));
  }
  return res;
}

}  // namespace fc
