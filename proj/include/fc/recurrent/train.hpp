// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/io.hpp"
#include "fc/recurrent/cells.hpp"
#include "fc/recurrent/optimizer.hpp"

#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fc {

enum class StopRule {
  Patience,       // stop after `patience` epochs without a new best monitored loss
  NonDecreasing,  // stop once three consecutive monitored losses are nondecreasing
};

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 0.01;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 5;
  StopRule stop_rule = StopRule::Patience;
  std::uint64_t seed = 0;
  OptimizerConstants constants;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw DataError("train: learning rate must be >= 0");
    if (batch_size < 1) throw DataError("train: batch size must be >= 1");
    if (max_epochs < 1) throw DataError("train: max_epochs must be >= 1");
    if (patience < 1) throw DataError("train: patience must be >= 1");
  }
};

/// Decides when to stop from the sequence of monitored losses.
class EarlyStopping {
 public:
  EarlyStopping(StopRule rule, int patience) : rule_(rule), patience_(patience) {}

  /// Records the loss of the next epoch; returns true when training should stop.
  bool update(double loss) {
    history_.push_back(loss);
    const int epoch = static_cast<int>(history_.size());
    if (loss < best_) {
      best_ = loss;
      best_epoch_ = epoch;
      wait_ = 0;
    } else {
      ++wait_;
    }
    if (rule_ == StopRule::Patience) return wait_ >= patience_;
    if (history_.size() < 3) return false;
    const auto n = history_.size();
    return history_[n - 3] <= history_[n - 2] && history_[n - 2] <= history_[n - 1];
  }

  bool improved_last() const { return best_epoch_ == static_cast<int>(history_.size()); }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  StopRule rule_;
  int patience_;
  std::vector<double> history_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int wait_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

template <RecurrentParams P>
struct TrainResult {
  P params;  // parameters of the best monitored epoch
  std::vector<EpochRecord> trace;
  int stop_epoch = 0;
  int best_epoch = 0;
};

/// Mini-batch training with seeded shuffling. The validation loss is
/// monitored when `val` is nonempty, otherwise the training loss. The
/// parameters of the best monitored epoch are restored at the end.
template <RecurrentParams P>
TrainResult<P> train(P params, const SequenceBatch& train_set, const SequenceBatch& val, const TrainConfig& cfg) {
  cfg.validate();
  check_shapes(params);
  const Index n = train_set.size();
  if (n == 0) throw DataError("train: empty training set");
  if (static_cast<Index>(train_set.labels.size()) != n) throw DataError("train: label count mismatch");
  const bool has_val = val.size() > 0;

  OptimizerState<P> state(cfg.optimizer, params, cfg.constants);
  EarlyStopping stopper(cfg.stop_rule, cfg.patience);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult<P> result;
  result.params = params;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
      const auto lg = loss_and_grads(params, subset(train_set, rows));
      optimizer_step(state, params, lg.grads, cfg.learning_rate);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_only(params, train_set);
    if (has_val) rec.val_loss = loss_only(params, val);
    const double monitored = has_val ? *rec.val_loss : rec.train_loss;
    if (!std::isfinite(rec.train_loss) || !std::isfinite(monitored)) {
      throw NumericalError("training diverged at epoch " + std::to_string(epoch) + " (optimizer " +
                           to_string(cfg.optimizer) + ", learning rate " + io::format_double(cfg.learning_rate) +
                           ")");
    }
    result.trace.push_back(rec);
    result.stop_epoch = epoch;
    const bool stop = stopper.update(monitored);
    if (stopper.improved_last()) result.params = params;
    if (stop) break;
  }
  result.best_epoch = stopper.best_epoch();
  return result;
}

inline std::string loss_trace_csv(const std::vector<EpochRecord>& trace) {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss\n";
  for (const auto& r : trace) {
    os << r.epoch << ',' << io::format_double(r.train_loss) << ','
       << (r.val_loss ? io::format_double(*r.val_loss) : std::string()) << '\n';
  }
  return os.str();
}

}  // namespace fc
