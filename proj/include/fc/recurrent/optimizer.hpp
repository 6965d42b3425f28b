// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/recurrent/cells.hpp"

#include <cmath>
#include <string>

namespace fc {

enum class OptimizerKind { Adam, Nadam, Adagrad };

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Adam: return "Adam";
    case OptimizerKind::Nadam: return "Nadam";
    case OptimizerKind::Adagrad: return "Adagrad";
  }
  return "?";
}

inline OptimizerKind parse_optimizer(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "nadam") return OptimizerKind::Nadam;
  if (s == "adagrad") return OptimizerKind::Adagrad;
  throw Error("unknown optimizer '" + s + "' (expected adam|nadam|adagrad)");
}

struct OptimizerConstants {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Accumulators shaped like the parameters. Adam and Nadam use both moments;
/// Adagrad keeps the running sum of squared gradients in `second`.
template <RecurrentParams P>
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  OptimizerConstants constants;
  P first;
  P second;
  long step = 0;

  OptimizerState() = default;
  OptimizerState(OptimizerKind k, const P& like, OptimizerConstants c = {})
      : kind(k), constants(c), first(zeros_like(like)), second(zeros_like(like)) {}
};

/// One update of every tensor in `params` from `grads` at learning rate `lr`.
///   Adam:    m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///            p -= lr * m/(1-b1^t) / (sqrt(v/(1-b2^t)) + eps)
///   Nadam:   as Adam with the look-ahead numerator
///            b1 m/(1-b1^(t+1)) + (1-b1) g/(1-b1^t)
///   Adagrad: G <- G + g^2,  p -= lr * g / (sqrt(G) + eps)
template <RecurrentParams P>
void optimizer_step(OptimizerState<P>& state, P& params, const P& grads, double lr) {
  ++state.step;
  const auto& c = state.constants;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc1_next = 1.0 - std::pow(c.beta1, t + 1.0);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (const auto& [name, member] : P::fields) {
    Matrix& p = params.*member;
    const Matrix& g = grads.*member;
    Matrix& m = state.first.*member;
    Matrix& v = state.second.*member;
    if (p.rows() != g.rows() || p.cols() != g.cols() || m.rows() != p.rows() || m.cols() != p.cols()) {
      throw DataError(std::string("optimizer_step: shape mismatch in ") + name);
    }
    switch (state.kind) {
      case OptimizerKind::Adam:
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
        break;
      case OptimizerKind::Nadam: {
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
        const auto lookahead = c.beta1 * m.array() / bc1_next + (1.0 - c.beta1) * g.array() / bc1;
        p.array() -= lr * lookahead / ((v.array() / bc2).sqrt() + c.epsilon);
        break;
      }
      case OptimizerKind::Adagrad:
        v += g.cwiseProduct(g);
        p.array() -= lr * g.array() / (v.array().sqrt() + c.epsilon);
        break;
    }
  }
}

}  // namespace fc
