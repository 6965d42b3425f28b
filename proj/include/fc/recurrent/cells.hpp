// SPDX-License-Identifier: Apache-2.0
//
// Single-layer LSTM and GRU cells with a dense sigmoid read-out on the final
// hidden state, and exact gradients by backpropagation through time.
//
// Shapes: k input features, d hidden units, B rows per batch. Input weights
// are d x k, recurrent weights d x d, biases d x 1. Batched activations are
// stored row-per-example (B x d), so a gate pre-activation is
//   X W^T + H W_h^T + 1 b^T.
//
// LSTM at step t:
//   i = s(W_i x + W_hi h + b_i)      f = s(W_f x + W_hf h + b_f)
//   o = s(W_o x + W_ho h + b_o)      g = tanh(W_c x + W_hc h + b_c)
//   c' = f * c + i * g               h' = o * tanh(c')
// GRU at step t:
//   r = s(W_r x + W_hr h + b_r)      u = s(W_u x + W_hu h + b_u)
//   g = tanh(W_c x + W_hc (r * h) + b_c)
//   h' = (1 - u) * h + u * g
#pragma once

#include "fc/core.hpp"

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace fc {

enum class CellKind { Lstm, Gru };

inline std::string to_string(CellKind k) { return k == CellKind::Lstm ? "lstm" : "gru"; }

struct LstmParams {
  Matrix w_i, w_f, w_o, w_c;      // d x k
  Matrix w_hi, w_hf, w_ho, w_hc;  // d x d
  Matrix b_i, b_f, b_o, b_c;      // d x 1
  Matrix head_w;                  // d x 1
  Matrix head_b;                  // 1 x 1

  static constexpr CellKind kind = CellKind::Lstm;
  static constexpr std::array<std::pair<const char*, Matrix LstmParams::*>, 14> fields{{
      {"W_i", &LstmParams::w_i},   {"W_f", &LstmParams::w_f},   {"W_o", &LstmParams::w_o},
      {"W_c", &LstmParams::w_c},   {"W_hi", &LstmParams::w_hi}, {"W_hf", &LstmParams::w_hf},
      {"W_ho", &LstmParams::w_ho}, {"W_hc", &LstmParams::w_hc}, {"b_i", &LstmParams::b_i},
      {"b_f", &LstmParams::b_f},   {"b_o", &LstmParams::b_o},   {"b_c", &LstmParams::b_c},
      {"head_w", &LstmParams::head_w}, {"head_b", &LstmParams::head_b},
  }};

  Index inputs() const { return w_i.cols(); }
  Index hidden() const { return w_i.rows(); }
};

struct GruParams {
  Matrix w_r, w_u, w_c;     // d x k
  Matrix w_hr, w_hu, w_hc;  // d x d; w_hc acts on r * h
  Matrix b_r, b_u, b_c;     // d x 1
  Matrix head_w;            // d x 1
  Matrix head_b;            // 1 x 1

  static constexpr CellKind kind = CellKind::Gru;
  static constexpr std::array<std::pair<const char*, Matrix GruParams::*>, 11> fields{{
      {"W_r", &GruParams::w_r},   {"W_u", &GruParams::w_u},   {"W_c", &GruParams::w_c},
      {"W_hr", &GruParams::w_hr}, {"W_hu", &GruParams::w_hu}, {"W_hc", &GruParams::w_hc},
      {"b_r", &GruParams::b_r},   {"b_u", &GruParams::b_u},   {"b_c", &GruParams::b_c},
      {"head_w", &GruParams::head_w}, {"head_b", &GruParams::head_b},
  }};

  Index inputs() const { return w_r.cols(); }
  Index hidden() const { return w_r.rows(); }
};

template <typename P>
concept RecurrentParams = requires(const P& p) {
  P::fields;
  { p.inputs() } -> std::convertible_to<Index>;
  { p.hidden() } -> std::convertible_to<Index>;
};

/// Calls f(name, tensor) for every parameter tensor, in declaration order.
template <RecurrentParams P, typename F>
void for_each_tensor(P& p, F&& f) {
  for (const auto& [name, member] : P::fields) f(name, p.*member);
}

template <RecurrentParams P, typename F>
void for_each_tensor(const P& p, F&& f) {
  for (const auto& [name, member] : P::fields) f(name, p.*member);
}

/// Parameter set of the given shape with every entry zero.
template <RecurrentParams P>
P zero_params(Index k, Index d) {
  P p;
  for (const auto& [name, member] : P::fields) {
    const std::string n = name;
    Index rows = d, cols = 1;
    if (n == "head_b") rows = 1;
    else if (n.rfind("W_h", 0) == 0) cols = d;
    else if (n.rfind("W_", 0) == 0) cols = k;
    p.*member = Matrix::Zero(rows, cols);
  }
  return p;
}

template <RecurrentParams P>
P zeros_like(const P& ref) {
  return zero_params<P>(ref.inputs(), ref.hidden());
}

/// Input weights U(-1/sqrt(k), 1/sqrt(k)); recurrent and read-out weights
/// U(-1/sqrt(d), 1/sqrt(d)); biases zero.
template <RecurrentParams P>
P init_params(Index k, Index d, std::uint64_t seed) {
  if (k < 1 || d < 1) throw DataError("recurrent init: k and d must be >= 1");
  P p = zero_params<P>(k, d);
  Rng rng(seed);
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(k));
  const double hid_scale = 1.0 / std::sqrt(static_cast<double>(d));
  for_each_tensor(p, [&](const char* name, Matrix& t) {
    const std::string n = name;
    double scale = 0.0;
    if (n.rfind("W_h", 0) == 0 || n == "head_w") scale = hid_scale;
    else if (n.rfind("W_", 0) == 0) scale = in_scale;
    if (scale == 0.0) return;
    for (Index j = 0; j < t.cols(); ++j)
      for (Index i = 0; i < t.rows(); ++i) t(i, j) = rng.uniform(-scale, scale);
  });
  return p;
}

template <RecurrentParams P>
void check_shapes(const P& p) {
  const Index k = p.inputs(), d = p.hidden();
  const P ref = zero_params<P>(k, d);
  for (const auto& [name, member] : P::fields) {
    if ((p.*member).rows() != (ref.*member).rows() || (p.*member).cols() != (ref.*member).cols()) {
      throw DataError(std::string("recurrent params: tensor ") + name + " has inconsistent shape");
    }
  }
}

namespace detail {

inline Matrix sigmoid_all(const Matrix& z) {
  return z.unaryExpr([](double v) { return fc::sigmoid(v); });
}

inline Matrix gate(const Matrix& x, const Matrix& h, const Matrix& w, const Matrix& wh, const Matrix& b) {
  Matrix z = x * w.transpose() + h * wh.transpose();
  z.rowwise() += b.col(0).transpose();
  return z;
}

}  // namespace detail

struct LstmStepCache {
  Matrix x, h_prev, c_prev, i, f, o, g, c, tanh_c, h;
};

struct GruStepCache {
  Matrix x, h_prev, r, u, g, rh, h;
};

/// Batched LSTM step; rows of x, h_prev, c_prev are examples.
inline LstmStepCache lstm_step_batch(const LstmParams& p, const Matrix& x, const Matrix& h_prev, const Matrix& c_prev) {
  LstmStepCache s;
  s.x = x;
  s.h_prev = h_prev;
  s.c_prev = c_prev;
  s.i = detail::sigmoid_all(detail::gate(x, h_prev, p.w_i, p.w_hi, p.b_i));
  s.f = detail::sigmoid_all(detail::gate(x, h_prev, p.w_f, p.w_hf, p.b_f));
  s.o = detail::sigmoid_all(detail::gate(x, h_prev, p.w_o, p.w_ho, p.b_o));
  s.g = detail::gate(x, h_prev, p.w_c, p.w_hc, p.b_c).array().tanh();
  s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
  s.tanh_c = s.c.array().tanh();
  s.h = s.o.cwiseProduct(s.tanh_c);
  return s;
}

inline GruStepCache gru_step_batch(const GruParams& p, const Matrix& x, const Matrix& h_prev) {
  GruStepCache s;
  s.x = x;
  s.h_prev = h_prev;
  s.r = detail::sigmoid_all(detail::gate(x, h_prev, p.w_r, p.w_hr, p.b_r));
  s.u = detail::sigmoid_all(detail::gate(x, h_prev, p.w_u, p.w_hu, p.b_u));
  s.rh = s.r.cwiseProduct(h_prev);
  s.g = detail::gate(x, s.rh, p.w_c, p.w_hc, p.b_c).array().tanh();
  s.h = (1.0 - s.u.array()).matrix().cwiseProduct(h_prev) + s.u.cwiseProduct(s.g);
  return s;
}

struct LstmState {
  Vector h;
  Vector c;
};

/// One LSTM step for a single example.
inline LstmState lstm_step(const LstmParams& p, const Vector& x, const Vector& h_prev, const Vector& c_prev) {
  check_shapes(p);
  if (x.size() != p.inputs() || h_prev.size() != p.hidden() || c_prev.size() != p.hidden()) {
    throw DataError("lstm_step: shape mismatch");
  }
  auto s = lstm_step_batch(p, x.transpose(), h_prev.transpose(), c_prev.transpose());
  return {s.h.row(0).transpose(), s.c.row(0).transpose()};
}

/// One GRU step for a single example.
inline Vector gru_step(const GruParams& p, const Vector& x, const Vector& h_prev) {
  check_shapes(p);
  if (x.size() != p.inputs() || h_prev.size() != p.hidden()) throw DataError("gru_step: shape mismatch");
  return gru_step_batch(p, x.transpose(), h_prev.transpose()).h.row(0).transpose();
}

/// A batch of sequences: steps[t] is B x k, labels has B entries.
struct SequenceBatch {
  std::vector<Matrix> steps;
  Labels labels;

  Index size() const { return steps.empty() ? 0 : steps.front().rows(); }
};

/// Length-one sequences, the [subjects, 1, features] layout.
inline SequenceBatch as_sequences(const Matrix& x, Labels y = {}) { return {{x}, std::move(y)}; }

inline SequenceBatch subset(const SequenceBatch& b, const std::vector<std::size_t>& rows) {
  SequenceBatch out;
  for (const auto& s : b.steps) out.steps.push_back(select_rows(s, rows));
  if (!b.labels.empty()) out.labels = select(b.labels, rows);
  return out;
}

template <RecurrentParams P>
struct ForwardResult;

template <>
struct ForwardResult<LstmParams> {
  std::vector<LstmStepCache> steps;
  Matrix h_final;
};

template <>
struct ForwardResult<GruParams> {
  std::vector<GruStepCache> steps;
  Matrix h_final;
};

inline void check_sequence(const std::vector<Matrix>& steps, Index k) {
  if (steps.empty()) throw DataError("recurrent forward: empty sequence");
  for (const auto& s : steps) {
    if (s.cols() != k) throw DataError("recurrent forward: input width mismatch");
    if (s.rows() != steps.front().rows()) throw DataError("recurrent forward: ragged batch");
  }
}

/// Folds the cell over the sequence. Initial states default to zero.
inline ForwardResult<LstmParams> forward(const LstmParams& p, const std::vector<Matrix>& steps,
                                         const Matrix* h0 = nullptr, const Matrix* c0 = nullptr) {
  check_sequence(steps, p.inputs());
  const Index b = steps.front().rows(), d = p.hidden();
  ForwardResult<LstmParams> out;
  Matrix h = h0 ? *h0 : Matrix::Zero(b, d);
  Matrix c = c0 ? *c0 : Matrix::Zero(b, d);
  for (const auto& x : steps) {
    out.steps.push_back(lstm_step_batch(p, x, h, c));
    h = out.steps.back().h;
    c = out.steps.back().c;
  }
  out.h_final = h;
  return out;
}

inline ForwardResult<GruParams> forward(const GruParams& p, const std::vector<Matrix>& steps,
                                        const Matrix* h0 = nullptr, const Matrix* = nullptr) {
  check_sequence(steps, p.inputs());
  const Index b = steps.front().rows(), d = p.hidden();
  ForwardResult<GruParams> out;
  Matrix h = h0 ? *h0 : Matrix::Zero(b, d);
  for (const auto& x : steps) {
    out.steps.push_back(gru_step_batch(p, x, h));
    h = out.steps.back().h;
  }
  out.h_final = h;
  return out;
}

/// P(label = 1) for each sequence in the batch.
template <RecurrentParams P>
Vector predict_proba(const P& p, const std::vector<Matrix>& steps) {
  const auto fw = forward(p, steps);
  Vector z = fw.h_final * p.head_w.col(0);
  z.array() += p.head_b(0, 0);
  return z.unaryExpr([](double v) { return fc::sigmoid(v); });
}

namespace detail {

inline void backward_steps(const LstmParams& p, const ForwardResult<LstmParams>& fw, Matrix dh, LstmParams& g) {
  Matrix dc = Matrix::Zero(dh.rows(), dh.cols());
  for (auto it = fw.steps.rbegin(); it != fw.steps.rend(); ++it) {
    const auto& s = *it;
    const Matrix dct = dc + dh.cwiseProduct(s.o).cwiseProduct((1.0 - s.tanh_c.array().square()).matrix());
    const Matrix dzo = dh.cwiseProduct(s.tanh_c).cwiseProduct(s.o.cwiseProduct((1.0 - s.o.array()).matrix()));
    const Matrix dzi = dct.cwiseProduct(s.g).cwiseProduct(s.i.cwiseProduct((1.0 - s.i.array()).matrix()));
    const Matrix dzf = dct.cwiseProduct(s.c_prev).cwiseProduct(s.f.cwiseProduct((1.0 - s.f.array()).matrix()));
    const Matrix dzg = dct.cwiseProduct(s.i).cwiseProduct((1.0 - s.g.array().square()).matrix());

    g.w_i += dzi.transpose() * s.x;
    g.w_f += dzf.transpose() * s.x;
    g.w_o += dzo.transpose() * s.x;
    g.w_c += dzg.transpose() * s.x;
    g.w_hi += dzi.transpose() * s.h_prev;
    g.w_hf += dzf.transpose() * s.h_prev;
    g.w_ho += dzo.transpose() * s.h_prev;
    g.w_hc += dzg.transpose() * s.h_prev;
    g.b_i += dzi.colwise().sum().transpose();
    g.b_f += dzf.colwise().sum().transpose();
    g.b_o += dzo.colwise().sum().transpose();
    g.b_c += dzg.colwise().sum().transpose();

    dh = dzi * p.w_hi + dzf * p.w_hf + dzo * p.w_ho + dzg * p.w_hc;
    dc = dct.cwiseProduct(s.f);
  }
}

inline void backward_steps(const GruParams& p, const ForwardResult<GruParams>& fw, Matrix dh, GruParams& g) {
  for (auto it = fw.steps.rbegin(); it != fw.steps.rend(); ++it) {
    const auto& s = *it;
    const Matrix dzu = dh.cwiseProduct(s.g - s.h_prev).cwiseProduct(s.u.cwiseProduct((1.0 - s.u.array()).matrix()));
    const Matrix dzc = dh.cwiseProduct(s.u).cwiseProduct((1.0 - s.g.array().square()).matrix());
    const Matrix drh = dzc * p.w_hc;
    const Matrix dzr = drh.cwiseProduct(s.h_prev).cwiseProduct(s.r.cwiseProduct((1.0 - s.r.array()).matrix()));

    g.w_r += dzr.transpose() * s.x;
    g.w_u += dzu.transpose() * s.x;
    g.w_c += dzc.transpose() * s.x;
    g.w_hr += dzr.transpose() * s.h_prev;
    g.w_hu += dzu.transpose() * s.h_prev;
    g.w_hc += dzc.transpose() * s.rh;
    g.b_r += dzr.colwise().sum().transpose();
    g.b_u += dzu.colwise().sum().transpose();
    g.b_c += dzc.colwise().sum().transpose();

    dh = dh.cwiseProduct((1.0 - s.u.array()).matrix()) + drh.cwiseProduct(s.r) + dzu * p.w_hu + dzr * p.w_hr;
  }
}

}  // namespace detail

inline constexpr double kProbabilityClamp = 1e-12;

template <RecurrentParams P>
struct LossAndGrads {
  double loss = 0.0;
  P grads;
};

/// Mean binary cross-entropy of the sigmoid read-out over the batch, with
/// probabilities clamped to [1e-12, 1 - 1e-12], and its exact gradient.
template <RecurrentParams P>
LossAndGrads<P> loss_and_grads(const P& p, const SequenceBatch& batch) {
  const Index b = batch.size();
  if (b == 0) throw DataError("loss_and_grads: empty batch");
  if (static_cast<Index>(batch.labels.size()) != b) throw DataError("loss_and_grads: label count mismatch");
  const auto fw = forward(p, batch.steps);

  LossAndGrads<P> out;
  out.grads = zeros_like(p);
  Vector dz(b);
  const double inv_b = 1.0 / static_cast<double>(b);
  for (Index i = 0; i < b; ++i) {
    const double z = fw.h_final.row(i).dot(p.head_w.col(0)) + p.head_b(0, 0);
    const double prob = fc::sigmoid(z);
    const double clamped = std::clamp(prob, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const int y = batch.labels[static_cast<std::size_t>(i)];
    out.loss -= (y == 1 ? std::log(clamped) : std::log(1.0 - clamped)) * inv_b;
    dz(i) = clamped == prob ? (prob - y) * inv_b : 0.0;
  }
  out.grads.head_w.col(0) = fw.h_final.transpose() * dz;
  out.grads.head_b(0, 0) = dz.sum();
  detail::backward_steps(p, fw, dz * p.head_w.col(0).transpose(), out.grads);
  return out;
}

/// Mean clamped BCE without gradients.
template <RecurrentParams P>
double loss_only(const P& p, const SequenceBatch& batch) {
  const Vector prob = predict_proba(p, batch.steps);
  double loss = 0.0;
  for (Index i = 0; i < prob.size(); ++i) {
    const double c = std::clamp(prob(i), kProbabilityClamp, 1.0 - kProbabilityClamp);
    loss -= batch.labels[static_cast<std::size_t>(i)] == 1 ? std::log(c) : std::log(1.0 - c);
  }
  return loss / static_cast<double>(prob.size());
}

}  // namespace fc
