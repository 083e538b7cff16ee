// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small causal language model: token embedding, one GRU layer, linear
// readout. Rows of every state matrix are independent sequences, so a batch
// of continuations that share a prefix can be stepped together.
//
//   r  = sigmoid(x Wx_r + bx_r + h Wh_r + bh_r)
//   u  = sigmoid(x Wx_u + bx_u + h Wh_u + bh_u)
//   n  = tanh(x Wx_n + bx_n + r * (h Wh_n + bh_n))
//   h' = (1 - u) * n + u * h
//   logits = h' Wo + bo

#ifndef PRAGMAFILL_SEQUENCE_MODEL_HPP_
#define PRAGMAFILL_SEQUENCE_MODEL_HPP_

#include <stdexcept>
#include <string>
#include <vector>

#include "pragmafill/math.hpp"

namespace pragmafill {

struct SequenceModelOptions {
  int vocab = 0;
  int width = 64;
  int context = 4096;
  bool operator==(const SequenceModelOptions&) const = default;
};

template <typename Scalar>
class BasicSequenceModel {
 public:
  struct StepCache {
    std::vector<int> tokens;
    Mat<Scalar> x, h_prev, r, u, n, hn;  // hn = h Wh_n + bh_n
  };

  explicit BasicSequenceModel(SequenceModelOptions opts) : opts_(opts) {
    if (opts.vocab < 1 || opts.width < 1 || opts.context < 1) throw std::invalid_argument("bad sequence model shape");
    const int d = opts.width;
    embed_ = params_.add("seq.embed", opts.vocab, d);
    wx_ = params_.add("seq.Wx", d, 3 * d);
    bx_ = params_.add("seq.bx", 1, 3 * d);
    wh_ = params_.add("seq.Wh", d, 3 * d);
    bh_ = params_.add("seq.bh", 1, 3 * d);
    wo_ = params_.add("seq.Wo", d, opts.vocab);
    bo_ = params_.add("seq.bo", 1, opts.vocab);
  }

  void init(Rng& rng) {
    const double a = 1.0 / std::sqrt(static_cast<double>(opts_.width));
    for (auto& p : params_) uniform_fill(p.value, a, rng);
  }

  const SequenceModelOptions& options() const { return opts_; }
  int width() const { return opts_.width; }
  int vocab() const { return opts_.vocab; }
  ParameterList<Scalar>& params() { return params_; }
  const ParameterList<Scalar>& params() const { return params_; }

  Mat<Scalar> initial_state(Eigen::Index batch = 1) const { return Mat<Scalar>::Zero(batch, opts_.width); }

  /// Consumes one token per row.
  Mat<Scalar> step(const Mat<Scalar>& h, const std::vector<int>& tokens, StepCache* cache = nullptr) const {
    const int d = opts_.width;
    const Eigen::Index b = h.rows();
    if (static_cast<Eigen::Index>(tokens.size()) != b) throw std::invalid_argument("token/state batch mismatch");
    Mat<Scalar> x(b, d);
    for (Eigen::Index i = 0; i < b; ++i) {
      int t = tokens[static_cast<std::size_t>(i)];
      if (t < 0 || t >= opts_.vocab) throw std::out_of_range("token id " + std::to_string(t) + " outside vocabulary");
      x.row(i) = P(embed_).row(t);
    }
    Mat<Scalar> gx = (x * P(wx_)).rowwise() + P(bx_).row(0);
    Mat<Scalar> gh = (h * P(wh_)).rowwise() + P(bh_).row(0);
    Mat<Scalar> r = sigmoid((gx.leftCols(d) + gh.leftCols(d)).array()).matrix();
    Mat<Scalar> u = sigmoid((gx.middleCols(d, d) + gh.middleCols(d, d)).array()).matrix();
    Mat<Scalar> hn = gh.rightCols(d);
    Mat<Scalar> n = (gx.rightCols(d).array() + r.array() * hn.array()).tanh().matrix();
    Mat<Scalar> out = ((Scalar(1) - u.array()) * n.array() + u.array() * h.array()).matrix();
    if (cache) {
      cache->tokens = tokens;
      cache->x = std::move(x);
      cache->h_prev = h;
      cache->r = std::move(r);
      cache->u = std::move(u);
      cache->n = std::move(n);
      cache->hn = std::move(hn);
    }
    return out;
  }

  /// Accumulates parameter gradients; adds d(loss)/d(h_prev) into dh_prev.
  void step_backward(const StepCache& c, const Mat<Scalar>& dh_next, Mat<Scalar>& dh_prev) {
    const int d = opts_.width;
    auto one = Scalar(1);
    Mat<Scalar> dn = (dh_next.array() * (one - c.u.array())).matrix();
    Mat<Scalar> du = (dh_next.array() * (c.h_prev.array() - c.n.array())).matrix();
    Mat<Scalar> dn_pre = (dn.array() * (one - c.n.array().square())).matrix();
    Mat<Scalar> du_pre = (du.array() * c.u.array() * (one - c.u.array())).matrix();
    Mat<Scalar> dr_pre = (dn_pre.array() * c.hn.array() * c.r.array() * (one - c.r.array())).matrix();

    const Eigen::Index b = dh_next.rows();
    Mat<Scalar> dgx(b, 3 * d), dgh(b, 3 * d);
    dgx << dr_pre, du_pre, dn_pre;
    dgh << dr_pre, du_pre, (dn_pre.array() * c.r.array()).matrix();

    G(wx_) += c.x.transpose() * dgx;
    G(bx_) += dgx.colwise().sum();
    G(wh_) += c.h_prev.transpose() * dgh;
    G(bh_) += dgh.colwise().sum();
    Mat<Scalar> dx = dgx * P(wx_).transpose();
    for (Eigen::Index i = 0; i < b; ++i) G(embed_).row(c.tokens[static_cast<std::size_t>(i)]) += dx.row(i);
    dh_prev += (dh_next.array() * c.u.array()).matrix() + dgh * P(wh_).transpose();
  }

  Mat<Scalar> output(const Mat<Scalar>& h) const { return (h * P(wo_)).rowwise() + P(bo_).row(0); }

  void output_backward(const Mat<Scalar>& h, const Mat<Scalar>& dlogits, Mat<Scalar>& dh) {
    G(wo_) += h.transpose() * dlogits;
    G(bo_) += dlogits.colwise().sum();
    dh += dlogits * P(wo_).transpose();
  }

  void check_context(std::size_t length) const {
    if (length > static_cast<std::size_t>(opts_.context)) {
      throw std::length_error("sequence of " + std::to_string(length) + " tokens exceeds context length " +
                              std::to_string(opts_.context));
    }
  }

  /// Row t scores the token following tokens[0..t].
  Mat<Scalar> logits(const std::vector<int>& tokens) const {
    check_context(tokens.size());
    Mat<Scalar> out(static_cast<Eigen::Index>(tokens.size()), opts_.vocab);
    Mat<Scalar> h = initial_state();
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      h = step(h, {tokens[t]});
      out.row(static_cast<Eigen::Index>(t)) = output(h);
    }
    return out;
  }

  /// Scores for the first token of an empty sequence.
  RowVec<Scalar> initial_logits() const { return output(initial_state()).row(0); }

 private:
  const Mat<Scalar>& P(std::size_t i) const { return params_[i].value; }
  Mat<Scalar>& G(std::size_t i) { return params_[i].grad; }

  SequenceModelOptions opts_;
  ParameterList<Scalar> params_;
  std::size_t embed_, wx_, bx_, wh_, bh_, wo_, bo_;
};

using SequenceModel = BasicSequenceModel<double>;

/// Masked mean cross-entropy of `labels` under teacher forcing on `inputs`:
/// position t (mask[t] set, t > 0) scores labels[t] from the state after
/// inputs[0..t-1]. Only masked-in labels are read. With `accumulate` the
/// parameter gradients of the returned loss are added to the model.
template <typename Scalar>
Scalar sequence_cross_entropy(BasicSequenceModel<Scalar>& model, const std::vector<int>& inputs,
                              const std::vector<int>& labels, const std::vector<std::uint8_t>& mask,
                              bool accumulate) {
  if (inputs.size() != labels.size() || inputs.size() != mask.size()) {
    throw std::invalid_argument("inputs, labels and mask must have equal length");
  }
  model.check_context(inputs.size());
  std::size_t last = 0, count = 0;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    if (t == 0) throw std::invalid_argument("position 0 cannot carry a loss");
    last = t;
    ++count;
  }
  if (count == 0) return Scalar(0);

  using Cache = typename BasicSequenceModel<Scalar>::StepCache;
  std::vector<Cache> caches(last);
  std::vector<Mat<Scalar>> states(last);
  Mat<Scalar> h = model.initial_state();
  Scalar loss = 0;
  std::vector<Mat<Scalar>> dlogits(last);
  for (std::size_t t = 0; t < last; ++t) {
    h = model.step(h, {inputs[t]}, accumulate ? &caches[t] : nullptr);
    if (!mask[t + 1]) continue;
    Mat<Scalar> lp = log_softmax_rows<Scalar>(model.output(h));
    int y = labels[t + 1];
    loss -= lp(0, y);
    if (accumulate) {
      states[t] = h;
      Mat<Scalar> g = lp.array().exp().matrix();
      g(0, y) -= Scalar(1);
      dlogits[t] = g / static_cast<Scalar>(count);
    }
  }
  loss /= static_cast<Scalar>(count);
  if (accumulate) {
    Mat<Scalar> dh = Mat<Scalar>::Zero(1, model.width());
    for (std::size_t t = last; t-- > 0;) {
      if (mask[t + 1]) model.output_backward(states[t], dlogits[t], dh);
      Mat<Scalar> dprev = Mat<Scalar>::Zero(1, model.width());
      model.step_backward(caches[t], dh, dprev);
      dh = std::move(dprev);
    }
  }
  return loss;
}

}  // namespace pragmafill

#endif  // PRAGMAFILL_SEQUENCE_MODEL_HPP_
