// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Named parameter tensors, initialisation and Adam.

#ifndef PRAGMAFILL_MATH_HPP_
#define PRAGMAFILL_MATH_HPP_

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pragmafill/rng.hpp"

namespace pragmafill {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
struct Parameter {
  std::string name;
  Mat<Scalar> value;
  Mat<Scalar> grad;
};

/// Ordered, name-addressable set of trainable tensors.
template <typename Scalar>
class ParameterList {
 public:
  /// Returns the index of the new tensor, zero-initialised.
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    for (const auto& p : params_) {
      if (p.name == name) throw std::invalid_argument("duplicate parameter " + name);
    }
    params_.push_back({std::move(name), Mat<Scalar>::Zero(rows, cols), Mat<Scalar>::Zero(rows, cols)});
    return params_.size() - 1;
  }

  Parameter<Scalar>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<Scalar>& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  const Parameter<Scalar>* find(const std::string& name) const {
    for (const auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  void scale_grad(Scalar s) {
    for (auto& p : params_) p.grad *= s;
  }

  Scalar grad_norm() const {
    Scalar s = 0;
    for (const auto& p : params_) s += p.grad.squaredNorm();
    return std::sqrt(s);
  }

  bool values_equal(const ParameterList& o) const {
    if (o.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (params_[i].name != o.params_[i].name || params_[i].value != o.params_[i].value) return false;
    }
    return true;
  }

 private:
  std::vector<Parameter<Scalar>> params_;
};

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename Scalar>
void xavier_uniform(Mat<Scalar>& m, Rng& rng) {
  double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(rng.uniform(-a, a));
  }
}

template <typename Scalar>
void uniform_fill(Mat<Scalar>& m, double a, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(rng.uniform(-a, a));
  }
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return (S(1) + (-x).exp()).inverse();
}

/// Row-wise log-softmax.
template <typename Scalar>
Mat<Scalar> log_softmax_rows(const Mat<Scalar>& logits) {
  Mat<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Scalar mx = logits.row(r).maxCoeff();
    Scalar lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

template <typename Scalar>
struct AdamOptions {
  Scalar lr = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
  Scalar clip_norm = Scalar(0);  // global gradient-norm clip; 0 disables
};

template <typename Scalar>
class Adam {
 public:
  Adam(const ParameterList<Scalar>& params, AdamOptions<Scalar> opts) : opts_(opts) {
    for (const auto& p : params) {
      m_.push_back(Mat<Scalar>::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Mat<Scalar>::Zero(p.value.rows(), p.value.cols()));
    }
  }

  void step(ParameterList<Scalar>& params) {
    ++t_;
    Scalar scale = 1;
    if (opts_.clip_norm > 0) {
      Scalar n = params.grad_norm();
      if (n > opts_.clip_norm) scale = opts_.clip_norm / n;
    }
    const Scalar c1 = 1 - std::pow(opts_.beta1, static_cast<Scalar>(t_));
    const Scalar c2 = 1 - std::pow(opts_.beta2, static_cast<Scalar>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      Mat<Scalar> g = p.grad * scale;
      m_[i] = opts_.beta1 * m_[i] + (1 - opts_.beta1) * g;
      v_[i] = opts_.beta2 * v_[i] + (1 - opts_.beta2) * g.cwiseProduct(g);
      p.value.array() -= opts_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + opts_.eps);
    }
  }

  long steps() const { return t_; }

 private:
  AdamOptions<Scalar> opts_;
  std::vector<Mat<Scalar>> m_, v_;
  long t_ = 0;
};

}  // namespace pragmafill

#endif  // PRAGMAFILL_MATH_HPP_
