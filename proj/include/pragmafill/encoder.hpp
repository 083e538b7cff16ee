// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Typed message-passing graph encoder.
//
//   H0      = act(X W_in + b_in)
//   H(l+1)  = act([H, A_1 H, ..., A_5 H, A_1' H, ..., A_5' H] W_l + b_l)
//   e       = mean_rows(H_L) W_out + b_out
//
// A_k(dst, src) = 1 for each edge of kind k, so A_k H sums messages along
// the edge direction and A_k' H against it. act is tanh, or the identity for
// the linear variant.

#ifndef PRAGMAFILL_ENCODER_HPP_
#define PRAGMAFILL_ENCODER_HPP_

#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "pragmafill/graph.hpp"
#include "pragmafill/math.hpp"

namespace pragmafill {

/// One or more graphs stacked block-diagonally.
template <typename Scalar>
struct GraphBatch {
  using Sparse = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;
  Mat<Scalar> x;
  std::vector<Sparse> adj;    // per edge kind, (dst, src)
  std::vector<Sparse> adj_t;  // transposes
  std::vector<Eigen::Index> offsets;  // first node of each graph, plus the total
  Eigen::Index num_graphs() const { return static_cast<Eigen::Index>(offsets.size()) - 1; }
};

template <typename Scalar>
GraphBatch<Scalar> make_batch(const std::vector<const ProgramGraph*>& graphs) {
  GraphBatch<Scalar> b;
  Eigen::Index n = 0;
  b.offsets.push_back(0);
  for (const auto* g : graphs) {
    n += g->num_nodes();
    b.offsets.push_back(n);
  }
  b.x.resize(n, feature::kDim);
  std::vector<std::vector<Eigen::Triplet<Scalar>>> trip(kEdgeKindCount);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const ProgramGraph& g = *graphs[i];
    if (g.features.cols() != feature::kDim) throw std::invalid_argument("graph feature dimension mismatch");
    Eigen::Index off = b.offsets[i];
    b.x.middleRows(off, g.num_nodes()) = g.features.template cast<Scalar>();
    for (const auto& e : g.edges) {
      trip[static_cast<std::size_t>(e.kind)].emplace_back(off + e.dst, off + e.src, Scalar(1));
    }
  }
  for (int k = 0; k < kEdgeKindCount; ++k) {
    typename GraphBatch<Scalar>::Sparse a(n, n);
    a.setFromTriplets(trip[static_cast<std::size_t>(k)].begin(), trip[static_cast<std::size_t>(k)].end());
    b.adj_t.push_back(typename GraphBatch<Scalar>::Sparse(a.transpose()));
    b.adj.push_back(std::move(a));
  }
  return b;
}

template <typename Scalar>
GraphBatch<Scalar> make_batch(const ProgramGraph& g) {
  return make_batch<Scalar>(std::vector<const ProgramGraph*>{&g});
}

struct EncoderOptions {
  int layers = 3;
  int hidden = 64;
  int embed = 64;
  bool linear = false;
  bool operator==(const EncoderOptions&) const = default;
};

template <typename Scalar>
class BasicGraphEncoder {
 public:
  struct Cache {
    std::vector<Mat<Scalar>> h;       // h[0] .. h[layers], post-activation
    std::vector<Mat<Scalar>> concat;  // layer inputs
    Mat<Scalar> pooled;
  };

  explicit BasicGraphEncoder(EncoderOptions opts = {}) : opts_(opts) {
    if (opts.layers < 0 || opts.hidden < 1 || opts.embed < 1) throw std::invalid_argument("bad encoder shape");
    const int h = opts.hidden;
    w_in_ = params_.add("gnn.in.W", feature::kDim, h);
    b_in_ = params_.add("gnn.in.b", 1, h);
    for (int l = 0; l < opts.layers; ++l) {
      w_layer_.push_back(params_.add("gnn.layer" + std::to_string(l) + ".W", (1 + 2 * kEdgeKindCount) * h, h));
      b_layer_.push_back(params_.add("gnn.layer" + std::to_string(l) + ".b", 1, h));
    }
    w_out_ = params_.add("gnn.out.W", h, opts.embed);
    b_out_ = params_.add("gnn.out.b", 1, opts.embed);
  }

  void init(Rng& rng) {
    for (auto& p : params_) {
      if (p.value.rows() == 1) {
        p.value.setZero();
      } else {
        xavier_uniform(p.value, rng);
      }
    }
  }

  const EncoderOptions& options() const { return opts_; }
  ParameterList<Scalar>& params() { return params_; }
  const ParameterList<Scalar>& params() const { return params_; }

  /// One embedding row per graph in the batch.
  Mat<Scalar> forward(const GraphBatch<Scalar>& b, Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.h.clear();
    c.concat.clear();
    const Eigen::Index n = b.x.rows();
    const int h = opts_.hidden;
    c.h.push_back(act(((b.x * W(w_in_)).rowwise() + V(b_in_)).eval()));
    for (int l = 0; l < opts_.layers; ++l) {
      const Mat<Scalar>& hl = c.h.back();
      Mat<Scalar> cat(n, (1 + 2 * kEdgeKindCount) * h);
      cat.leftCols(h) = hl;
      for (int k = 0; k < kEdgeKindCount; ++k) {
        cat.middleCols((1 + k) * h, h) = b.adj[static_cast<std::size_t>(k)] * hl;
        cat.middleCols((1 + kEdgeKindCount + k) * h, h) = b.adj_t[static_cast<std::size_t>(k)] * hl;
      }
      Mat<Scalar> z = (cat * W(w_layer_[static_cast<std::size_t>(l)])).rowwise() +
                      V(b_layer_[static_cast<std::size_t>(l)]);
      c.concat.push_back(std::move(cat));
      c.h.push_back(act(z));
    }
    c.pooled.resize(b.num_graphs(), h);
    for (Eigen::Index g = 0; g < b.num_graphs(); ++g) {
      Eigen::Index off = b.offsets[static_cast<std::size_t>(g)];
      Eigen::Index cnt = b.offsets[static_cast<std::size_t>(g) + 1] - off;
      c.pooled.row(g) = c.h.back().middleRows(off, cnt).colwise().sum() / static_cast<Scalar>(cnt);
    }
    return (c.pooled * W(w_out_)).rowwise() + V(b_out_);
  }

  RowVec<Scalar> encode(const ProgramGraph& g) const { return forward(make_batch<Scalar>(g)).row(0); }

  /// Accumulates parameter gradients for d(loss)/d(embeddings) = d_out.
  void backward(const GraphBatch<Scalar>& b, const Cache& c, const Mat<Scalar>& d_out) {
    const int h = opts_.hidden;
    grad(w_out_) += c.pooled.transpose() * d_out;
    grad(b_out_) += d_out.colwise().sum();
    Mat<Scalar> d_pooled = d_out * W(w_out_).transpose();
    Mat<Scalar> dh(b.x.rows(), h);
    for (Eigen::Index g = 0; g < b.num_graphs(); ++g) {
      Eigen::Index off = b.offsets[static_cast<std::size_t>(g)];
      Eigen::Index cnt = b.offsets[static_cast<std::size_t>(g) + 1] - off;
      dh.middleRows(off, cnt).rowwise() = d_pooled.row(g) / static_cast<Scalar>(cnt);
    }
    for (int l = opts_.layers - 1; l >= 0; --l) {
      Mat<Scalar> dz = act_grad(c.h[static_cast<std::size_t>(l) + 1], dh);
      const Mat<Scalar>& cat = c.concat[static_cast<std::size_t>(l)];
      grad(w_layer_[static_cast<std::size_t>(l)]) += cat.transpose() * dz;
      grad(b_layer_[static_cast<std::size_t>(l)]) += dz.colwise().sum();
      Mat<Scalar> dcat = dz * W(w_layer_[static_cast<std::size_t>(l)]).transpose();
      dh = dcat.leftCols(h);
      for (int k = 0; k < kEdgeKindCount; ++k) {
        dh += b.adj_t[static_cast<std::size_t>(k)] * dcat.middleCols((1 + k) * h, h);
        dh += b.adj[static_cast<std::size_t>(k)] * dcat.middleCols((1 + kEdgeKindCount + k) * h, h);
      }
    }
    Mat<Scalar> dz0 = act_grad(c.h[0], dh);
    grad(w_in_) += b.x.transpose() * dz0;
    grad(b_in_) += dz0.colwise().sum();
  }

 private:
  const Mat<Scalar>& W(std::size_t i) const { return params_[i].value; }
  auto V(std::size_t i) const { return params_[i].value.row(0); }
  Mat<Scalar>& grad(std::size_t i) { return params_[i].grad; }

  Mat<Scalar> act(const Mat<Scalar>& z) const {
    if (opts_.linear) return z;
    return z.array().tanh().matrix();
  }
  // dL/dz from dL/dh given h = act(z).
  Mat<Scalar> act_grad(const Mat<Scalar>& h, const Mat<Scalar>& dh) const {
    if (opts_.linear) return dh;
    return (dh.array() * (Scalar(1) - h.array().square())).matrix();
  }

  EncoderOptions opts_;
  ParameterList<Scalar> params_;
  std::size_t w_in_ = 0, b_in_ = 0, w_out_ = 0, b_out_ = 0;
  std::vector<std::size_t> w_layer_, b_layer_;
};

using GraphEncoder = BasicGraphEncoder<double>;

}  // namespace pragmafill

#endif  // PRAGMAFILL_ENCODER_HPP_
