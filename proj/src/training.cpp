// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include "pragmafill/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pragmafill/checkpoint.hpp"

namespace pragmafill {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string fixed(double v, int digits) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
  return std::string(buf, r.ptr);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

// States, transitions and output gradients of one batched pass over the
// target positions, starting from the state right after SEP.
struct Branch {
  std::vector<Mat<double>> states;
  std::vector<SequenceModel::StepCache> steps;
  std::vector<Mat<double>> dlogits;  // empty where a position carries no loss
};

// Gradient with respect to the starting state, summed over rows.
Mat<double> backprop_branch(SequenceModel& model, const Branch& br) {
  const std::size_t n = br.states.size();
  Mat<double> dh = Mat<double>::Zero(br.states[0].rows(), model.width());
  for (std::size_t j = n; j-- > 0;) {
    if (br.dlogits[j].size()) model.output_backward(br.states[j], br.dlogits[j], dh);
    if (j == 0) break;
    Mat<double> prev = Mat<double>::Zero(dh.rows(), dh.cols());
    model.step_backward(br.steps[j - 1], dh, prev);
    dh = std::move(prev);
  }
  return dh.colwise().sum();
}

// Teacher forcing: labels[b][j] is scored at position j. With `coef`, row
// b's output gradient is coef[b] * (softmax - onehot).
std::vector<double> teacher_forced(const SequenceModel& model, const Mat<double>& h0,
                                   const std::vector<std::vector<int>>& labels, const std::vector<double>* coef,
                                   Branch* br) {
  const std::size_t rows = labels.size();
  const std::size_t n = labels[0].size();
  std::vector<double> ce(rows, 0.0);
  Mat<double> h = h0;
  if (br) {
    br->states.assign(n, {});
    br->steps.assign(n ? n - 1 : 0, {});
    br->dlogits.assign(n, {});
  }
  std::vector<int> next(rows);
  for (std::size_t j = 0; j < n; ++j) {
    Mat<double> lp = log_softmax_rows<double>(model.output(h));
    for (std::size_t b = 0; b < rows; ++b) ce[b] -= lp(static_cast<Eigen::Index>(b), labels[b][j]);
    if (br) {
      Mat<double> g = lp.array().exp().matrix();
      for (std::size_t b = 0; b < rows; ++b) {
        auto r = static_cast<Eigen::Index>(b);
        g(r, labels[b][j]) -= 1.0;
        g.row(r) *= (*coef)[b];
      }
      br->states[j] = h;
      br->dlogits[j] = std::move(g);
    }
    if (j + 1 == n) break;
    for (std::size_t b = 0; b < rows; ++b) next[b] = labels[b][j];
    h = model.step(h, next, br ? &br->steps[j] : nullptr);
  }
  for (double& c : ce) c /= static_cast<double>(n);
  return ce;
}

// Log-probabilities of fixed choices under the grammar-masked, tempered
// distribution. With `coef`, value positions get coef[b] * d(log p)/d(logits).
std::vector<double> score_choices(const SequenceModel& model, const Mat<double>& h0, const TargetGrammar& grammar,
                                  const std::vector<std::vector<int>>& choices, double temperature,
                                  const std::vector<double>* coef, Branch* br) {
  const std::size_t rows = choices.size();
  const std::size_t n = grammar.positions.size();
  std::vector<double> log_prob(rows, 0.0);
  Mat<double> h = h0;
  if (br) {
    br->states.assign(n, {});
    br->steps.assign(n ? n - 1 : 0, {});
    br->dlogits.assign(n, {});
  }
  std::vector<int> next(rows);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& pos = grammar.positions[j];
    if (pos.tokens.size() > 1) {
      Mat<double> logits = model.output(h);
      Mat<double> g;
      if (br) g = Mat<double>::Zero(static_cast<Eigen::Index>(rows), model.vocab());
      const std::size_t k = pos.tokens.size();
      std::vector<double> p(k);
      for (std::size_t b = 0; b < rows; ++b) {
        auto r = static_cast<Eigen::Index>(b);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i) mx = std::max(mx, logits(r, pos.tokens[i]) / temperature);
        double z = 0;
        for (std::size_t i = 0; i < k; ++i) {
          p[i] = std::exp(logits(r, pos.tokens[i]) / temperature - mx);
          z += p[i];
        }
        for (auto& x : p) x /= z;
        std::size_t pick = static_cast<std::size_t>(choices[b][j]);
        log_prob[b] += std::log(p[pick]);
        if (br) {
          for (std::size_t i = 0; i < k; ++i) {
            g(r, pos.tokens[i]) = (*coef)[b] * ((i == pick ? 1.0 : 0.0) - p[i]) / temperature;
          }
        }
      }
      if (br) br->dlogits[j] = std::move(g);
    }
    if (br) br->states[j] = h;
    if (j + 1 == n) break;
    for (std::size_t b = 0; b < rows; ++b) next[b] = pos.tokens[static_cast<std::size_t>(choices[b][j])];
    h = model.step(h, next, br ? &br->steps[j] : nullptr);
  }
  return log_prob;
}

std::vector<int> choices_for(const TargetGrammar& grammar, const PragmaConfig& config) {
  std::vector<int> out;
  for (const auto& pos : grammar.positions) {
    if (pos.slot < 0) {
      out.push_back(0);
      continue;
    }
    const PragmaValue* v = config.find(grammar.slots[static_cast<std::size_t>(pos.slot)].id);
    if (!v) throw std::invalid_argument("forced design misses slot " + grammar.slots[static_cast<std::size_t>(pos.slot)].id);
    auto it = std::find(pos.values.begin(), pos.values.end(), *v);
    if (it == pos.values.end()) throw std::invalid_argument("forced design has a value outside the grammar");
    out.push_back(static_cast<int>(it - pos.values.begin()));
  }
  return out;
}

std::vector<int> prefix_of(const TrainingExample& ex) {
  std::size_t sep = ex.sep_position();
  return {ex.tokens.begin(), ex.tokens.begin() + static_cast<std::ptrdiff_t>(sep) + 1};
}

std::vector<int> target_of(const TrainingExample& ex) {
  std::size_t sep = ex.sep_position();
  for (std::size_t t = 0; t < ex.tokens.size(); ++t) {
    if (static_cast<bool>(ex.loss_mask[t]) != (t > sep)) throw std::invalid_argument("loss mask must cover exactly the target");
  }
  return {ex.tokens.begin() + static_cast<std::ptrdiff_t>(sep) + 1, ex.tokens.end()};
}

bool is_perfect_nest(const KernelAst& ast) {
  if (ast.body.size() != 1 || !std::holds_alternative<LoopRef>(ast.body[0])) return false;
  for (std::size_t i = 0; i < ast.loops.size(); ++i) {
    const auto& body = ast.loops[i].body;
    if (!ast.has_child_loops(i)) continue;
    if (body.size() != 1) return false;
  }
  return true;
}

std::int64_t identity_cycles(const KernelAst& ast) {
  std::int64_t trips = 1;
  for (const auto& l : ast.loops) trips *= l.trip_count;
  return trips * static_cast<std::int64_t>(ast.statement_count());
}

}  // namespace

// ---------------------------------------------------------------------------
// Pretraining

double latency_target(const DesignPoint& p) { return p.valid ? std::log1p(p.perf) : 0.0; }

double PretrainResult::predict(const ProgramGraph& g) const {
  return target_mean + target_std * ((encoder.encode(g) * head_w)(0, 0) + head_b);
}

std::vector<double> PretrainResult::predict(const std::vector<ProgramGraph>& graphs) const {
  std::vector<double> out;
  const std::size_t chunk = 64;
  for (std::size_t i = 0; i < graphs.size(); i += chunk) {
    std::vector<const ProgramGraph*> ptrs;
    for (std::size_t j = i; j < std::min(graphs.size(), i + chunk); ++j) ptrs.push_back(&graphs[j]);
    Mat<double> e = encoder.forward(make_batch<double>(ptrs));
    Mat<double> y = e * head_w;
    for (Eigen::Index r = 0; r < y.rows(); ++r) out.push_back(target_mean + target_std * (y(r, 0) + head_b));
  }
  return out;
}

PretrainResult pretrain_gnn(const std::vector<ProgramGraph>& graphs, const std::vector<double>& targets,
                            const PretrainConfig& config) {
  if (graphs.empty()) throw std::invalid_argument("pretrain_gnn: empty training set");
  if (graphs.size() != targets.size()) throw std::invalid_argument("pretrain_gnn: one target per graph");
  if (config.epochs < 1 || config.batch_size < 1) throw std::invalid_argument("pretrain_gnn: bad schedule");
  const std::size_t n = graphs.size();

  PretrainResult r{GraphEncoder(config.encoder), {}, 0, 0, 1, {}};
  r.target_mean = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(n);
  double var = 0;
  for (double t : targets) var += (t - r.target_mean) * (t - r.target_mean);
  r.target_std = std::sqrt(var / static_cast<double>(n));
  if (!(r.target_std > 1e-12)) r.target_std = 1.0;
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = (targets[i] - r.target_mean) / r.target_std;

  Rng init(derive_seed(config.seed, 0));
  r.encoder.init(init);
  ParameterList<double> head;
  std::size_t hw = head.add("head.W", config.encoder.embed, 1);
  std::size_t hb = head.add("head.b", 1, 1);
  xavier_uniform(head[hw].value, init);

  AdamOptions<double> opts;
  opts.lr = config.lr;
  Adam<double> enc_opt(r.encoder.params(), opts);
  Adam<double> head_opt(head, opts);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1));
    rng.shuffle(order);
    double total = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      std::vector<const ProgramGraph*> ptrs;
      for (std::size_t i = start; i < end; ++i) ptrs.push_back(&graphs[order[i]]);
      auto batch = make_batch<double>(ptrs);
      GraphEncoder::Cache cache;
      Mat<double> e = r.encoder.forward(batch, &cache);
      Mat<double> pred = (e * head[hw].value).array() + head[hb].value(0, 0);
      const auto b = static_cast<double>(end - start);
      Mat<double> diff(pred.rows(), 1);
      for (std::size_t i = start; i < end; ++i) diff(static_cast<Eigen::Index>(i - start), 0) = pred(static_cast<Eigen::Index>(i - start), 0) - z[order[i]];
      total += diff.squaredNorm();
      Mat<double> dpred = 2.0 * diff / b;
      r.encoder.params().zero_grad();
      head.zero_grad();
      head[hw].grad = e.transpose() * dpred;
      head[hb].grad(0, 0) = dpred.sum();
      r.encoder.backward(batch, cache, dpred * head[hw].value.transpose());
      enc_opt.step(r.encoder.params());
      head_opt.step(head);
    }
    double mean = total / static_cast<double>(n);
    if (!std::isfinite(mean)) throw std::runtime_error("pretraining diverged at epoch " + std::to_string(epoch + 1));
    r.epoch_loss.push_back(mean);
  }
  r.encoder.params().zero_grad();
  r.head_w = head[hw].value;
  r.head_b = head[hb].value(0, 0);
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: length mismatch");
  if (a.size() < 2) return 0;
  std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  double n = static_cast<double>(a.size());
  double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0;
  return sab / std::sqrt(saa * sbb);
}

Checkpoint to_checkpoint(const PretrainResult& r) {
  Checkpoint c = to_checkpoint(r.encoder);
  c.tensors.emplace_back("head.W", r.head_w);
  Mat<double> stats(1, 3);
  stats << r.head_b, r.target_mean, r.target_std;
  c.tensors.emplace_back("head.stats", stats);
  return c;
}

PretrainResult pretrain_result_from_checkpoint(const Checkpoint& c) {
  PretrainResult r{encoder_from_checkpoint(c), c.tensor("head.W"), 0, 0, 1, {}};
  const Mat<double>& s = c.tensor("head.stats");
  if (s.size() != 3 || r.head_w.rows() != r.encoder.options().embed) throw std::runtime_error("bad regression head");
  r.head_b = s(0, 0);
  r.target_mean = s(0, 1);
  r.target_std = s(0, 2);
  return r;
}

// ---------------------------------------------------------------------------
// Fine-tuning

void TrainConfig::check() const {
  if (epochs < 1) throw std::invalid_argument("train.epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be at least 1");
  if (!(beta >= 0 && beta < 1)) throw std::invalid_argument("train.beta must lie in [0, 1)");
  if (!(temperature > 0)) throw std::invalid_argument("train.temperature must be positive");
  if (!(lr > 0)) throw std::invalid_argument("train.lr must be positive");
  if (width < 1) throw std::invalid_argument("model.width must be positive");
}

LiftContext::LiftContext(const Corpus& corpus, const Tokenizer& tok, const GraphEncoder& encoder, SpaceCaps caps)
    : corpus_(corpus), tok_(tok), encoder_(encoder), caps_(caps) {}

const KernelAst& LiftContext::ast(const std::string& kernel_id) {
  auto it = asts_.find(kernel_id);
  if (it == asts_.end()) {
    auto src = corpus_.kernels.find(kernel_id);
    if (src == corpus_.kernels.end()) throw std::invalid_argument("unknown kernel " + kernel_id);
    it = asts_.emplace(kernel_id, parse_kernel(src->second)).first;
  }
  return it->second;
}

const TargetGrammar& LiftContext::grammar(const std::string& kernel_id) {
  auto it = grammars_.find(kernel_id);
  if (it == grammars_.end()) it = grammars_.emplace(kernel_id, make_target_grammar(ast(kernel_id), tok_, caps_)).first;
  return it->second;
}

const RowVec<double>& LiftContext::embedding(const std::string& kernel_id, const PragmaConfig& config) {
  const KernelAst& a = ast(kernel_id);
  auto key = std::make_pair(kernel_id, serialize_target(extract_slots(a), config));
  auto it = embeddings_.find(key);
  if (it == embeddings_.end()) it = embeddings_.emplace(key, encoder_.encode(build_graph(a, config))).first;
  return it->second;
}

const RowVec<double>& LiftContext::target_embedding(std::size_t point_index) {
  auto it = targets_.find(point_index);
  if (it == targets_.end()) {
    const DesignPoint& p = corpus_.points.at(point_index);
    it = targets_.emplace(point_index, embedding(p.kernel_id, p.point)).first;
  }
  return it->second;
}

std::vector<LossParts> batch_loss(SequenceModel& model, LiftContext& ctx,
                                  const std::vector<const TrainingExample*>& batch,
                                  const std::vector<std::uint64_t>& seeds, Baseline& baseline,
                                  const TrainConfig& config, bool accumulate,
                                  const std::optional<PragmaConfig>& forced) {
  if (batch.empty()) return {};
  if (seeds.size() != batch.size()) throw std::invalid_argument("batch_loss: one seed per example");
  const std::size_t rows = batch.size();
  const std::string& kernel_id = batch[0]->kernel_id;
  std::vector<int> prefix = prefix_of(*batch[0]);
  std::vector<std::vector<int>> labels;
  for (const auto* ex : batch) {
    if (ex->kernel_id != kernel_id) throw std::invalid_argument("batch_loss: examples from different kernels");
    if (ex->tokens.size() <= prefix.size() || !std::equal(prefix.begin(), prefix.end(), ex->tokens.begin())) {
      throw std::invalid_argument("batch_loss: examples of one kernel must share the source prefix");
    }
    model.check_context(ex->tokens.size());
    labels.push_back(target_of(*ex));
  }
  const TargetGrammar& grammar = ctx.grammar(kernel_id);
  const std::size_t n_pos = grammar.positions.size();
  for (const auto& l : labels) {
    if (l.size() != n_pos) throw std::invalid_argument("batch_loss: target length does not match the kernel grammar");
  }

  std::vector<SequenceModel::StepCache> prefix_steps;
  Mat<double> h_sep = run_prefix(model, prefix, accumulate ? &prefix_steps : nullptr);
  Mat<double> h0 = h_sep.replicate(static_cast<Eigen::Index>(rows), 1);

  // Decode first so the baseline for this batch is known before any gradient.
  std::vector<std::vector<int>> choices;
  if (forced) {
    choices.assign(rows, choices_for(grammar, *forced));
  } else {
    std::vector<DecodeMode> modes;
    for (auto s : seeds) modes.push_back(DecodeMode::sampled(s, config.temperature));
    choices = decode_from_state(model, h0, grammar, modes, false).choices;
  }

  const KernelAst& ast = ctx.ast(kernel_id);
  std::vector<LossParts> parts(rows);
  for (std::size_t b = 0; b < rows; ++b) {
    parts[b].weight = batch[b]->weight;
    parts[b].predicted = grammar.config_from_choices(choices[b]);
  }
  const double base = baseline.initialized ? baseline.value : 0.0;
  for (std::size_t b = 0; b < rows; ++b) {
    if (!validate_config(ast, parts[b].predicted).empty()) {
      parts[b].d_embed = 4.0 * std::max(base, 1.0);
    } else {
      const RowVec<double>& e_pred = ctx.embedding(kernel_id, parts[b].predicted);
      parts[b].d_embed = (e_pred - ctx.target_embedding(batch[b]->point_index)).squaredNorm();
    }
  }
  const double b_used = baseline.initialized ? baseline.value : parts[0].d_embed;

  const auto inv_rows = 1.0 / static_cast<double>(rows);
  const auto inv_pos = 1.0 / static_cast<double>(n_pos);
  std::vector<double> ce_coef(rows), pg_coef(rows);
  for (std::size_t b = 0; b < rows; ++b) {
    ce_coef[b] = parts[b].weight * inv_rows * inv_pos;
    pg_coef[b] = parts[b].weight * config.alpha * (parts[b].d_embed - b_used) * inv_rows * inv_pos;
  }

  Branch tf, pg;
  std::vector<double> ce = teacher_forced(model, h0, labels, accumulate ? &ce_coef : nullptr, accumulate ? &tf : nullptr);
  const bool pg_grad = accumulate && config.alpha != 0.0;
  std::vector<double> log_prob = score_choices(model, h0, grammar, choices, config.temperature,
                                               pg_grad ? &pg_coef : nullptr, pg_grad ? &pg : nullptr);

  for (std::size_t b = 0; b < rows; ++b) {
    LossParts& p = parts[b];
    p.l_ce = ce[b];
    p.baseline = b_used;
    p.surrogate = config.alpha * (p.d_embed - b_used) * log_prob[b] * inv_pos;
    p.total = p.weight * p.l_ce + p.weight * p.surrogate;
  }

  if (accumulate) {
    Mat<double> dh = backprop_branch(model, tf);
    if (pg_grad) dh += backprop_branch(model, pg);
    for (std::size_t t = prefix_steps.size(); t-- > 0;) {
      Mat<double> prev = Mat<double>::Zero(1, model.width());
      model.step_backward(prefix_steps[t], dh, prev);
      dh = std::move(prev);
    }
  }

  for (const auto& p : parts) {
    if (!baseline.initialized) {
      baseline.initialized = true;
      baseline.value = p.d_embed;
    } else {
      baseline.value = config.beta * baseline.value + (1.0 - config.beta) * p.d_embed;
    }
  }
  return parts;
}

LossParts compute_loss(SequenceModel& model, LiftContext& ctx, const TrainingExample& example, std::uint64_t seed,
                       Baseline& baseline, const TrainConfig& config, bool accumulate,
                       const std::optional<PragmaConfig>& forced) {
  return batch_loss(model, ctx, {&example}, {seed}, baseline, config, accumulate, forced)[0];
}

double example_cross_entropy(SequenceModel& model, const TrainingExample& ex, const std::vector<int>& labels) {
  return sequence_cross_entropy(model, ex.tokens, labels, ex.loss_mask, false);
}

double mean_cross_entropy(const SequenceModel& model, const std::vector<TrainingExample>& examples) {
  if (examples.empty()) return 0.0;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < examples.size(); ++i) groups[examples[i].kernel_id].push_back(i);
  double total = 0;
  const std::size_t chunk = 64;
  for (const auto& [id, idx] : groups) {
    std::vector<int> prefix = prefix_of(examples[idx[0]]);
    Mat<double> h = run_prefix(model, prefix);
    for (std::size_t s = 0; s < idx.size(); s += chunk) {
      std::vector<std::vector<int>> labels;
      for (std::size_t k = s; k < std::min(idx.size(), s + chunk); ++k) labels.push_back(target_of(examples[idx[k]]));
      for (const auto& l : labels) {
        if (l.size() != labels[0].size()) throw std::invalid_argument("targets of one kernel differ in length");
      }
      for (double c : teacher_forced(model, h.replicate(static_cast<Eigen::Index>(labels.size()), 1), labels, nullptr, nullptr)) {
        total += c;
      }
    }
  }
  return total / static_cast<double>(examples.size());
}

std::string format_metrics(const EpochMetrics& m) {
  return "epoch=" + std::to_string(m.epoch) + " mean_ce=" + fixed(m.mean_ce, 6) +
         " mean_gnn_distance=" + fixed(m.mean_gnn_distance, 6) + " val_ce=" + fixed(m.val_ce, 6) +
         " wall_seconds=" + fixed(m.wall_seconds, 3);
}

SequenceModel make_model(const Tokenizer& tok, const TrainConfig& config, std::size_t longest_example) {
  SequenceModel m({static_cast<int>(tok.size()), config.width, std::max(4096, static_cast<int>(longest_example))});
  Rng rng(derive_seed(config.seed, 0));
  m.init(rng);
  return m;
}

std::vector<EpochMetrics> train(SequenceModel& model, LiftContext& ctx, const std::vector<TrainingExample>& train_set,
                                const std::vector<TrainingExample>& validation, const TrainConfig& config,
                                const std::function<void(const EpochMetrics&, const SequenceModel&)>& on_epoch) {
  config.check();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  AdamOptions<double> opts;
  opts.lr = config.lr;
  opts.clip_norm = config.clip_norm;
  Adam<double> opt(model.params(), opts);
  Baseline baseline;

  std::map<std::string, std::vector<std::size_t>> by_kernel;
  for (std::size_t i = 0; i < train_set.size(); ++i) by_kernel[train_set[i].kernel_id].push_back(i);

  std::vector<EpochMetrics> out;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    auto start = std::chrono::steady_clock::now();
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::vector<std::vector<std::size_t>> batches;
    for (auto [id, idx] : by_kernel) {
      rng.shuffle(idx);
      for (std::size_t s = 0; s < idx.size(); s += static_cast<std::size_t>(config.batch_size)) {
        batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(s),
                             idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), s + static_cast<std::size_t>(config.batch_size))));
      }
    }
    rng.shuffle(batches);

    const std::uint64_t sample_stream = derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch));
    std::uint64_t position = 0;
    double ce_sum = 0, d_sum = 0;
    for (const auto& idx : batches) {
      std::vector<const TrainingExample*> exs;
      std::vector<std::uint64_t> seeds;
      for (std::size_t i : idx) {
        exs.push_back(&train_set[i]);
        seeds.push_back(derive_seed(sample_stream, position++));
      }
      model.params().zero_grad();
      auto parts = batch_loss(model, ctx, exs, seeds, baseline, config, true);
      for (const auto& p : parts) {
        if (!std::isfinite(p.total)) {
          throw std::runtime_error("training diverged: non-finite loss in epoch " + std::to_string(epoch));
        }
        ce_sum += p.l_ce;
        d_sum += p.d_embed;
      }
      if (!std::isfinite(model.params().grad_norm())) {
        throw std::runtime_error("training diverged: non-finite gradient in epoch " + std::to_string(epoch));
      }
      opt.step(model.params());
    }
    model.params().zero_grad();

    EpochMetrics m;
    m.epoch = epoch;
    m.mean_ce = ce_sum / static_cast<double>(train_set.size());
    m.mean_gnn_distance = d_sum / static_cast<double>(train_set.size());
    m.val_ce = mean_cross_entropy(model, validation);
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(m);
    if (on_epoch) on_epoch(m, model);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inference and evaluation

PragmaConfig predict(const SequenceModel& model, const Tokenizer& tok, const std::string& kernel_source,
                     const SpaceCaps& caps) {
  KernelAst ast = parse_kernel(kernel_source);
  TargetGrammar grammar = make_target_grammar(ast, tok, caps);
  std::vector<int> prefix = tok.encode(kernel_source);
  prefix.push_back(Tokenizer::kSep);
  return decode_constrained(model, prefix, grammar, DecodeMode::greedy());
}

EvalReport evaluate(const SequenceModel& model, const Tokenizer& tok, const Corpus& corpus,
                    const std::vector<std::string>& kernel_ids, const EvalConfig& config,
                    std::vector<std::string>* warnings) {
  auto warn = [&](const std::string& msg) {
    if (warnings) {
      warnings->push_back(msg);
    } else {
      std::clog << "warning: " << msg << '\n';
    }
  };
  EvalReport rep;
  std::size_t grammar_ok = 0;
  for (const auto& id : kernel_ids) {
    auto src = corpus.kernels.find(id);
    if (src == corpus.kernels.end()) throw std::invalid_argument("evaluate: unknown kernel " + id);
    KernelAst ast = parse_kernel(src->second);
    ConfigSpace space(ast, config.caps);
    Rng rng(derive_seed(config.seed, fnv1a(id)));

    KernelEval row;
    row.kernel_id = id;
    row.space_size = space.size();

    // Baseline pool: all valid configs for small spaces, rejection samples
    // otherwise.
    std::vector<double> random_cycles;
    std::optional<std::int64_t> optimum;
    if (space.size() <= config.exhaustive_limit) {
      std::vector<std::int64_t> valid;
      for (std::uint64_t i = 0; i < space.size(); ++i) {
        OracleReport r = estimate(ast, space.at(i), config.budget);
        if (r.valid) valid.push_back(r.cycles);
      }
      row.valid_configs = valid.size();
      if (!valid.empty()) {
        optimum = *std::min_element(valid.begin(), valid.end());
        for (int k = 0; k < config.n_random; ++k) random_cycles.push_back(static_cast<double>(valid[rng.below(valid.size())]));
      }
    } else {
      std::uint64_t attempts = 0, limit = 1000ULL * static_cast<std::uint64_t>(std::max(1, config.n_random));
      while (random_cycles.size() < static_cast<std::size_t>(config.n_random) && attempts++ < limit) {
        OracleReport r = estimate(ast, space.at(rng.below(space.size())), config.budget);
        if (r.valid) random_cycles.push_back(static_cast<double>(r.cycles));
      }
      row.valid_configs = random_cycles.size();
    }
    if (random_cycles.empty()) {
      warn("kernel " + id + " has no valid configuration under the budget; skipped");
      rep.skipped.push_back(id);
      continue;
    }

    PragmaConfig pred = predict(model, tok, src->second, config.caps);
    if (validate_config(ast, pred).empty()) ++grammar_ok;
    OracleReport pr = estimate(ast, pred, config.budget);
    OracleReport dr = estimate(ast, default_config(ast), config.budget);
    row.predicted = serialize_target(extract_slots(ast), pred);
    row.predicted_cycles = pr.cycles;
    row.predicted_units = pr.units;
    row.predicted_valid = pr.valid;
    row.default_cycles = dr.cycles;
    row.effective_cycles = pr.valid ? pr.cycles : dr.cycles;
    if (is_perfect_nest(ast)) row.identity_cycles = identity_cycles(ast);
    row.random_median = median(random_cycles);
    row.optimum = optimum;
    if (optimum) row.regret = static_cast<double>(row.effective_cycles) / static_cast<double>(*optimum);
    row.speedup = row.random_median / static_cast<double>(row.effective_cycles);
    rep.rows.push_back(std::move(row));
  }

  if (!rep.rows.empty()) {
    const auto n = static_cast<double>(rep.rows.size());
    double log_sum = 0;
    std::size_t valid = 0;
    std::vector<double> pred, rnd, reg;
    for (const auto& r : rep.rows) {
      log_sum += std::log(r.speedup);
      valid += r.predicted_valid;
      pred.push_back(static_cast<double>(r.effective_cycles));
      rnd.push_back(r.random_median);
      if (r.regret) reg.push_back(*r.regret);
    }
    rep.fraction_grammar_valid = static_cast<double>(grammar_ok) / n;
    rep.fraction_oracle_valid = static_cast<double>(valid) / n;
    rep.geomean_speedup = std::exp(log_sum / n);
    rep.median_predicted_cycles = median(pred);
    rep.median_random_cycles = median(rnd);
    if (!reg.empty()) rep.median_regret = median(reg);
  }
  return rep;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << "kernel     valid  predicted  random_median  optimum  regret  speedup  prediction\n";
  std::size_t perfect = 0, identity_ok = 0;
  for (const auto& row : r.rows) {
    std::string id = row.kernel_id;
    id.resize(std::max<std::size_t>(id.size(), 10), ' ');
    out << id << ' ' << (row.predicted_valid ? "yes  " : "no   ") << "  " << row.effective_cycles << "  "
        << fixed(row.random_median, 1) << "  " << (row.optimum ? std::to_string(*row.optimum) : "-") << "  "
        << (row.regret ? fixed(*row.regret, 3) : "-") << "  " << fixed(row.speedup, 3) << "  "
        << (row.predicted.empty() ? "(no slots)" : row.predicted) << '\n';
    if (row.identity_cycles) {
      ++perfect;
      identity_ok += row.default_cycles == *row.identity_cycles;
    }
  }
  out << '\n';
  out << "kernels evaluated: " << r.rows.size() << '\n';
  out << "kernels skipped: " << r.skipped.size() << '\n';
  out << "grammar-valid predictions: " << fixed(100 * r.fraction_grammar_valid, 1) << "%\n";
  out << "oracle-valid predictions: " << fixed(100 * r.fraction_oracle_valid, 1) << "%\n";
  out << "median predicted cycles: " << fixed(r.median_predicted_cycles, 1) << '\n';
  out << "median random cycles: " << fixed(r.median_random_cycles, 1) << '\n';
  out << "geomean speedup vs random median: " << fixed(r.geomean_speedup, 4) << "x\n";
  out << "median regret vs optimum: " << (r.median_regret ? fixed(*r.median_regret, 4) + "x" : "-") << '\n';
  out << "sanity: default cycles match the identity formula on " << identity_ok << " of " << perfect
      << " perfect nests\n";
  return out.str();
}

json report_to_json(const EvalReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j;
    j["kernel_id"] = row.kernel_id;
    j["predicted"] = row.predicted;
    j["predicted_cycles"] = row.predicted_cycles;
    j["predicted_units"] = row.predicted_units;
    j["predicted_valid"] = row.predicted_valid;
    j["effective_cycles"] = row.effective_cycles;
    j["default_cycles"] = row.default_cycles;
    j["identity_cycles"] = row.identity_cycles ? json(*row.identity_cycles) : json(nullptr);
    j["random_median"] = row.random_median;
    j["optimum"] = row.optimum ? json(*row.optimum) : json(nullptr);
    j["regret"] = row.regret ? json(*row.regret) : json(nullptr);
    j["speedup"] = row.speedup;
    j["space_size"] = row.space_size;
    j["valid_configs"] = row.valid_configs;
    rows.push_back(std::move(j));
  }
  json out;
  out["rows"] = std::move(rows);
  out["skipped"] = r.skipped;
  out["fraction_grammar_valid"] = r.fraction_grammar_valid;
  out["fraction_oracle_valid"] = r.fraction_oracle_valid;
  out["geomean_speedup"] = r.geomean_speedup;
  out["median_predicted_cycles"] = r.median_predicted_cycles;
  out["median_random_cycles"] = r.median_random_cycles;
  out["median_regret"] = r.median_regret ? json(*r.median_regret) : json(nullptr);
  return out;
}

void export_embeddings(const SequenceModel& model, const GraphEncoder& encoder, const Corpus& corpus,
                       const Tokenizer& tok, const std::vector<std::size_t>& points, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "kernel_id,point_index";
  for (int i = 0; i < model.width(); ++i) out << ",h" << i;
  for (int i = 0; i < encoder.options().embed; ++i) out << ",g" << i;
  out << '\n';
  std::map<std::string, KernelAst> asts;
  for (std::size_t idx : points) {
    const DesignPoint& p = corpus.points.at(idx);
    const std::string& src = corpus.kernels.at(p.kernel_id);
    auto it = asts.find(p.kernel_id);
    if (it == asts.end()) it = asts.emplace(p.kernel_id, parse_kernel(src)).first;
    TrainingExample ex = linearize(src, p.point, 1.0, tok);
    Mat<double> h = run_prefix(model, ex.tokens);
    RowVec<double> g = encoder.encode(build_graph(it->second, p.point));
    out << p.kernel_id << ',' << idx;
    for (Eigen::Index i = 0; i < h.cols(); ++i) out << ',' << num(h(0, i));
    for (Eigen::Index i = 0; i < g.size(); ++i) out << ',' << num(g(i));
    out << '\n';
  }
  if (!out) throw std::runtime_error("error writing " + path.string());
}

}  // namespace pragmafill
