// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include "pragmafill/decoding.hpp"

#include <cmath>
#include <limits>

namespace pragmafill {

TargetGrammar make_target_grammar(const KernelAst& ast, const Tokenizer& tok, const SpaceCaps& caps) {
  TargetGrammar g;
  g.slots = extract_slots(ast);
  const int eq = tok.id("="), comma = tok.id(",");
  for (std::size_t s = 0; s < g.slots.size(); ++s) {
    if (s) g.positions.push_back({{comma}, -1, {}});
    g.positions.push_back({{tok.id(g.slots[s].id)}, -1, {}});
    g.positions.push_back({{eq}, -1, {}});
    TargetGrammar::Position value;
    value.slot = static_cast<int>(s);
    for (const auto& v : slot_domain(ast, g.slots[s], caps)) {
      auto id = tok.find(v.to_string());
      if (!id) continue;
      value.tokens.push_back(*id);
      value.values.push_back(v);
    }
    if (value.tokens.empty()) throw std::invalid_argument("no spellable value for slot " + g.slots[s].id);
    g.positions.push_back(std::move(value));
  }
  g.positions.push_back({{Tokenizer::kEos}, -1, {}});
  return g;
}

PragmaConfig TargetGrammar::config_from_choices(const std::vector<int>& choices) const {
  PragmaConfig c;
  for (std::size_t j = 0; j < positions.size(); ++j) {
    const Position& p = positions[j];
    if (p.slot < 0) continue;
    c.set(slots[static_cast<std::size_t>(p.slot)].id, p.values.at(static_cast<std::size_t>(choices.at(j))));
  }
  return c;
}

std::vector<int> TargetGrammar::tokens_from_choices(const std::vector<int>& choices) const {
  std::vector<int> out;
  for (std::size_t j = 0; j < positions.size(); ++j) {
    out.push_back(positions[j].tokens.at(static_cast<std::size_t>(choices.at(j))));
  }
  return out;
}

Mat<double> run_prefix(const SequenceModel& model, const std::vector<int>& tokens,
                       std::vector<SequenceModel::StepCache>* caches) {
  model.check_context(tokens.size());
  Mat<double> h = model.initial_state();
  if (caches) caches->resize(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) h = model.step(h, {tokens[t]}, caches ? &(*caches)[t] : nullptr);
  return h;
}

DecodeTrace decode_from_state(const SequenceModel& model, const Mat<double>& state, const TargetGrammar& grammar,
                              const std::vector<DecodeMode>& modes, bool keep_trace) {
  const Eigen::Index rows = state.rows();
  if (static_cast<Eigen::Index>(modes.size()) != rows) throw std::invalid_argument("one decode mode per row");
  std::vector<Rng> rngs;
  for (const auto& m : modes) rngs.emplace_back(m.seed);

  DecodeTrace tr;
  tr.choices.assign(static_cast<std::size_t>(rows), {});
  tr.log_prob.assign(static_cast<std::size_t>(rows), 0.0);
  Mat<double> h = state;
  const std::size_t n_pos = grammar.positions.size();
  for (std::size_t j = 0; j < n_pos; ++j) {
    const auto& pos = grammar.positions[j];
    std::vector<int> next(static_cast<std::size_t>(rows), pos.tokens[0]);
    Mat<double> probs;
    if (pos.tokens.size() == 1) {
      for (auto& c : tr.choices) c.push_back(0);
    } else {
      Mat<double> logits = model.output(h);
      const Eigen::Index k = static_cast<Eigen::Index>(pos.tokens.size());
      probs.resize(rows, k);
      for (Eigen::Index b = 0; b < rows; ++b) {
        const DecodeMode& mode = modes[static_cast<std::size_t>(b)];
        double temp = mode.sample ? mode.temperature : 1.0;
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < k; ++i) mx = std::max(mx, logits(b, pos.tokens[static_cast<std::size_t>(i)]) / temp);
        double z = 0;
        for (Eigen::Index i = 0; i < k; ++i) {
          probs(b, i) = std::exp(logits(b, pos.tokens[static_cast<std::size_t>(i)]) / temp - mx);
          z += probs(b, i);
        }
        probs.row(b) /= z;
        Eigen::Index pick = 0;
        if (mode.sample) {
          double u = rngs[static_cast<std::size_t>(b)].uniform();
          double acc = 0;
          pick = k - 1;
          for (Eigen::Index i = 0; i < k; ++i) {
            acc += probs(b, i);
            if (u < acc) {
              pick = i;
              break;
            }
          }
        } else {
          for (Eigen::Index i = 1; i < k; ++i) {
            if (probs(b, i) > probs(b, pick)) pick = i;
          }
        }
        tr.choices[static_cast<std::size_t>(b)].push_back(static_cast<int>(pick));
        tr.log_prob[static_cast<std::size_t>(b)] += std::log(probs(b, pick));
        next[static_cast<std::size_t>(b)] = pos.tokens[static_cast<std::size_t>(pick)];
      }
    }
    if (keep_trace) {
      tr.states.push_back(h);
      tr.probs.push_back(std::move(probs));
    }
    if (j + 1 < n_pos) {
      if (keep_trace) {
        tr.steps.emplace_back();
        h = model.step(h, next, &tr.steps.back());
      } else {
        h = model.step(h, next);
      }
    }
  }
  return tr;
}

PragmaConfig decode_constrained(const SequenceModel& model, const std::vector<int>& prefix,
                                const TargetGrammar& grammar, DecodeMode mode) {
  if (prefix.empty() || prefix.back() != Tokenizer::kSep) throw std::invalid_argument("prefix must end with SEP");
  model.check_context(prefix.size() + grammar.positions.size());
  Mat<double> h = run_prefix(model, prefix);
  DecodeTrace tr = decode_from_state(model, h, grammar, {mode}, false);
  return grammar.config_from_choices(tr.choices[0]);
}

}  // namespace pragmafill
