// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Grammar-constrained generation of `id=value,...<eos>` targets.

#ifndef PRAGMAFILL_DECODING_HPP_
#define PRAGMAFILL_DECODING_HPP_

#include <cstdint>
#include <vector>

#include "pragmafill/dataset.hpp"
#include "pragmafill/kernel.hpp"
#include "pragmafill/sequence_model.hpp"

namespace pragmafill {

/// Token positions of a kernel's target. Ids, `=`, `,` and EOS are forced;
/// value positions offer the slot's domain restricted to values the
/// tokenizer can spell.
struct TargetGrammar {
  struct Position {
    std::vector<int> tokens;          // one entry when forced
    int slot = -1;                    // value positions only
    std::vector<PragmaValue> values;  // parallel to tokens at value positions
  };
  std::vector<PragmaSlot> slots;
  std::vector<Position> positions;  // ends with EOS

  /// Maps one choice index per position back to a configuration.
  PragmaConfig config_from_choices(const std::vector<int>& choices) const;
  std::vector<int> tokens_from_choices(const std::vector<int>& choices) const;
};

TargetGrammar make_target_grammar(const KernelAst& ast, const Tokenizer& tok, const SpaceCaps& caps = {});

struct DecodeMode {
  bool sample = false;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  static DecodeMode greedy() { return {}; }
  static DecodeMode sampled(std::uint64_t seed, double temperature = 1.0) { return {true, seed, temperature}; }
};

/// Everything needed to back-propagate through a batch of decodes.
struct DecodeTrace {
  std::vector<Mat<double>> states;  // state scored at each position
  std::vector<SequenceModel::StepCache> steps;  // transition out of position j
  std::vector<std::vector<int>> choices;  // [row][position]
  std::vector<Mat<double>> probs;  // per position: rows x |allowed| masked probabilities
  std::vector<double> log_prob;  // per row, sum over positions
};

/// Decodes one target per row of `state` (the model state right after SEP).
/// Sampling row b uses Rng(modes[b].seed).
DecodeTrace decode_from_state(const SequenceModel& model, const Mat<double>& state, const TargetGrammar& grammar,
                              const std::vector<DecodeMode>& modes, bool keep_trace);

/// Runs the prefix (which must end with SEP) and decodes one target.
PragmaConfig decode_constrained(const SequenceModel& model, const std::vector<int>& prefix,
                                const TargetGrammar& grammar, DecodeMode mode);

/// State after consuming `tokens` from the initial state.
Mat<double> run_prefix(const SequenceModel& model, const std::vector<int>& tokens,
                       std::vector<SequenceModel::StepCache>* caches = nullptr);

}  // namespace pragmafill

#endif  // PRAGMAFILL_DECODING_HPP_
