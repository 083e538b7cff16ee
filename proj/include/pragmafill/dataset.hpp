// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Word-level tokenizer and `source <sep> target <eos>` training examples.

#ifndef PRAGMAFILL_DATASET_HPP_
#define PRAGMAFILL_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pragmafill/corpus.hpp"
#include "pragmafill/weighting.hpp"

namespace pragmafill {

/// Splits text into identifier/number runs, whitespace runs, two-character
/// operators and single punctuation characters. Concatenating the pieces
/// gives back the input.
std::vector<std::string> split_tokens(std::string_view text);

class Tokenizer {
 public:
  static constexpr int kSep = 0;
  static constexpr int kEos = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;

  /// `tokens` must start with the four specials in id order.
  explicit Tokenizer(std::vector<std::string> tokens);

  std::vector<int> encode(std::string_view text) const;
  /// Specials other than UNK decode to nothing.
  std::string decode(const std::vector<int>& ids) const;

  std::optional<int> find(std::string_view token) const;
  int id(std::string_view token) const { return find(token).value_or(kUnk); }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// One token per line, line number = id. Backslash, newline, tab and space
  /// are escaped as \\, \n, \t and \s.
  void save(const std::filesystem::path& path) const;
  static Tokenizer load(const std::filesystem::path& path);

  bool operator==(const Tokenizer& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Vocabulary over every kernel source, every slot id, and every value any
/// slot of the corpus can take (powers of two up to its trip count plus the
/// trip count), plus powers of two up to 1024, the target punctuation and the
/// pipeline words.
Tokenizer build_tokenizer(const Corpus& corpus);

struct TrainingExample {
  std::vector<int> tokens;
  std::vector<std::uint8_t> loss_mask;
  double weight = 1.0;
  std::string kernel_id;
  std::size_t point_index = 0;  // index into Corpus::points

  /// Position of the single SEP token.
  std::size_t sep_position() const;
  bool operator==(const TrainingExample&) const = default;
};

/// tokens = encode(x) ++ [SEP] ++ encode(target text) ++ [EOS]; the mask is
/// set exactly after SEP. Throws std::invalid_argument on an incomplete
/// target.
TrainingExample linearize(std::string_view source_x, const PragmaConfig& target, double weight,
                          const Tokenizer& tok);

struct DatasetSummary {
  std::size_t train_points = 0;
  std::size_t n_high = 0;
  std::size_t n_low = 0;
  double min_weight = 0;
  double max_weight = 0;
};

struct Dataset {
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> validation;
  std::vector<TrainingExample> test;
  DatasetSummary summary;
};

/// Weights and resampling use the train split only. Validation and test keep
/// one example per point with weight 1.
Dataset build_dataset(const Corpus& corpus, const Split& split, const WeightParams& weight_params,
                      const ResampleParams& resample_params, const Tokenizer& tok);

void save_examples(const std::vector<TrainingExample>& examples, const std::filesystem::path& path);
std::vector<TrainingExample> load_examples(const std::filesystem::path& path);

}  // namespace pragmafill

#endif  // PRAGMAFILL_DATASET_HPP_
