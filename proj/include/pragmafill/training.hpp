// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Graph-encoder pretraining, the graph-supervised fine-tuning loss, the
// training loop, prediction and oracle-based evaluation.

#ifndef PRAGMAFILL_TRAINING_HPP_
#define PRAGMAFILL_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pragmafill/checkpoint.hpp"
#include "pragmafill/corpus.hpp"
#include "pragmafill/dataset.hpp"
#include "pragmafill/decoding.hpp"
#include "pragmafill/encoder.hpp"
#include "pragmafill/graph.hpp"
#include "pragmafill/sequence_model.hpp"

namespace pragmafill {

// ---------------------------------------------------------------------------
// Pretraining

struct PretrainConfig {
  EncoderOptions encoder;
  int epochs = 10;
  int batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Encoder plus the scalar regression head used only while pretraining.
struct PretrainResult {
  GraphEncoder encoder;
  Mat<double> head_w;  // embed x 1
  double head_b = 0;
  double target_mean = 0;
  double target_std = 1;
  std::vector<double> epoch_loss;  // mean standardized squared error

  double predict(const ProgramGraph& g) const;
  std::vector<double> predict(const std::vector<ProgramGraph>& graphs) const;
};

/// log(1 + perf) for valid points, 0 otherwise.
double latency_target(const DesignPoint& p);

/// Fits encoder + head to standardized targets by minibatch Adam.
PretrainResult pretrain_gnn(const std::vector<ProgramGraph>& graphs, const std::vector<double>& targets,
                            const PretrainConfig& config);

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

Checkpoint to_checkpoint(const PretrainResult& r);
PretrainResult pretrain_result_from_checkpoint(const Checkpoint& c);

// ---------------------------------------------------------------------------
// Fine-tuning

struct TrainConfig {
  int epochs = 3;
  int batch_size = 8;
  double lr = 3e-3;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  double alpha = 1.0;  // graph-distance coefficient
  double beta = 0.9;   // baseline EMA decay
  double temperature = 1.0;
  int width = 64;
  void check() const;
};

struct LossParts {
  double l_ce = 0;       // masked mean token cross-entropy
  double d_embed = 0;    // squared distance between predicted and target embeddings
  double surrogate = 0;  // alpha * (d - b) * mean log p(prediction)
  double weight = 1;
  double total = 0;      // weight * l_ce + weight * surrogate
  double baseline = 0;   // b used for this example
  PragmaConfig predicted;
};

/// Exponential moving average of the graph distance; starts at the first
/// value it sees.
struct Baseline {
  bool initialized = false;
  double value = 0;
};

/// Per-corpus caches shared by loss evaluations: parsed kernels, grammars,
/// graph embeddings of the ground-truth points and of decoded designs.
class LiftContext {
 public:
  LiftContext(const Corpus& corpus, const Tokenizer& tok, const GraphEncoder& encoder, SpaceCaps caps = {});

  const Corpus& corpus() const { return corpus_; }
  const Tokenizer& tokenizer() const { return tok_; }
  const GraphEncoder& encoder() const { return encoder_; }
  const SpaceCaps& caps() const { return caps_; }
  const KernelAst& ast(const std::string& kernel_id);
  const TargetGrammar& grammar(const std::string& kernel_id);
  const RowVec<double>& target_embedding(std::size_t point_index);
  const RowVec<double>& embedding(const std::string& kernel_id, const PragmaConfig& config);

 private:
  const Corpus& corpus_;
  const Tokenizer& tok_;
  const GraphEncoder& encoder_;
  SpaceCaps caps_;
  std::map<std::string, KernelAst> asts_;
  std::map<std::string, TargetGrammar> grammars_;
  std::map<std::size_t, RowVec<double>> targets_;
  std::map<std::pair<std::string, std::string>, RowVec<double>> embeddings_;
};

/// Loss of a batch of examples from one kernel. The shared prefix is run
/// once. Row b decodes with Rng(seeds[b]); `forced` replaces the decoded
/// design for every row. With `accumulate` the gradient of the batch mean of
/// `total` is added to the model. The baseline is read once for the whole
/// batch and then updated example by example.
std::vector<LossParts> batch_loss(SequenceModel& model, LiftContext& ctx,
                                  const std::vector<const TrainingExample*>& batch,
                                  const std::vector<std::uint64_t>& seeds, Baseline& baseline,
                                  const TrainConfig& config, bool accumulate,
                                  const std::optional<PragmaConfig>& forced = std::nullopt);

LossParts compute_loss(SequenceModel& model, LiftContext& ctx, const TrainingExample& example, std::uint64_t seed,
                       Baseline& baseline, const TrainConfig& config, bool accumulate = false,
                       const std::optional<PragmaConfig>& forced = std::nullopt);

/// Teacher-forced masked CE with labels separate from inputs (see
/// sequence_cross_entropy).
double example_cross_entropy(SequenceModel& model, const TrainingExample& ex, const std::vector<int>& labels);

/// Mean masked CE over examples, grouped by kernel so prefixes run once.
double mean_cross_entropy(const SequenceModel& model, const std::vector<TrainingExample>& examples);

struct EpochMetrics {
  int epoch = 0;
  double mean_ce = 0;
  double mean_gnn_distance = 0;
  double val_ce = 0;
  double wall_seconds = 0;
};
std::string format_metrics(const EpochMetrics& m);

SequenceModel make_model(const Tokenizer& tok, const TrainConfig& config, std::size_t longest_example);

/// Throws std::runtime_error if a loss becomes non-finite.
std::vector<EpochMetrics> train(SequenceModel& model, LiftContext& ctx, const std::vector<TrainingExample>& train_set,
                                const std::vector<TrainingExample>& validation, const TrainConfig& config,
                                const std::function<void(const EpochMetrics&, const SequenceModel&)>& on_epoch = {});

// ---------------------------------------------------------------------------
// Inference and evaluation

/// Greedy constrained decode on a kernel source.
PragmaConfig predict(const SequenceModel& model, const Tokenizer& tok, const std::string& kernel_source,
                     const SpaceCaps& caps = {});

struct EvalConfig {
  ResourceBudget budget;
  SpaceCaps caps;
  int n_random = 100;
  std::uint64_t seed = 0;
  std::uint64_t exhaustive_limit = 10000;
};

struct KernelEval {
  std::string kernel_id;
  std::string predicted;  // target text
  std::int64_t predicted_cycles = 0;
  std::int64_t predicted_units = 0;
  bool predicted_valid = false;
  std::int64_t effective_cycles = 0;  // predicted, or the default design when invalid
  std::int64_t default_cycles = 0;
  std::optional<std::int64_t> identity_cycles;  // perfect nests only
  double random_median = 0;
  std::optional<std::int64_t> optimum;
  std::optional<double> regret;  // effective / optimum
  double speedup = 0;            // random median / effective
  std::uint64_t space_size = 0;
  std::uint64_t valid_configs = 0;
};

struct EvalReport {
  std::vector<KernelEval> rows;
  std::vector<std::string> skipped;
  double fraction_grammar_valid = 0;
  double fraction_oracle_valid = 0;
  double geomean_speedup = 0;
  double median_predicted_cycles = 0;
  double median_random_cycles = 0;
  std::optional<double> median_regret;
};

EvalReport evaluate(const SequenceModel& model, const Tokenizer& tok, const Corpus& corpus,
                    const std::vector<std::string>& kernel_ids, const EvalConfig& config,
                    std::vector<std::string>* warnings = nullptr);

std::string format_report(const EvalReport& r);
nlohmann::json report_to_json(const EvalReport& r);

/// One CSV row per point: kernel_id, point_index, final sequence-model state,
/// graph embedding.
void export_embeddings(const SequenceModel& model, const GraphEncoder& encoder, const Corpus& corpus,
                       const Tokenizer& tok, const std::vector<std::size_t>& points,
                       const std::filesystem::path& path);

}  // namespace pragmafill

#endif  // PRAGMAFILL_TRAINING_HPP_
