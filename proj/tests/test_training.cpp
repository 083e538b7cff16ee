// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "pragmafill/gradcheck.hpp"
#include "pragmafill/training.hpp"

using namespace pragmafill;
namespace fs = std::filesystem;

namespace {

const char* kScale = R"(#pragma ACCEL kernel

void scale(double A[16][8], double B[16][8])
{
  #pragma ACCEL PIPELINE auto{__PIPE__L0}
  for (int i = 0; i < 16; i++) {
    #pragma ACCEL PARALLEL FACTOR=auto{__PARA__L1}
    for (int j = 0; j < 8; j++) {
      B[i][j] = 2 * A[i][j];
    }
  }
}
)";

const char* kFixed = R"(void fixed(double A[4])
{
  for (int i = 0; i < 4; i++) {
    A[i] = A[i] + 1;
  }
}
)";

// Only factor 1 is legal on a single-trip loop.
const char* kSingle = R"(void single(double A[1])
{
  #pragma ACCEL PARALLEL FACTOR=auto{__PARA__L0}
  for (int i = 0; i < 1; i++) {
    A[i] = A[i] * 2;
  }
}
)";

PragmaConfig scale_config(PipelineMode pipe, std::int64_t para) {
  PragmaConfig c;
  c.set("__PIPE__L0", PragmaValue::pipeline(pipe));
  c.set("__PARA__L1", PragmaValue::factor(para));
  return c;
}

Corpus scale_corpus() {
  Corpus c;
  c.kernels["scale"] = kScale;
  c.kernels["fixed"] = kFixed;
  c.kernels["single"] = kSingle;
  KernelAst ast = parse_kernel(kScale);
  for (auto [pipe, para] : {std::pair{PipelineMode::Off, 1}, {PipelineMode::Cg, 2}, {PipelineMode::Flatten, 8}}) {
    PragmaConfig y = scale_config(pipe, para);
    OracleReport r = estimate(ast, y);
    c.points.push_back({"scale", y, static_cast<double>(r.cycles), {}, true, nlohmann::json::object()});
  }
  return c;
}

struct Fixture {
  Corpus corpus = scale_corpus();
  Tokenizer tok = build_tokenizer(corpus);
  GraphEncoder encoder{EncoderOptions{2, 8, 6, false}};
  std::vector<TrainingExample> examples;

  Fixture() {
    Rng rng(11);
    encoder.init(rng);
    for (std::size_t i = 0; i < corpus.points.size(); ++i) {
      const auto& p = corpus.points[i];
      TrainingExample ex = linearize(corpus.kernels.at(p.kernel_id), p.point, 1.0, tok);
      ex.kernel_id = p.kernel_id;
      ex.point_index = i;
      examples.push_back(ex);
    }
  }

  SequenceModel model(int width = 8, std::uint64_t seed = 3) const {
    SequenceModel m({static_cast<int>(tok.size()), width, 512});
    Rng rng(seed);
    m.init(rng);
    return m;
  }
};

// Log-probability of the example's target values under the masked
// distribution, computed from full-sequence logits.
double mean_target_log_prob(const SequenceModel& m, const TargetGrammar& g, const TrainingExample& ex) {
  Mat<double> logits = m.logits(ex.tokens);
  std::size_t sep = ex.sep_position();
  double lp = 0;
  for (std::size_t j = 0; j < g.positions.size(); ++j) {
    const auto& pos = g.positions[j];
    if (pos.tokens.size() < 2) continue;
    auto row = static_cast<Eigen::Index>(sep + j);
    double z = 0;
    for (int t : pos.tokens) z += std::exp(logits(row, t));
    lp += logits(row, ex.tokens[sep + 1 + j]) - std::log(z);
  }
  return lp / static_cast<double>(g.positions.size());
}

struct SmallRun {
  Corpus corpus;
  Split split;
  Tokenizer tok;
  Dataset data;
  std::vector<ProgramGraph> graphs;
  std::vector<double> targets;

  SmallRun() : tok({"<sep>", "<eos>", "<pad>", "<unk>"}) {
    SyntheticSpec spec;
    spec.n_kernels = 10;
    spec.configs_per_kernel = 12;
    spec.seed = 5;
    corpus = generate_synthetic(spec);
    split = pragmafill::split(corpus, {0.6, 0.2, 0.2}, 2);
    tok = build_tokenizer(corpus);
    data = build_dataset(corpus, split, WeightParams{}, ResampleParams{}, tok);
    std::set<std::string> train(split.train.begin(), split.train.end());
    for (const auto& p : corpus.points) {
      if (!train.count(p.kernel_id)) continue;
      graphs.push_back(build_graph(parse_kernel(corpus.kernels.at(p.kernel_id)), p.point));
      targets.push_back(latency_target(p));
    }
  }
};

PretrainConfig small_pretrain() {
  PretrainConfig pc;
  pc.encoder = {2, 12, 8, false};
  pc.epochs = 3;
  pc.batch_size = 8;
  pc.seed = 4;
  return pc;
}

}  // namespace

TEST_CASE("spearman with average ranks") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == Catch::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == Catch::Approx(-1.0));
  // Ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4): 4.5 / sqrt(4.5 * 5).
  CHECK(spearman({1, 2, 2, 3}, {1, 2, 3, 4}) == Catch::Approx(4.5 / std::sqrt(22.5)).epsilon(1e-12));
  CHECK(spearman({5, 5, 5}, {1, 2, 3}) == 0.0);
  CHECK_THROWS(spearman({1, 2}, {1}));
}

TEST_CASE("pretraining: determinism, constant labels, sensitivity") {
  SmallRun run;
  PretrainConfig pc = small_pretrain();
  PretrainResult a = pretrain_gnn(run.graphs, run.targets, pc);
  PretrainResult b = pretrain_gnn(run.graphs, run.targets, pc);
  CHECK(checkpoint_to_string(to_checkpoint(a)) == checkpoint_to_string(to_checkpoint(b)));
  CHECK(a.epoch_loss.size() == 3);
  CHECK(a.epoch_loss.back() < a.epoch_loss.front());

  PretrainResult back = pretrain_result_from_checkpoint(checkpoint_from_string(checkpoint_to_string(to_checkpoint(a))));
  CHECK(back.predict(run.graphs) == a.predict(run.graphs));
  CHECK(encoder_from_checkpoint(to_checkpoint(a)).params().values_equal(a.encoder.params()));

  // Two configs of one kernel that differ in a single factor.
  KernelAst ast = parse_kernel(kScale);
  RowVec<double> e1 = a.encoder.encode(build_graph(ast, scale_config(PipelineMode::Cg, 2)));
  RowVec<double> e2 = a.encoder.encode(build_graph(ast, scale_config(PipelineMode::Cg, 4)));
  CHECK((e1 - e2).squaredNorm() > 0.0);

  std::vector<double> constant(run.graphs.size(), 3.0);
  pc.epochs = 12;
  PretrainResult c = pretrain_gnn(run.graphs, constant, pc);
  CHECK(c.target_std == 1.0);
  CHECK(c.epoch_loss.back() < 1e-3);
  CHECK(c.epoch_loss.back() < c.epoch_loss.front());
  CHECK(std::abs(c.predict(run.graphs[0]) - 3.0) < 0.05);

  CHECK_THROWS_AS(pretrain_gnn({}, {}, pc), std::invalid_argument);
}

TEST_CASE("loss: forced target, weight linearity, decomposition") {
  Fixture f;
  SequenceModel m = f.model();
  LiftContext ctx(f.corpus, f.tok, f.encoder);
  TrainConfig tc;
  const TrainingExample& ex = f.examples[1];
  const PragmaConfig& y = f.corpus.points[1].point;

  Baseline base{true, 2.5};
  LossParts same = compute_loss(m, ctx, ex, 1, base, tc, false, y);
  CHECK(same.d_embed == 0.0);
  CHECK(same.baseline == 2.5);
  double mlp = mean_target_log_prob(m, ctx.grammar("scale"), ex);
  CHECK(same.surrogate == Catch::Approx(-tc.alpha * 2.5 * mlp).epsilon(1e-10));
  CHECK(base.value == Catch::Approx(0.9 * 2.5));  // d = 0 enters the average

  // Independent CE path.
  CHECK(same.l_ce == Catch::Approx(example_cross_entropy(m, ex, ex.tokens)).epsilon(1e-12));
  CHECK(same.l_ce >= 0.0);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainingExample lo = ex, hi = ex;
    lo.weight = 0.01;
    hi.weight = 1.0;
    Baseline b1{true, 0.7}, b2{true, 0.7};
    LossParts pl = compute_loss(m, ctx, lo, seed, b1, tc);
    LossParts ph = compute_loss(m, ctx, hi, seed, b2, tc);
    CHECK(pl.predicted == ph.predicted);
    CHECK(ph.total == Catch::Approx(100.0 * pl.total).epsilon(1e-12));
    CHECK(pl.total == pl.weight * pl.l_ce + pl.weight * pl.surrogate);
    CHECK(pl.d_embed >= 0.0);
    CHECK(validate_config(ctx.ast("scale"), pl.predicted).empty());
    CHECK((pl.d_embed == 0.0) == (pl.predicted == y));
  }

  // Fresh baseline starts at the first distance.
  Baseline fresh;
  PragmaConfig other = scale_config(PipelineMode::Flatten, 8);
  LossParts first = compute_loss(m, ctx, ex, 0, fresh, tc, false, other);
  CHECK(first.d_embed > 0.0);
  CHECK(first.baseline == first.d_embed);
  CHECK(first.surrogate == 0.0);
  CHECK(fresh.initialized);
  CHECK(fresh.value == first.d_embed);
}

TEST_CASE("loss: masked-out labels never change the cross-entropy") {
  SmallRun run;
  SequenceModel m({static_cast<int>(run.tok.size()), 8, 4096});
  Rng rng(8);
  m.init(rng);
  std::vector<TrainingExample> pool = run.data.train;
  pool.insert(pool.end(), run.data.validation.begin(), run.data.validation.end());
  pool.insert(pool.end(), run.data.test.begin(), run.data.test.end());
  REQUIRE(pool.size() >= 100);
  Rng mut(21);
  for (std::size_t i = 0; i < 100; ++i) {
    const TrainingExample& ex = pool[i];
    double base = example_cross_entropy(m, ex, ex.tokens);
    std::vector<int> labels = ex.tokens;
    std::size_t sep = ex.sep_position();
    for (int k = 0; k < 5; ++k) labels[mut.below(sep + 1)] = static_cast<int>(mut.below(run.tok.size()));
    CHECK(example_cross_entropy(m, ex, labels) == base);
  }
}

TEST_CASE("loss gradient matches finite differences") {
  Fixture f;
  SequenceModel m = f.model(4, 9);
  LiftContext ctx(f.corpus, f.tok, f.encoder);
  TrainConfig tc;
  tc.alpha = 0.7;
  tc.temperature = 0.8;
  TrainingExample a = f.examples[0], b = f.examples[2];
  a.weight = 0.4;
  PragmaConfig forced = scale_config(PipelineMode::Cg, 4);
  auto loss = [&](bool acc) {
    Baseline base{true, 0.3};
    auto parts = batch_loss(m, ctx, {&a, &b}, {1, 2}, base, tc, acc, forced);
    return 0.5 * (parts[0].total + parts[1].total);
  };
  CHECK(m.params().count() <= 10000);
  auto r = gradcheck(m.params(), loss);
  INFO("worst " << r.worst_parameter << " rel " << r.max_rel_error);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("loss: alpha zero is weighted cross-entropy only") {
  Fixture f;
  SequenceModel m = f.model();
  LiftContext ctx(f.corpus, f.tok, f.encoder);
  TrainConfig tc;
  tc.alpha = 0.0;
  TrainingExample ex = f.examples[2];
  ex.weight = 0.3;
  Baseline base{true, 1.0};
  m.params().zero_grad();
  LossParts p = compute_loss(m, ctx, ex, 4, base, tc, true);
  CHECK(p.surrogate == 0.0);
  CHECK(p.total == 0.3 * p.l_ce);

  SequenceModel ref = m;
  ref.params().zero_grad();
  sequence_cross_entropy(ref, ex.tokens, ex.tokens, ex.loss_mask, true);
  ref.params().scale_grad(0.3);
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    INFO(m.params()[i].name);
    CHECK((m.params()[i].grad - ref.params()[i].grad).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("batched loss agrees with per-example loss") {
  Fixture f;
  SequenceModel m = f.model();
  LiftContext ctx(f.corpus, f.tok, f.encoder);
  TrainConfig tc;
  std::vector<const TrainingExample*> batch = {&f.examples[0], &f.examples[1], &f.examples[2]};
  Baseline bb{true, 0.5};
  auto parts = batch_loss(m, ctx, batch, {7, 8, 9}, bb, tc, false);
  for (std::size_t i = 0; i < 3; ++i) {
    Baseline one{true, 0.5};
    LossParts p = compute_loss(m, ctx, *batch[i], 7 + i, one, tc);
    CHECK(p.predicted == parts[i].predicted);
    CHECK(p.l_ce == Catch::Approx(parts[i].l_ce).epsilon(1e-12));
    CHECK(p.d_embed == parts[i].d_embed);
    CHECK(p.surrogate == Catch::Approx(parts[i].surrogate).epsilon(1e-10).margin(1e-14));
  }

  TrainingExample stranger = linearize(kFixed, PragmaConfig{}, 1.0, f.tok);
  stranger.kernel_id = "fixed";
  CHECK_THROWS_AS(batch_loss(m, ctx, {&f.examples[0], &stranger}, {1, 2}, bb, tc, false), std::invalid_argument);
}

TEST_CASE("training is deterministic and guarded") {
  SmallRun run;
  PretrainResult pre = pretrain_gnn(run.graphs, run.targets, small_pretrain());
  TrainConfig tc;
  tc.epochs = 2;
  tc.width = 8;
  tc.seed = 6;
  std::size_t longest = 0;
  for (const auto& ex : run.data.train) longest = std::max(longest, ex.tokens.size());

  auto go = [&](std::vector<std::string>* ckpts) {
    LiftContext ctx(run.corpus, run.tok, pre.encoder);
    SequenceModel m = make_model(run.tok, tc, longest);
    auto metrics = train(m, ctx, run.data.train, run.data.validation, tc, [&](const EpochMetrics&, const SequenceModel& mm) {
      ckpts->push_back(checkpoint_to_string(to_checkpoint(mm)));
    });
    return metrics;
  };
  std::vector<std::string> c1, c2;
  auto m1 = go(&c1);
  auto m2 = go(&c2);
  REQUIRE(m1.size() == 2);
  CHECK(c1 == c2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(m1[i].epoch == static_cast<int>(i) + 1);
    CHECK(m1[i].mean_ce == m2[i].mean_ce);
    CHECK(m1[i].mean_gnn_distance == m2[i].mean_gnn_distance);
    CHECK(m1[i].val_ce == m2[i].val_ce);
    CHECK(std::isfinite(m1[i].val_ce));
  }
  CHECK(c1[0] != c1[1]);

  std::string line = format_metrics(m1[0]);
  CHECK(line.rfind("epoch=1 mean_ce=", 0) == 0);
  CHECK(line.find(" mean_gnn_distance=") != std::string::npos);
  CHECK(line.find(" val_ce=") != std::string::npos);
  CHECK(line.find(" wall_seconds=") != std::string::npos);

  std::vector<TrainingExample> poisoned = run.data.train;
  poisoned[0].weight = std::numeric_limits<double>::quiet_NaN();
  LiftContext ctx(run.corpus, run.tok, pre.encoder);
  SequenceModel m = make_model(run.tok, tc, longest);
  CHECK_THROWS_AS(train(m, ctx, poisoned, run.data.validation, tc), std::runtime_error);

  TrainConfig bad = tc;
  bad.beta = 1.0;
  CHECK_THROWS_AS(train(m, ctx, run.data.train, run.data.validation, bad), std::invalid_argument);
  bad = tc;
  bad.epochs = 0;
  CHECK_THROWS_AS(train(m, ctx, run.data.train, run.data.validation, bad), std::invalid_argument);
}

TEST_CASE("predict is total on generated kernels") {
  SmallRun run;
  SequenceModel m({static_cast<int>(run.tok.size()), 8, 4096});
  Rng rng(13);
  m.init(rng);
  for (const auto& [id, src] : run.corpus.kernels) {
    PragmaConfig c = predict(m, run.tok, src);
    KernelAst ast = parse_kernel(src);
    CHECK(validate_config(ast, c).empty());
    CHECK(predict(m, run.tok, src) == c);
    CHECK(parse_kernel(substitute(src, c)).loops.size() == ast.loops.size());
  }
  Tokenizer tok = build_tokenizer(scale_corpus());
  SequenceModel small({static_cast<int>(tok.size()), 8, 512});
  small.init(rng);
  CHECK(predict(small, tok, kFixed).empty());
  CHECK_THROWS_AS(predict(small, tok, "void broken( {"), ParseError);
}

TEST_CASE("evaluate: regret, sanity row, skipping, determinism") {
  Corpus c = scale_corpus();
  Tokenizer tok = build_tokenizer(c);
  SequenceModel m({static_cast<int>(tok.size()), 8, 512});
  Rng rng(17);
  m.init(rng);
  EvalConfig ec;
  ec.seed = 3;
  std::vector<std::string> warnings;
  EvalReport r = evaluate(m, tok, c, {"scale", "fixed", "single"}, ec, &warnings);
  CHECK(warnings.empty());
  REQUIRE(r.rows.size() == 3);
  CHECK(r.fraction_grammar_valid == 1.0);

  for (const auto& row : r.rows) {
    CHECK(row.optimum.has_value());
    CHECK(*row.regret >= 1.0);
    CHECK(row.random_median > 0);
  }
  // Single-point spaces: the prediction is the optimum.
  CHECK(r.rows[1].kernel_id == "fixed");
  CHECK(*r.rows[1].regret == 1.0);
  CHECK(r.rows[1].speedup == 1.0);
  CHECK(*r.rows[2].regret == 1.0);
  // Perfect nests: 16 * 8 * 1, 4 * 1, 1 * 1.
  CHECK(r.rows[0].identity_cycles == 128);
  CHECK(r.rows[0].default_cycles == 128);
  CHECK(r.rows[1].default_cycles == 4);
  CHECK(r.rows[2].default_cycles == 1);

  std::string text = format_report(r);
  CHECK(text.find("sanity: default cycles match the identity formula on 3 of 3 perfect nests") != std::string::npos);
  CHECK(text.find("geomean speedup vs random median") != std::string::npos);

  EvalReport again = evaluate(m, tok, c, {"scale", "fixed", "single"}, ec, &warnings);
  CHECK(report_to_json(again).dump() == report_to_json(r).dump());
  CHECK(format_report(again) == text);

  EvalConfig tight = ec;
  tight.budget.max_units = 0;
  EvalReport none = evaluate(m, tok, c, {"scale", "fixed"}, tight, &warnings);
  CHECK(none.rows.empty());
  CHECK(none.skipped == std::vector<std::string>{"scale", "fixed"});
  CHECK(warnings.size() == 2);
}

TEST_CASE("export_embeddings writes one row per point") {
  Fixture f;
  SequenceModel m = f.model();
  fs::path p = fs::temp_directory_path() / "pragmafill_test_embeddings.csv";
  std::vector<std::size_t> points = {0, 1, 2};
  export_embeddings(m, f.encoder, f.corpus, f.tok, points, p);
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0].rfind("kernel_id,point_index,h0,", 0) == 0);
  for (const auto& line : lines) CHECK(std::count(line.begin(), line.end(), ',') == 1 + 8 + 6);
  CHECK(lines[1].rfind("scale,0,", 0) == 0);
  CHECK(lines[3].rfind("scale,2,", 0) == 0);

  auto graph_part = [](const std::string& line) {
    std::size_t pos = 0;
    for (int k = 0; k < 2 + 8; ++k) pos = line.find(',', pos) + 1;
    return line.substr(pos);
  };
  CHECK(graph_part(lines[1]) != graph_part(lines[2]));

  std::ifstream a(p, std::ios::binary);
  std::string first((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  export_embeddings(m, f.encoder, f.corpus, f.tok, points, p);
  std::ifstream b(p, std::ios::binary);
  std::string second((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(first == second);
}
