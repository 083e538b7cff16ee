// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <filesystem>

#include "pragmafill/dataset.hpp"

using namespace pragmafill;
namespace fs = std::filesystem;

namespace {

const char* kGemm = R"(#pragma ACCEL kernel

void gemm(double A[64][64], double B[64][64], double C[64][64])
{
  #pragma ACCEL PIPELINE auto{__PIPE__L0}
  for (int i = 0; i < 64; i++) {
    for (int j = 0; j < 64; j++) {
      #pragma ACCEL PARALLEL FACTOR=auto{__PARA__L2}
      for (int k = 0; k < 64; k++) {
        C[i][j] += A[i][k] * B[k][j];
      }
    }
  }
}
)";

const char* kPlain = R"(void copy(double A[8], double B[8])
{
  for (int i = 0; i < 8; i++) {
    B[i] = A[i];
  }
}
)";

Corpus small_corpus() {
  Corpus c;
  c.kernels["gemm"] = kGemm;
  c.kernels["copy"] = kPlain;
  return c;
}

PragmaConfig gemm_target() {
  PragmaConfig y;
  y.set("__PIPE__L0", PragmaValue::pipeline(PipelineMode::Flatten));
  y.set("__PARA__L2", PragmaValue::factor(2));
  return y;
}

}  // namespace

TEST_CASE("token splitting") {
  using V = std::vector<std::string>;
  CHECK(split_tokens("") == V{});
  CHECK(split_tokens("C[i][j] += A[i];") == V{"C", "[", "i", "]", "[", "j", "]", " ", "+=", " ", "A", "[", "i", "]", ";"});
  CHECK(split_tokens("  \n  x++") == V{"  \n  ", "x", "++"});
  CHECK(split_tokens("FACTOR=auto{__PARA__L2}") == V{"FACTOR", "=", "auto", "{", "__PARA__L2", "}"});
  CHECK(split_tokens("__PIPE__L0=flatten,__PARA__L2=2") ==
        V{"__PIPE__L0", "=", "flatten", ",", "__PARA__L2", "=", "2"});
}

TEST_CASE("tokenizer vocabulary") {
  Tokenizer tok = build_tokenizer(small_corpus());
  CHECK(tok.token(Tokenizer::kSep) == "<sep>");
  CHECK(tok.token(Tokenizer::kEos) == "<eos>");
  CHECK(tok.token(Tokenizer::kPad) == "<pad>");
  CHECK(tok.token(Tokenizer::kUnk) == "<unk>");
  CHECK(tok.find("__PARA__L2").has_value());
  CHECK(tok.find("__PIPE__L0").has_value());
  for (const char* v : {"off", "cg", "flatten", "=", ",", "1", "2", "4", "8", "16", "32", "64"}) {
    CHECK(tok.find(v).has_value());
  }
  CHECK(tok.find("1024").has_value());
  CHECK_FALSE(tok.find("2048").has_value());
  CHECK(tok.encode("").empty());
  CHECK(tok.id("nonexistent_word") == Tokenizer::kUnk);

  // Non-special tokens are sorted.
  auto t = tok.tokens();
  CHECK(std::is_sorted(t.begin() + 4, t.end()));
  CHECK(build_tokenizer(small_corpus()) == tok);

  for (const auto& [id, src] : small_corpus().kernels) CHECK(tok.decode(tok.encode(src)) == src);
  CHECK_THROWS(build_tokenizer(Corpus{}));
}

TEST_CASE("tokenizer round-trips a generated corpus and its vocab file") {
  SyntheticSpec spec;
  spec.n_kernels = 25;
  spec.configs_per_kernel = 3;
  Corpus c = generate_synthetic(spec);
  Tokenizer tok = build_tokenizer(c);
  for (const auto& [id, src] : c.kernels) {
    auto ids = tok.encode(src);
    CHECK(std::find(ids.begin(), ids.end(), Tokenizer::kUnk) == ids.end());
    CHECK(tok.decode(ids) == src);
  }
  fs::path p = fs::temp_directory_path() / "pragmafill_test_vocab.txt";
  tok.save(p);
  CHECK(Tokenizer::load(p) == tok);
}

TEST_CASE("linearize") {
  Tokenizer tok = build_tokenizer(small_corpus());
  TrainingExample ex = linearize(kGemm, gemm_target(), 0.25, tok);
  std::size_t sep = ex.sep_position();
  CHECK(std::count(ex.tokens.begin(), ex.tokens.end(), Tokenizer::kSep) == 1);
  CHECK(ex.tokens.back() == Tokenizer::kEos);
  CHECK(ex.weight == 0.25);
  REQUIRE(ex.loss_mask.size() == ex.tokens.size());
  for (std::size_t i = 0; i < ex.tokens.size(); ++i) CHECK(ex.loss_mask[i] == (i > sep ? 1 : 0));

  std::vector<int> target(ex.tokens.begin() + static_cast<std::ptrdiff_t>(sep) + 1, ex.tokens.end() - 1);
  CHECK(tok.decode(target) == "__PIPE__L0=flatten,__PARA__L2=2");
  std::size_t masked = static_cast<std::size_t>(std::count(ex.loss_mask.begin(), ex.loss_mask.end(), 1));
  CHECK(masked == tok.encode("__PIPE__L0=flatten,__PARA__L2=2").size() + 1);
  std::vector<int> x(ex.tokens.begin(), ex.tokens.begin() + static_cast<std::ptrdiff_t>(sep));
  CHECK(tok.decode(x) == kGemm);

  TrainingExample plain = linearize(kPlain, PragmaConfig{}, 1.0, tok);
  CHECK(plain.tokens[plain.tokens.size() - 2] == Tokenizer::kSep);
  CHECK(std::count(plain.loss_mask.begin(), plain.loss_mask.end(), 1) == 1);

  PragmaConfig partial;
  partial.set("__PIPE__L0", PragmaValue::pipeline(PipelineMode::Cg));
  CHECK_THROWS_AS(linearize(kGemm, partial, 1.0, tok), std::invalid_argument);
}

TEST_CASE("build_dataset weights and resamples the train split only") {
  // Ten train points whose weights are four high and six low.
  Corpus c = small_corpus();
  const double perfs[] = {100, 120, 150, 180, 1e6, 2e6, 4e6, 8e6, 1.6e7, 3.38e7};
  for (double perf : perfs) {
    PragmaConfig y = gemm_target();
    c.points.push_back({"gemm", y, perf, {}, true, nlohmann::json::object()});
  }
  for (int i = 0; i < 3; ++i) c.points.push_back({"copy", PragmaConfig{}, 8, {}, true, nlohmann::json::object()});
  Split s{{"gemm"}, {"copy"}, {}};

  Tokenizer tok = build_tokenizer(c);
  WeightParams wp;
  ResampleParams rp;
  rp.seed = 11;
  Dataset ds = build_dataset(c, s, wp, rp, tok);
  CHECK(ds.summary.train_points == 10);
  CHECK(ds.summary.n_high == 4);
  CHECK(ds.summary.n_low == 6);
  CHECK(ds.train.size() == 15);
  CHECK(ds.summary.max_weight == 1.0);
  CHECK(ds.summary.min_weight == 0.01);
  for (const auto& ex : ds.train) {
    CHECK(ex.weight >= wp.eps);
    CHECK(ex.weight <= wp.w_max);
    CHECK(ex.kernel_id == "gemm");
  }
  CHECK(ds.validation.size() == 3);
  CHECK(ds.test.empty());
  for (const auto& ex : ds.validation) CHECK(ex.weight == 1.0);

  Dataset again = build_dataset(c, s, wp, rp, tok);
  CHECK(again.train == ds.train);

  fs::path p = fs::temp_directory_path() / "pragmafill_test_train.jsonl";
  save_examples(ds.train, p);
  CHECK(load_examples(p) == ds.train);
}
