// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include "pragmafill/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <memory>
#include <set>
#include <stdexcept>

namespace pragmafill {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_space_char(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

constexpr std::string_view kTwoCharOps[] = {"+=", "-=", "*=", "/=", "++", "--", "<=", ">=", "==", "!="};

std::string escape_token(const std::string& t) {
  std::string out;
  for (char c : t) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case ' ': out += "\\s"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_token(const std::string& t) {
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != '\\' || i + 1 == t.size()) {
      out += t[i];
      continue;
    }
    char c = t[++i];
    switch (c) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 's': out += ' '; break;
      case 'r': out += '\r'; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = i + 1;
    if (is_word_char(text[i])) {
      while (j < text.size() && is_word_char(text[j])) ++j;
    } else if (is_space_char(text[i])) {
      while (j < text.size() && is_space_char(text[j])) ++j;
    } else if (i + 1 < text.size()) {
      std::string_view two = text.substr(i, 2);
      if (std::find(std::begin(kTwoCharOps), std::end(kTwoCharOps), two) != std::end(kTwoCharOps)) j = i + 2;
    }
    out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

Tokenizer::Tokenizer(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  static const char* kSpecials[] = {"<sep>", "<eos>", "<pad>", "<unk>"};
  if (tokens_.size() < 4) throw std::invalid_argument("tokenizer needs the four special tokens");
  for (int i = 0; i < 4; ++i) {
    if (tokens_[static_cast<std::size_t>(i)] != kSpecials[i]) {
      throw std::invalid_argument(std::string("tokenizer id ") + std::to_string(i) + " must be " + kSpecials[i]);
    }
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate token in vocabulary: '" + escape_token(tokens_[i]) + "'");
    }
  }
}

std::optional<int> Tokenizer::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> out;
  for (const auto& piece : split_tokens(text)) out.push_back(id(piece));
  return out;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int i : ids) {
    if (i == kSep || i == kEos || i == kPad) continue;
    out += token(i);
  }
  return out;
}

void Tokenizer::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& t : tokens_) out << escape_token(t) << '\n';
}

Tokenizer Tokenizer::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(unescape_token(line));
  return Tokenizer(std::move(tokens));
}

Tokenizer build_tokenizer(const Corpus& corpus) {
  if (corpus.kernels.empty()) throw std::invalid_argument("build_tokenizer: empty corpus");
  std::set<std::string> words = {"=", ",", "off", "cg", "flatten"};
  for (int f = 1; f <= 1024; f *= 2) words.insert(std::to_string(f));
  for (const auto& [id, src] : corpus.kernels) {
    for (auto& piece : split_tokens(src)) words.insert(std::move(piece));
    KernelAst ast = parse_kernel(src);
    for (const auto& slot : extract_slots(ast)) {
      words.insert(slot.id);
      if (slot.kind == PragmaKind::Pipeline) continue;
      std::int64_t trip = ast.find_loop(slot.loop_label)->trip_count;
      for (auto f : factor_grid(trip, trip)) words.insert(std::to_string(f));
    }
  }
  std::vector<std::string> tokens = {"<sep>", "<eos>", "<pad>", "<unk>"};
  for (const auto& w : words) {
    if (std::find(tokens.begin(), tokens.end(), w) == tokens.end()) tokens.push_back(w);
  }
  return Tokenizer(std::move(tokens));
}

std::size_t TrainingExample::sep_position() const {
  auto it = std::find(tokens.begin(), tokens.end(), Tokenizer::kSep);
  if (it == tokens.end()) throw std::logic_error("training example without separator");
  return static_cast<std::size_t>(it - tokens.begin());
}

TrainingExample linearize(std::string_view source_x, const PragmaConfig& target, double weight,
                          const Tokenizer& tok) {
  KernelAst ast = parse_kernel(source_x);
  auto slots = extract_slots(ast);
  std::string y = serialize_target(slots, target);

  TrainingExample ex;
  ex.weight = weight;
  ex.tokens = tok.encode(source_x);
  ex.loss_mask.assign(ex.tokens.size() + 1, 0);
  ex.tokens.push_back(Tokenizer::kSep);
  for (int t : tok.encode(y)) {
    ex.tokens.push_back(t);
    ex.loss_mask.push_back(1);
  }
  ex.tokens.push_back(Tokenizer::kEos);
  ex.loss_mask.push_back(1);
  return ex;
}

Dataset build_dataset(const Corpus& corpus, const Split& split, const WeightParams& weight_params,
                      const ResampleParams& resample_params, const Tokenizer& tok) {
  Dataset ds;
  auto points_of_kernels = [&](const std::vector<std::string>& ids) {
    std::set<std::string> wanted(ids.begin(), ids.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < corpus.points.size(); ++i) {
      if (wanted.count(corpus.points[i].kernel_id)) out.push_back(i);
    }
    return out;
  };
  auto example = [&](std::size_t index, double weight) {
    const DesignPoint& p = corpus.points[index];
    TrainingExample ex = linearize(corpus.kernels.at(p.kernel_id), p.point, weight, tok);
    ex.kernel_id = p.kernel_id;
    ex.point_index = index;
    return ex;
  };

  std::vector<std::size_t> train_points = points_of_kernels(split.train);
  ds.summary.train_points = train_points.size();
  if (!train_points.empty()) {
    std::vector<double> perfs;
    auto valid = std::make_unique<bool[]>(train_points.size());
    for (std::size_t i = 0; i < train_points.size(); ++i) {
      perfs.push_back(corpus.points[train_points[i]].perf);
      valid[i] = corpus.points[train_points[i]].valid;
    }
    std::vector<double> w = latency_to_weights(perfs, std::span<const bool>(valid.get(), train_points.size()),
                                               weight_params);
    for (double x : w) (x >= resample_params.tau ? ds.summary.n_high : ds.summary.n_low)++;
    ds.summary.min_weight = *std::min_element(w.begin(), w.end());
    ds.summary.max_weight = *std::max_element(w.begin(), w.end());

    // Linearize each distinct point once; repeats copy.
    std::vector<std::optional<TrainingExample>> cache(train_points.size());
    for (std::size_t k : resample(w, resample_params)) {
      if (!cache[k]) cache[k] = example(train_points[k], w[k]);
      ds.train.push_back(*cache[k]);
    }
  }
  for (std::size_t i : points_of_kernels(split.validation)) ds.validation.push_back(example(i, 1.0));
  for (std::size_t i : points_of_kernels(split.test)) ds.test.push_back(example(i, 1.0));
  return ds;
}

void save_examples(const std::vector<TrainingExample>& examples, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& ex : examples) {
    json j;
    j["tokens"] = ex.tokens;
    j["mask"] = ex.loss_mask;
    j["weight"] = ex.weight;
    j["kernel_id"] = ex.kernel_id;
    j["point_index"] = ex.point_index;
    out << j.dump() << '\n';
  }
}

std::vector<TrainingExample> load_examples(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<TrainingExample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      TrainingExample ex;
      j.at("tokens").get_to(ex.tokens);
      j.at("mask").get_to(ex.loss_mask);
      j.at("weight").get_to(ex.weight);
      j.at("kernel_id").get_to(ex.kernel_id);
      j.at("point_index").get_to(ex.point_index);
      if (ex.tokens.size() != ex.loss_mask.size()) throw std::runtime_error("tokens and mask lengths differ");
      out.push_back(std::move(ex));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace pragmafill
