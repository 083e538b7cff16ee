// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include "pragmafill/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "pragmafill/checkpoint.hpp"

namespace pragmafill {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum SeedStream : std::uint64_t { kCorpus = 1, kSplit, kResample, kGnn, kTrain, kEval };

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError("bad value '" + text + "' for " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("bad value '" + text + "' for " + key + " (expected true or false)");
}

std::string show(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}
std::string show(bool v) { return v ? "true" : "false"; }
template <typename T>
std::enable_if_t<std::is_integral_v<T>, std::string> show(T v) {
  return std::to_string(v);
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PF_FIELD(expr, type)                                                                       \
  Field {                                                                                          \
    [](RunConfig& c, const std::string& v) { (expr) = static_cast<type>(parse_number<type>("", v)); }, \
        [](const RunConfig& c) { return show(static_cast<type>(expr)); }                           \
  }

#define PF_SEED(member, resolved)                                                              \
  Field {                                                                                      \
    [](RunConfig& c, const std::string& v) { c.member = parse_number<std::uint64_t>("", v); }, \
        [](const RunConfig& c) { return show(c.resolved()); }                                  \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"seed", PF_FIELD(c.seed, std::uint64_t)},
      {"deterministic",
       {[](RunConfig& c, const std::string& v) { c.deterministic = parse_bool("deterministic", v); },
        [](const RunConfig& c) { return show(c.deterministic); }}},
      {"work.dir",
       {[](RunConfig& c, const std::string& v) { c.work_dir = v; }, [](const RunConfig& c) { return c.work_dir; }}},
      {"corpus.dir",
       {[](RunConfig& c, const std::string& v) { c.corpus_dir = v; },
        [](const RunConfig& c) { return c.corpus_dir; }}},
      {"corpus.n_kernels", PF_FIELD(c.n_kernels, std::size_t)},
      {"corpus.configs_per_kernel", PF_FIELD(c.configs_per_kernel, std::size_t)},
      {"corpus.seed", PF_SEED(corpus_seed, resolved_corpus_seed)},
      {"budget.max_units", PF_FIELD(c.budget.max_units, std::int64_t)},
      {"space.max_factor", PF_FIELD(c.caps.max_factor, std::int64_t)},
      {"space.max_space", PF_FIELD(c.caps.max_space, std::uint64_t)},
      {"split.train", PF_FIELD(c.split_train, double)},
      {"split.validation", PF_FIELD(c.split_validation, double)},
      {"split.test", PF_FIELD(c.split_test, double)},
      {"split.seed", PF_SEED(split_seed, resolved_split_seed)},
      {"weight.eps0", PF_FIELD(c.weight.eps0, double)},
      {"weight.power_p", PF_FIELD(c.weight.power_p, double)},
      {"weight.eps", PF_FIELD(c.weight.eps, double)},
      {"weight.w_max", PF_FIELD(c.weight.w_max, double)},
      {"resample.tau", PF_FIELD(c.resample.tau, double)},
      {"resample.lambda", PF_FIELD(c.resample.lambda_rep, std::int64_t)},
      {"resample.gamma", PF_FIELD(c.resample.gamma_frac, double)},
      {"resample.seed", PF_SEED(resample_seed, resolved_resample_seed)},
      {"gnn.layers", PF_FIELD(c.gnn.encoder.layers, int)},
      {"gnn.hidden", PF_FIELD(c.gnn.encoder.hidden, int)},
      {"gnn.embed", PF_FIELD(c.gnn.encoder.embed, int)},
      {"gnn.epochs", PF_FIELD(c.gnn.epochs, int)},
      {"gnn.batch_size", PF_FIELD(c.gnn.batch_size, int)},
      {"gnn.lr", PF_FIELD(c.gnn.lr, double)},
      {"gnn.seed", PF_SEED(gnn_seed, resolved_gnn_seed)},
      {"model.width", PF_FIELD(c.train.width, int)},
      {"train.epochs", PF_FIELD(c.train.epochs, int)},
      {"train.batch_size", PF_FIELD(c.train.batch_size, int)},
      {"train.lr", PF_FIELD(c.train.lr, double)},
      {"train.clip_norm", PF_FIELD(c.train.clip_norm, double)},
      {"train.alpha", PF_FIELD(c.train.alpha, double)},
      {"train.beta", PF_FIELD(c.train.beta, double)},
      {"train.temperature", PF_FIELD(c.train.temperature, double)},
      {"train.seed", PF_SEED(train_seed, resolved_train_seed)},
      {"eval.n_random", PF_FIELD(c.eval_n_random, int)},
      {"eval.exhaustive_limit", PF_FIELD(c.eval_exhaustive_limit, std::uint64_t)},
      {"eval.seed", PF_SEED(eval_seed, resolved_eval_seed)},
  };
  return table;
}

#undef PF_FIELD
#undef PF_SEED

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingArtifact("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

void require(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p)) throw MissingArtifact("missing " + p.string() + " (run `pragmafill " + producer + "` first)");
}

Corpus read_corpus(const RunConfig& c, std::ostream& out) {
  fs::path dir = c.corpus_path();
  if (!fs::is_directory(dir)) throw MissingArtifact("missing corpus directory " + dir.string() + " (run `pragmafill gen-corpus` first)");
  std::vector<std::string> warnings;
  Corpus corpus = load_hlsyn(dir, &warnings);
  for (const auto& w : warnings) out << "warning: " << w << '\n';
  if (corpus.kernels.empty()) throw MissingArtifact("corpus " + dir.string() + " has no kernels");
  return corpus;
}

Split read_split(const RunConfig& c) {
  fs::path p = c.prep_path() / "split.json";
  require(p, "prep");
  return split_from_json(json::parse(read_file(p)));
}

Tokenizer read_vocab(const RunConfig& c) {
  fs::path p = c.prep_path() / "vocab.txt";
  require(p, "prep");
  return Tokenizer::load(p);
}

std::vector<TrainingExample> read_examples(const RunConfig& c, const std::string& name) {
  fs::path p = c.prep_path() / (name + ".jsonl");
  require(p, "prep");
  return load_examples(p);
}

PretrainResult read_encoder(const RunConfig& c) {
  fs::path p = c.gnn_path() / "encoder.ckpt";
  require(p, "pretrain-gnn");
  return pretrain_result_from_checkpoint(load_checkpoint(p));
}

SequenceModel read_model(const RunConfig& c) {
  fs::path p = c.model_path() / "model.ckpt";
  require(p, "train");
  return model_from_checkpoint(load_checkpoint(p));
}

std::vector<std::size_t> points_in(const Corpus& corpus, const std::vector<std::string>& kernels) {
  std::set<std::string> wanted(kernels.begin(), kernels.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < corpus.points.size(); ++i) {
    if (wanted.count(corpus.points[i].kernel_id)) out.push_back(i);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second.set(*this, value);
  } catch (const ConfigError&) {
    throw ConfigError("bad value '" + value + "' for " + key);
  }
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [key, f] : fields()) out += key + " = " + f.get(*this) + "\n";
  return out;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, f] : fields()) out.push_back(key);
  return out;
}

std::uint64_t RunConfig::resolved_corpus_seed() const { return corpus_seed.value_or(derive_seed(seed, kCorpus)); }
std::uint64_t RunConfig::resolved_split_seed() const { return split_seed.value_or(derive_seed(seed, kSplit)); }
std::uint64_t RunConfig::resolved_resample_seed() const {
  return resample_seed.value_or(derive_seed(seed, kResample));
}
std::uint64_t RunConfig::resolved_gnn_seed() const { return gnn_seed.value_or(derive_seed(seed, kGnn)); }
std::uint64_t RunConfig::resolved_train_seed() const { return train_seed.value_or(derive_seed(seed, kTrain)); }
std::uint64_t RunConfig::resolved_eval_seed() const { return eval_seed.value_or(derive_seed(seed, kEval)); }

fs::path RunConfig::work() const {
  if (work_dir.empty()) throw ConfigError("no output directory: set work.dir in the config or pass --work");
  return work_dir;
}

fs::path RunConfig::corpus_path() const { return corpus_dir.empty() ? work() / "corpus" : fs::path(corpus_dir); }

SyntheticSpec RunConfig::synthetic_spec() const {
  SyntheticSpec s;
  s.seed = resolved_corpus_seed();
  s.n_kernels = n_kernels;
  s.configs_per_kernel = configs_per_kernel;
  s.budget = budget;
  s.caps = caps;
  return s;
}

PretrainConfig RunConfig::pretrain_config() const {
  PretrainConfig p = gnn;
  p.seed = resolved_gnn_seed();
  return p;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = resolved_train_seed();
  return t;
}

EvalConfig RunConfig::eval_config() const {
  EvalConfig e;
  e.budget = budget;
  e.caps = caps;
  e.n_random = eval_n_random;
  e.seed = resolved_eval_seed();
  e.exhaustive_limit = eval_exhaustive_limit;
  return e;
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected `key = value`");
    }
    try {
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(text, path.string());
}

void apply_environment(RunConfig& config) {
  if (const char* s = std::getenv("LIFT_SEED")) {
    try {
      config.seed = parse_number<std::uint64_t>("LIFT_SEED", s);
    } catch (const ConfigError&) {
      throw ConfigError(std::string("bad LIFT_SEED value '") + s + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// Commands

void cmd_gen_corpus(const RunConfig& config, std::ostream& out) {
  fs::path dir = config.corpus_path();
  Corpus corpus = generate_synthetic(config.synthetic_spec());
  // Drop kernels left over from an earlier, larger run.
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() && !corpus.kernels.count(entry.path().filename().string()) &&
          (fs::exists(entry.path() / "kernel.c") || fs::exists(entry.path() / "points.jsonl"))) {
        fs::remove_all(entry.path());
      }
    }
  }
  save_corpus(corpus, dir);
  std::size_t valid = 0;
  for (const auto& p : corpus.points) valid += p.valid;
  out << "wrote " << corpus.kernels.size() << " kernels and " << corpus.points.size() << " design points (" << valid
      << " valid) to " << dir.string() << '\n';
}

void cmd_prep(const RunConfig& config, std::ostream& out) {
  Corpus corpus = read_corpus(config, out);
  Split s = split(corpus, {config.split_train, config.split_validation, config.split_test},
                  config.resolved_split_seed());
  Tokenizer tok = build_tokenizer(corpus);
  ResampleParams rp = config.resample;
  rp.seed = config.resolved_resample_seed();
  Dataset ds = build_dataset(corpus, s, config.weight, rp, tok);

  fs::path dir = config.prep_path();
  fs::create_directories(dir);
  write_file(dir / "split.json", split_to_json(s).dump(2) + "\n");
  tok.save(dir / "vocab.txt");
  save_examples(ds.train, dir / "train.jsonl");
  save_examples(ds.validation, dir / "validation.jsonl");
  save_examples(ds.test, dir / "test.jsonl");

  std::ostringstream sum;
  sum << "kernels: " << s.train.size() << " train, " << s.validation.size() << " validation, " << s.test.size()
      << " test\n";
  sum << "train points: " << ds.summary.train_points << '\n';
  sum << "high-weight points: " << ds.summary.n_high << '\n';
  sum << "low-weight points: " << ds.summary.n_low << '\n';
  sum << "resampled train examples: " << ds.train.size() << '\n';
  sum << "validation examples: " << ds.validation.size() << '\n';
  sum << "test examples: " << ds.test.size() << '\n';
  sum << "weight range: [" << show(ds.summary.min_weight) << ", " << show(ds.summary.max_weight) << "]\n";
  sum << "vocabulary: " << tok.size() << " tokens\n";
  write_file(dir / "summary.txt", sum.str());
  out << sum.str();
}

void cmd_pretrain_gnn(const RunConfig& config, std::ostream& out) {
  Corpus corpus = read_corpus(config, out);
  Split s = read_split(config);
  std::map<std::string, KernelAst> asts;
  auto graphs_of = [&](const std::vector<std::string>& kernels, std::vector<ProgramGraph>& g, std::vector<double>& t) {
    for (std::size_t i : points_in(corpus, kernels)) {
      const DesignPoint& p = corpus.points[i];
      auto it = asts.find(p.kernel_id);
      if (it == asts.end()) it = asts.emplace(p.kernel_id, parse_kernel(corpus.kernels.at(p.kernel_id))).first;
      g.push_back(build_graph(it->second, p.point));
      t.push_back(latency_target(p));
    }
  };
  std::vector<ProgramGraph> train_g, val_g;
  std::vector<double> train_t, val_t;
  graphs_of(s.train, train_g, train_t);
  graphs_of(s.validation, val_g, val_t);
  if (train_g.empty()) throw MissingArtifact("no train points to pretrain on");

  PretrainResult r = pretrain_gnn(train_g, train_t, config.pretrain_config());
  fs::path dir = config.gnn_path();
  fs::create_directories(dir);
  save_checkpoint(to_checkpoint(r), dir / "encoder.ckpt");

  std::ostringstream log;
  for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
    log << "epoch=" << e + 1 << " loss=" << show(r.epoch_loss[e]) << '\n';
  }
  log << "train_spearman=" << show(spearman(r.predict(train_g), train_t)) << '\n';
  if (!val_g.empty()) log << "validation_spearman=" << show(spearman(r.predict(val_g), val_t)) << '\n';
  write_file(dir / "pretrain.log", log.str());
  out << log.str();
}

void cmd_train(const RunConfig& config, std::ostream& out) {
  Corpus corpus = read_corpus(config, out);
  Tokenizer tok = read_vocab(config);
  std::vector<TrainingExample> train_set = read_examples(config, "train");
  std::vector<TrainingExample> validation = read_examples(config, "validation");
  std::size_t longest = 0;
  for (const auto* set : {&train_set, &validation}) {
    for (const auto& ex : *set) longest = std::max(longest, ex.tokens.size());
  }
  for (const auto& [id, src] : corpus.kernels) longest = std::max(longest, tok.encode(src).size() + 1024);
  PretrainResult pre = read_encoder(config);

  TrainConfig tc = config.train_config();
  SequenceModel model = make_model(tok, tc, longest);
  LiftContext ctx(corpus, tok, pre.encoder, config.caps);

  fs::path dir = config.model_path();
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("epoch-", 0) == 0) fs::remove(entry.path());
  }
  std::ofstream log(dir / "metrics.log", std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + (dir / "metrics.log").string());
  train(model, ctx, train_set, validation, tc, [&](const EpochMetrics& m, const SequenceModel& current) {
    save_checkpoint(to_checkpoint(current), dir / ("epoch-" + std::to_string(m.epoch) + ".ckpt"));
    EpochMetrics logged = m;
    if (config.deterministic) logged.wall_seconds = 0;
    log << format_metrics(logged) << '\n';
    log.flush();
    out << format_metrics(m) << std::endl;
  });
  save_checkpoint(to_checkpoint(model), dir / "model.ckpt");
  out << "wrote " << (dir / "model.ckpt").string() << '\n';
}

void cmd_predict(const RunConfig& config, const fs::path& kernel, std::ostream& out) {
  if (!fs::exists(kernel)) throw MissingArtifact("missing kernel file " + kernel.string());
  Tokenizer tok = read_vocab(config);
  SequenceModel model = read_model(config);
  std::string source = read_file(kernel);
  PragmaConfig c = predict(model, tok, source, config.caps);
  out << substitute(source, c);
}

void cmd_eval(const RunConfig& config, std::ostream& out) {
  Corpus corpus = read_corpus(config, out);
  Split s = read_split(config);
  Tokenizer tok = read_vocab(config);
  SequenceModel model = read_model(config);
  std::vector<std::string> warnings;
  EvalReport r = evaluate(model, tok, corpus, s.test, config.eval_config(), &warnings);
  for (const auto& w : warnings) out << "warning: " << w << '\n';

  fs::path dir = config.eval_path();
  fs::create_directories(dir);
  std::string text = format_report(r);
  write_file(dir / "report.txt", text);
  json j = report_to_json(r);
  std::string rows;
  for (const auto& row : j["rows"]) rows += row.dump() + "\n";
  write_file(dir / "report.jsonl", rows);
  j.erase("rows");
  write_file(dir / "summary.json", j.dump(2) + "\n");
  out << text;
}

void cmd_export_embeddings(const RunConfig& config, const std::string& which, const fs::path& path,
                           std::ostream& out) {
  Corpus corpus = read_corpus(config, out);
  Split s = read_split(config);
  Tokenizer tok = read_vocab(config);
  SequenceModel model = read_model(config);
  PretrainResult pre = read_encoder(config);
  std::vector<std::size_t> points;
  if (which == "all") {
    points.resize(corpus.points.size());
    for (std::size_t i = 0; i < points.size(); ++i) points[i] = i;
  } else if (which == "train") {
    points = points_in(corpus, s.train);
  } else if (which == "validation") {
    points = points_in(corpus, s.validation);
  } else if (which == "test") {
    points = points_in(corpus, s.test);
  } else {
    throw ConfigError("unknown split '" + which + "' (expected train, validation, test or all)");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  export_embeddings(model, pre.encoder, corpus, tok, points, path);
  out << "wrote " << points.size() << " rows to " << path.string() << '\n';
}

}  // namespace pragmafill
