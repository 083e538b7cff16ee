// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include "pragmafill/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "pragmafill/rng.hpp"

namespace pragmafill {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::size_t> Corpus::points_of(const std::string& kernel_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].kernel_id == kernel_id) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generation

namespace {

constexpr std::array<std::int64_t, 4> kTripCounts = {16, 32, 64, 128};
constexpr std::array<const char*, 3> kLoopVars = {"i", "j", "k"};

struct ArrayDef {
  std::string name;
  std::vector<int> levels;  // loop levels indexing each dimension
};

class KernelWriter {
 public:
  KernelWriter(Rng& rng, std::string name) : rng_(rng), name_(std::move(name)) {}

  std::string build() {
    depth_ = 1 + static_cast<int>(rng_.below(3));
    for (int l = 0; l < depth_; ++l) trips_.push_back(kTripCounts[rng_.below(kTripCounts.size())]);

    std::size_t n_stmts = 1 + rng_.below(4);
    std::vector<std::vector<std::string>> per_level(static_cast<std::size_t>(depth_));
    for (std::size_t s = 0; s < n_stmts; ++s) {
      int level = depth_ - 1;
      if (s > 0 && depth_ > 1 && rng_.bernoulli(0.25)) level = static_cast<int>(rng_.below(depth_ - 1));
      per_level[static_cast<std::size_t>(level)].push_back(statement(level));
    }
    bool tile = rng_.bernoulli(0.5);

    std::ostringstream body;
    for (int l = 0; l < depth_; ++l) {
      std::string pad(static_cast<std::size_t>(2 * (l + 1)), ' ');
      std::string label = "L" + std::to_string(l);
      if (l == 0) {
        body << pad << "#pragma ACCEL PIPELINE auto{__PIPE__" << label << "}\n";
        if (tile) body << pad << "#pragma ACCEL TILE FACTOR=auto{__TILE__" << label << "}\n";
      }
      body << pad << "#pragma ACCEL PARALLEL FACTOR=auto{__PARA__" << label << "}\n";
      const char* v = kLoopVars[static_cast<std::size_t>(l)];
      body << pad << "for (int " << v << " = 0; " << v << " < " << trips_[static_cast<std::size_t>(l)] << "; "
           << v << "++) {\n";
      for (const auto& s : per_level[static_cast<std::size_t>(l)]) body << pad << "  " << s << '\n';
    }
    for (int l = depth_ - 1; l >= 0; --l) body << std::string(static_cast<std::size_t>(2 * (l + 1)), ' ') << "}\n";

    std::ostringstream src;
    src << "#pragma ACCEL kernel\n\nvoid " << name_ << "(";
    for (std::size_t a = 0; a < arrays_.size(); ++a) {
      if (a) src << ", ";
      src << "double " << arrays_[a].name;
      for (int l : arrays_[a].levels) src << '[' << trips_[static_cast<std::size_t>(l)] << ']';
    }
    if (uses_alpha_) src << (arrays_.empty() ? "" : ", ") << "double alpha";
    src << ")\n{\n" << body.str() << "}\n";
    return src.str();
  }

 private:
  std::string access(int level, bool is_lhs) {
    std::vector<int> levels;
    for (int l = 0; l <= level; ++l) {
      if (is_lhs ? (l == level || rng_.bernoulli(0.7)) : rng_.bernoulli(0.6)) levels.push_back(l);
    }
    if (levels.empty()) levels.push_back(static_cast<int>(rng_.below(static_cast<std::uint64_t>(level) + 1)));
    if (!is_lhs && levels.size() > 1 && rng_.bernoulli(0.3)) std::reverse(levels.begin(), levels.end());

    const ArrayDef* chosen = nullptr;
    if (rng_.bernoulli(0.4)) {
      for (const auto& a : arrays_) {
        if (a.levels == levels) {
          chosen = &a;
          break;
        }
      }
    }
    if (!chosen) {
      arrays_.push_back({std::string(1, static_cast<char>('A' + arrays_.size())), levels});
      chosen = &arrays_.back();
    }
    std::string s = chosen->name;
    for (int l : chosen->levels) s += std::string("[") + kLoopVars[static_cast<std::size_t>(l)] + "]";
    return s;
  }

  std::string statement(int level) {
    std::string lhs = access(level, true);
    std::string op = rng_.bernoulli(0.5) ? "=" : "+=";
    std::size_t terms = 1 + rng_.below(3);
    std::string rhs;
    for (std::size_t t = 0; t < terms; ++t) {
      if (t) {
        static const char* kOps[] = {" + ", " * ", " - ", " * "};
        rhs += kOps[rng_.below(4)];
      }
      double r = rng_.uniform();
      if (r < 0.8) {
        rhs += access(level, false);
      } else if (r < 0.9) {
        rhs += "alpha";
        uses_alpha_ = true;
      } else {
        rhs += "2";
      }
    }
    return lhs + " " + op + " " + rhs + ";";
  }

  Rng& rng_;
  std::string name_;
  int depth_ = 1;
  std::vector<std::int64_t> trips_;
  std::vector<ArrayDef> arrays_;
  bool uses_alpha_ = false;
};

std::string kernel_id_for(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "k%03zu", i);
  return buf;
}

}  // namespace

Corpus generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_kernels < 1) throw std::invalid_argument("generate_synthetic: n_kernels must be >= 1");
  if (spec.configs_per_kernel < 2) throw std::invalid_argument("generate_synthetic: configs_per_kernel must be >= 2");

  Corpus corpus;
  for (std::size_t k = 0; k < spec.n_kernels; ++k) {
    std::string id = kernel_id_for(k);
    Rng rng(derive_seed(spec.seed, k));
    // Redraw until the space is large enough to sample from and small
    // enough to enumerate.
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw std::runtime_error("generate_synthetic: cannot draw a usable kernel");
      std::string src = serialize(parse_kernel(KernelWriter(rng, "kernel_" + id).build()));
      KernelAst ast = parse_kernel(src);
      std::uint64_t size = 0;
      try {
        size = enumerate_space(ast, spec.caps).size();
      } catch (const SpaceTooLargeError&) {
        continue;
      }
      if (size < spec.configs_per_kernel) continue;

      ConfigSpace space = enumerate_space(ast, spec.caps);
      auto picks = rng.sample_without_replacement(size, spec.configs_per_kernel);
      std::sort(picks.begin(), picks.end());
      corpus.kernels[id] = src;
      for (auto index : picks) {
        DesignPoint p;
        p.kernel_id = id;
        p.point = space.at(index);
        OracleReport r = estimate(ast, p.point, spec.budget);
        p.valid = r.valid;
        p.perf = r.valid ? static_cast<double>(r.cycles) : 0.0;
        p.res_util["util-units"] = static_cast<double>(r.units) / static_cast<double>(spec.budget.max_units);
        corpus.points.push_back(std::move(p));
      }
      break;
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Records

json config_to_json(const PragmaConfig& c) {
  json j = json::object();
  for (const auto& [id, v] : c) {
    if (v.is_pipeline()) {
      j[id] = std::string(to_string(v.mode()));
    } else {
      j[id] = v.factor();
    }
  }
  return j;
}

json point_to_json(const DesignPoint& p) {
  json j = p.extra.is_object() ? p.extra : json::object();
  j["perf"] = p.perf;
  j["point"] = config_to_json(p.point);
  j["res_util"] = json::object();
  for (const auto& [k, v] : p.res_util) j["res_util"][k] = v;
  j["valid"] = p.valid;
  return j;
}

namespace {

bool parse_valid_flag(const json& v, const std::string& where) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s == "True" || s == "true") return true;
    if (s == "False" || s == "false") return false;
  }
  throw CorpusError(where + ": field 'valid' must be a boolean");
}

}  // namespace

DesignPoint point_from_json(const json& j, const std::string& kernel_id, const std::vector<PragmaSlot>& slots,
                            const std::string& where) {
  if (!j.is_object()) throw CorpusError(where + ": record is not a JSON object");
  DesignPoint p;
  p.kernel_id = kernel_id;
  for (const char* key : {"perf", "point", "valid"}) {
    if (!j.contains(key)) throw CorpusError(where + ": missing field '" + key + "'");
  }
  if (j.contains("kernel_id")) {
    if (!j["kernel_id"].is_string() || j["kernel_id"].get<std::string>() != kernel_id) {
      throw CorpusError(where + ": point references unknown kernel '" + j["kernel_id"].dump() + "'");
    }
  }
  const json& perf = j["perf"];
  if (!perf.is_number() || perf.get<double>() < 0 || !std::isfinite(perf.get<double>())) {
    throw CorpusError(where + ": field 'perf' must be a non-negative number");
  }
  p.perf = perf.get<double>();
  p.valid = parse_valid_flag(j["valid"], where);
  if (p.perf == 0) p.valid = false;

  const json& point = j["point"];
  if (!point.is_object()) throw CorpusError(where + ": field 'point' must be an object");
  for (const auto& slot : slots) {
    if (!point.contains(slot.id)) throw CorpusError(where + ": field 'point' misses slot " + slot.id);
    const json& v = point[slot.id];
    if (slot.kind == PragmaKind::Pipeline) {
      auto mode = v.is_string() ? parse_pipeline_mode(v.get<std::string>()) : std::nullopt;
      if (!mode) throw CorpusError(where + ": field 'point." + slot.id + "' must be \"off\", \"cg\" or \"flatten\"");
      p.point.set(slot.id, PragmaValue::pipeline(*mode));
    } else {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
        throw CorpusError(where + ": field 'point." + slot.id + "' must be a positive integer");
      }
      p.point.set(slot.id, PragmaValue::factor(v.get<std::int64_t>()));
    }
  }
  for (const auto& [key, _] : point.items()) {
    bool known = std::any_of(slots.begin(), slots.end(), [&](const PragmaSlot& s) { return s.id == key; });
    if (!known) throw CorpusError(where + ": field 'point' names unknown slot " + key);
  }

  if (j.contains("res_util")) {
    const json& ru = j["res_util"];
    if (!ru.is_object()) throw CorpusError(where + ": field 'res_util' must be an object");
    for (const auto& [k, v] : ru.items()) {
      if (!v.is_number()) throw CorpusError(where + ": field 'res_util." + k + "' must be a number");
      p.res_util[k] = v.get<double>();
    }
  }
  for (const auto& [k, v] : j.items()) {
    if (k != "perf" && k != "point" && k != "res_util" && k != "valid") p.extra[k] = v;
  }
  return p;
}

void save_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [id, src] : corpus.kernels) {
    fs::path kdir = dir / id;
    fs::create_directories(kdir);
    std::ofstream(kdir / "kernel.c", std::ios::binary) << src;
    std::ofstream out(kdir / "points.jsonl", std::ios::binary);
    for (const auto& p : corpus.points) {
      if (p.kernel_id == id) out << point_to_json(p).dump() << '\n';
    }
  }
}

Corpus load_hlsyn(const fs::path& dir, std::vector<std::string>* warnings) {
  auto warn = [&](const std::string& msg) {
    if (warnings) {
      warnings->push_back(msg);
    } else {
      std::clog << "warning: " << msg << '\n';
    }
  };
  if (!fs::is_directory(dir)) throw CorpusError("corpus directory not found: " + dir.string());

  std::vector<fs::path> kernel_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) kernel_dirs.push_back(entry.path());
  }
  std::sort(kernel_dirs.begin(), kernel_dirs.end());

  Corpus corpus;
  for (const auto& kdir : kernel_dirs) {
    std::string id = kdir.filename().string();
    fs::path kfile = kdir / "kernel.c";
    fs::path pfile = kdir / "points.jsonl";
    if (!fs::exists(kfile)) {
      if (fs::exists(pfile)) throw CorpusError(pfile.string() + ": points reference unknown kernel '" + id + "'");
      continue;
    }
    std::ifstream kin(kfile, std::ios::binary);
    std::string src((std::istreambuf_iterator<char>(kin)), std::istreambuf_iterator<char>());
    std::vector<PragmaSlot> slots;
    try {
      slots = extract_slots(parse_kernel(src));
    } catch (const ParseError& e) {
      throw CorpusError(kfile.string() + ":" + e.what());
    }
    corpus.kernels[id] = src;
    if (!fs::exists(pfile)) {
      warn("kernel '" + id + "' has no points.jsonl");
      continue;
    }
    std::ifstream pin(pfile, std::ios::binary);
    std::string line;
    int lineno = 0;
    while (std::getline(pin, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::string where = pfile.string() + ":" + std::to_string(lineno);
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw CorpusError(where + ": malformed JSON (" + e.what() + ")");
      }
      corpus.points.push_back(point_from_json(j, id, slots, where));
    }
  }
  if (corpus.kernels.empty()) warn("corpus directory " + dir.string() + " contains no kernels");
  return corpus;
}

// ---------------------------------------------------------------------------
// Split

Split split(const Corpus& corpus, const std::array<double, 3>& fractions, std::uint64_t seed) {
  double sum = 0;
  for (double f : fractions) {
    if (f < 0) throw std::invalid_argument("split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");

  std::vector<std::string> ids;
  for (const auto& [id, _] : corpus.kernels) ids.push_back(id);
  const std::size_t n = ids.size();
  std::size_t buckets = static_cast<std::size_t>(std::count_if(fractions.begin(), fractions.end(), [](double f) { return f > 0; }));
  if (n < buckets) {
    throw std::invalid_argument("split: " + std::to_string(n) + " kernels for " + std::to_string(buckets) + " buckets");
  }

  std::array<std::size_t, 3> counts{};
  std::size_t assigned = 0;
  for (std::size_t b = 0; b < 3; ++b) {
    counts[b] = static_cast<std::size_t>(std::floor(fractions[b] * static_cast<double>(n) + 1e-9));
    assigned += counts[b];
  }
  for (std::size_t b = 0; assigned < n; b = (b + 1) % 3) {
    if (fractions[b] > 0) {
      ++counts[b];
      ++assigned;
    }
  }

  Rng rng(seed);
  rng.shuffle(ids);
  Split s;
  std::array<std::vector<std::string>*, 3> out = {&s.train, &s.validation, &s.test};
  std::size_t pos = 0;
  for (std::size_t b = 0; b < 3; ++b) {
    out[b]->assign(ids.begin() + static_cast<std::ptrdiff_t>(pos), ids.begin() + static_cast<std::ptrdiff_t>(pos + counts[b]));
    std::sort(out[b]->begin(), out[b]->end());
    pos += counts[b];
  }
  return s;
}

json split_to_json(const Split& s) { return json{{"train", s.train}, {"validation", s.validation}, {"test", s.test}}; }

Split split_from_json(const json& j) {
  Split s;
  j.at("train").get_to(s.train);
  j.at("validation").get_to(s.validation);
  j.at("test").get_to(s.test);
  return s;
}

}  // namespace pragmafill
