// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0

#include "pragmafill/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pragmafill {

namespace {

constexpr const char* kMagic = "pragmafill-checkpoint 1";

[[noreturn]] void fail(int line, const std::string& msg) {
  throw std::runtime_error("checkpoint line " + std::to_string(line) + ": " + msg);
}

template <typename T>
void load_params(ParameterList<T>& params, const Checkpoint& c) {
  for (auto& p : params) {
    const Mat<double>& m = c.tensor(p.name);
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
      throw std::runtime_error("checkpoint tensor " + p.name + " has the wrong shape");
    }
    p.value = m;
  }
}

int get_int(const Checkpoint& c, const std::string& key) { return std::stoi(c.get(key)); }

}  // namespace

const Mat<double>& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return m;
  }
  throw std::runtime_error("checkpoint has no tensor " + name);
}

const std::string& Checkpoint::get(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw std::runtime_error("checkpoint has no meta key " + key);
  return it->second;
}

std::string checkpoint_to_string(const Checkpoint& c) {
  std::string out = kMagic;
  out += '\n';
  for (const auto& [k, v] : c.meta) out += "meta " + k + " " + v + "\n";
  char buf[40];
  for (const auto& [name, m] : c.tensors) {
    out += "tensor " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (j) out += ' ';
        auto r = std::to_chars(buf, buf + sizeof(buf), m(i, j));
        out.append(buf, r.ptr);
      }
      out += '\n';
    }
  }
  return out;
}

Checkpoint checkpoint_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 1;
  if (!std::getline(in, line) || line != kMagic) fail(lineno, "not a pragmafill checkpoint");
  Checkpoint c;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls, value);
      if (!value.empty() && value[0] == ' ') value.erase(0, 1);
      c.meta[key] = value;
    } else if (tag == "tensor") {
      std::string name;
      Eigen::Index rows = -1, cols = -1;
      ls >> name >> rows >> cols;
      if (!ls || rows < 0 || cols < 0) fail(lineno, "bad tensor header");
      Mat<double> m(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) fail(lineno, "truncated tensor " + name);
        ++lineno;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (Eigen::Index j = 0; j < cols; ++j) {
          while (p < end && *p == ' ') ++p;
          auto r = std::from_chars(p, end, m(i, j));
          if (r.ec != std::errc()) fail(lineno, "bad value in tensor " + name);
          p = r.ptr;
        }
      }
      c.tensors.emplace_back(name, std::move(m));
    } else {
      fail(lineno, "unknown record '" + tag + "'");
    }
  }
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_string(c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_from_string(text);
}

Checkpoint to_checkpoint(const GraphEncoder& enc) {
  Checkpoint c;
  c.meta["kind"] = "graph-encoder";
  c.meta["layers"] = std::to_string(enc.options().layers);
  c.meta["hidden"] = std::to_string(enc.options().hidden);
  c.meta["embed"] = std::to_string(enc.options().embed);
  c.meta["linear"] = enc.options().linear ? "1" : "0";
  c.meta["features"] = std::to_string(feature::kDim);
  for (const auto& p : enc.params()) c.tensors.emplace_back(p.name, p.value);
  return c;
}

GraphEncoder encoder_from_checkpoint(const Checkpoint& c) {
  if (c.get("kind") != "graph-encoder") throw std::runtime_error("checkpoint is not a graph encoder");
  if (get_int(c, "features") != feature::kDim) throw std::runtime_error("checkpoint feature dimension mismatch");
  EncoderOptions o;
  o.layers = get_int(c, "layers");
  o.hidden = get_int(c, "hidden");
  o.embed = get_int(c, "embed");
  o.linear = c.get("linear") == "1";
  GraphEncoder enc(o);
  load_params(enc.params(), c);
  return enc;
}

Checkpoint to_checkpoint(const SequenceModel& model) {
  Checkpoint c;
  c.meta["kind"] = "sequence-model";
  c.meta["vocab"] = std::to_string(model.options().vocab);
  c.meta["width"] = std::to_string(model.options().width);
  c.meta["context"] = std::to_string(model.options().context);
  for (const auto& p : model.params()) c.tensors.emplace_back(p.name, p.value);
  return c;
}

SequenceModel model_from_checkpoint(const Checkpoint& c) {
  if (c.get("kind") != "sequence-model") throw std::runtime_error("checkpoint is not a sequence model");
  SequenceModelOptions o;
  o.vocab = get_int(c, "vocab");
  o.width = get_int(c, "width");
  o.context = get_int(c, "context");
  SequenceModel m(o);
  load_params(m.params(), c);
  return m;
}

}  // namespace pragmafill
