// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Design-point corpora: synthetic generation labelled by the oracle, the
// on-disk HLSyn-style layout, and kernel-level splitting.

#ifndef PRAGMAFILL_CORPUS_HPP_
#define PRAGMAFILL_CORPUS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pragmafill/kernel.hpp"
#include "pragmafill/oracle.hpp"

namespace pragmafill {

struct DesignPoint {
  std::string kernel_id;
  PragmaConfig point;
  double perf = 0;  // cycles; 0 marks an invalid design
  std::map<std::string, double> res_util;
  bool valid = false;
  nlohmann::json extra = nlohmann::json::object();  // unknown record fields, kept verbatim

  bool operator==(const DesignPoint&) const = default;
};

struct Corpus {
  std::map<std::string, std::string> kernels;  // kernel_id -> source text
  std::vector<DesignPoint> points;             // grouped by kernel, in file order

  bool operator==(const Corpus&) const = default;

  /// Indices into `points` belonging to one kernel, in order.
  std::vector<std::size_t> points_of(const std::string& kernel_id) const;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t n_kernels = 150;
  std::size_t configs_per_kernel = 20;
  ResourceBudget budget;
  SpaceCaps caps;
};

Corpus generate_synthetic(const SyntheticSpec& spec);

/// Writes `<dir>/<kernel_id>/kernel.c` and `points.jsonl`.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Reads the layout written by save_corpus (and HLSyn-style records). Warnings
/// go to `warnings` when given, otherwise to std::clog.
Corpus load_hlsyn(const std::filesystem::path& dir, std::vector<std::string>* warnings = nullptr);

nlohmann::json point_to_json(const DesignPoint& p);
/// Parses one record; `where` prefixes error messages.
DesignPoint point_from_json(const nlohmann::json& j, const std::string& kernel_id,
                            const std::vector<PragmaSlot>& slots, const std::string& where);

nlohmann::json config_to_json(const PragmaConfig& c);

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  bool operator==(const Split&) const = default;
};

/// Kernel-level split. Bucket sizes are floor(f * n) with the remainder
/// handed out one by one in bucket order to buckets with positive fraction.
Split split(const Corpus& corpus, const std::array<double, 3>& fractions, std::uint64_t seed);

nlohmann::json split_to_json(const Split& s);
Split split_from_json(const nlohmann::json& j);

}  // namespace pragmafill

#endif  // PRAGMAFILL_CORPUS_HPP_
