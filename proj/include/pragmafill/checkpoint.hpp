// Copyright 2026 The pragmafill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Text checkpoints:
//
//   pragmafill-checkpoint 1
//   meta <key> <value>
//   tensor <name> <rows> <cols>
//   <row of values>            (rows lines, shortest round-trip decimals)
//
// Bytes depend only on the stored values.

#ifndef PRAGMAFILL_CHECKPOINT_HPP_
#define PRAGMAFILL_CHECKPOINT_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pragmafill/encoder.hpp"
#include "pragmafill/sequence_model.hpp"

namespace pragmafill {

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Mat<double>>> tensors;

  const Mat<double>& tensor(const std::string& name) const;
  const std::string& get(const std::string& key) const;
};

std::string checkpoint_to_string(const Checkpoint& c);
Checkpoint checkpoint_from_string(const std::string& text);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint to_checkpoint(const GraphEncoder& enc);
GraphEncoder encoder_from_checkpoint(const Checkpoint& c);
Checkpoint to_checkpoint(const SequenceModel& model);
SequenceModel model_from_checkpoint(const Checkpoint& c);

}  // namespace pragmafill

#endif  // PRAGMAFILL_CHECKPOINT_HPP_
