// Copyright 2026 The mlfsc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mlfsc/data.hpp"
#include "mlfsc/evaluate.hpp"
#include "mlfsc/model.hpp"
#include "mlfsc/trainer.hpp"

namespace mlfsc {

/// Every tunable of a run as one flat key = value document.
///
/// Text form: one `key = value` pair per line, `#` starts a comment, blank
/// lines are ignored. Unknown keys and unparsable values raise
/// Error("invalid-config") naming the offending line.
struct RunConfig {
  std::size_t d_j = 64;
  std::size_t n_heads = 8;
  std::size_t d_c = 16;
  std::size_t n_d = 8;
  double lambda = 10.0;
  double gamma = 1.0;
  double theta = 0.65;
  double lr = 1e-3;
  double lcm_lr = 0.01;
  std::size_t epochs = 30;
  std::size_t warmup_epochs = 3;
  std::size_t lcm_epochs = 20;
  std::size_t episodes_per_epoch = 16;
  std::size_t eval_episodes = 50;
  std::size_t k_shot = 1;
  std::uint64_t seed = 1;
  double dropout = 0.1;
  std::size_t threads = 1;
  std::string prototype = "cross-interaction";
  std::uint64_t dataset_seed = 7;  // consumed by synth only

  std::filesystem::path manifest = "data/manifest.jsonl";
  std::filesystem::path embeddings = "data/embeddings.txt";
  std::filesystem::path splits = "data/splits.tsv";
  std::filesystem::path checkpoint = "run/model.ckpt";
  std::filesystem::path output = "run";

  /// Assigns one key from its text form.
  void set(const std::string& key, const std::string& value);
  /// Parses a document on top of the current values.
  void merge_text(const std::string& text);
  /// Key order is fixed; parse(to_text()) reproduces the config exactly.
  std::string to_text() const;
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  static const std::vector<std::string>& keys();

  /// n_heads divides d_j, theta in [0.5, 1), k_shot >= 1, plus the
  /// component checks of the derived configs.
  void validate() const;

  ModelConfig model_config(std::size_t channels, std::size_t embedding_dim) const;
  TrainConfig train_config() const;
  EvalConfig eval_config(EvalMode mode) const;
  DataPaths data_paths() const;
};

/// Twelve hex digits identifying a run: a 64-bit FNV-1a digest of the
/// effective config text and the given context string.
std::string run_id(const RunConfig& config, const std::string& context);

}  // namespace mlfsc
