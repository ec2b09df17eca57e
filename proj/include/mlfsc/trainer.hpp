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

// Episodic training on the base split: each episode contributes the
// cross-modality loss of its support set plus gamma times the query loss,
// and every parameter takes one Adam step per episode.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mlfsc/data.hpp"
#include "mlfsc/model.hpp"
#include "mlfsc/optim.hpp"

namespace mlfsc {

struct TrainConfig {
  double gamma = 1.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 30;  // total, including epochs already in the state
  std::size_t warmup_epochs = 3;
  std::size_t k_shot = 1;
  std::size_t episodes_per_epoch = 16;
  std::uint64_t seed = 1;
  PrototypeMode prototypes = PrototypeMode::kCrossInteraction;

  void validate() const;
};

struct ModelState {
  ModelConfig config;
  ModelParams params;
  std::map<std::string, AdamMoments> moments;
  std::size_t epoch = 0;  // completed epochs
  std::size_t step = 0;   // completed optimizer steps

  /// Parameters drawn from the "init" sub-stream of seed.
  static ModelState fresh(const ModelConfig& config, std::uint64_t seed);
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double cm_loss = 0.0;   // means over the epoch's episodes
  double query_loss = 0.0;
  double total_loss = 0.0;
  double lr = 0.0;
};

/// Linear ramp (e + 1) / warmup * lr during warm-up, then lr. epoch is 0-based.
double learning_rate_at(const TrainConfig& config, std::size_t epoch);
std::uint64_t train_episode_seed(std::uint64_t seed, std::size_t epoch, std::size_t index);

using EpochCallback = std::function<void(const EpochLog&, const ModelState&)>;

/// Trains from state.epoch up to config.epochs. A non-finite loss or
/// parameter raises Error("numeric-failure") naming the epoch and episode seed.
std::vector<EpochLog> train(ModelState& state, const SplitData& data, const TrainConfig& config,
                            const EpochCallback& on_epoch = {});

/// CSV with header epoch,cm_loss,query_loss,total_loss,lr.
void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& logs);
std::vector<EpochLog> read_training_log(const std::filesystem::path& path);

}  // namespace mlfsc
