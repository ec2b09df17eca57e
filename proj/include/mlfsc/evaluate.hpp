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

// Test-episode evaluation of a trained model in one of four prototype modes.
// Episode seeds depend only on the evaluation seed and index, so different
// modes score the same episodes.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mlfsc/data.hpp"
#include "mlfsc/lcm.hpp"
#include "mlfsc/metrics.hpp"
#include "mlfsc/model.hpp"

namespace mlfsc {

enum class EvalMode { kBase, kLcm, kZeroShot, kSimpleAttention };
const char* eval_mode_name(EvalMode mode);
EvalMode parse_eval_mode(const std::string& name);

struct EvalConfig {
  EvalMode mode = EvalMode::kBase;
  std::size_t episodes = 50;
  std::size_t k_shot = 1;
  std::uint64_t seed = 1;
  LcmConfig lcm;
  std::size_t threads = 1;
};

std::uint64_t eval_episode_seed(std::uint64_t seed, std::size_t index);

struct EvalResult {
  MetricsReport report;
  std::vector<EpisodeMetrics> episodes;
};

EvalResult evaluate(const ModelParams& params, const SplitData& data, const EvalConfig& config);

/// Query probabilities [Q, C] of one sampled episode.
struct ScoredEpisode {
  Episode episode;
  Tensor probabilities;
  Tensor truths;
};
ScoredEpisode score_episode(const ModelParams& params, const SplitData& data,
                            const EvalConfig& config, std::size_t index);

nlohmann::ordered_json to_json(const MetricsReport& report);

}  // namespace mlfsc
