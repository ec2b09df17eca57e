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

#include "mlfsc/evaluate.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "mlfsc/error.hpp"

namespace mlfsc {

const char* eval_mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::kBase: return "base";
    case EvalMode::kLcm: return "lcm";
    case EvalMode::kZeroShot: return "zeroshot";
    case EvalMode::kSimpleAttention: return "simple-attention";
  }
  return "?";
}

EvalMode parse_eval_mode(const std::string& name) {
  for (EvalMode m : {EvalMode::kBase, EvalMode::kLcm, EvalMode::kZeroShot,
                     EvalMode::kSimpleAttention})
    if (name == eval_mode_name(m)) return m;
  throw Error("invalid-config", "unknown evaluation mode '" + name +
                                    "' (expected base, lcm, zeroshot or simple-attention)");
}

std::uint64_t eval_episode_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed(derive_seed(seed, "eval"), index);
}

ScoredEpisode score_episode(const ModelParams& params, const SplitData& data,
                            const EvalConfig& config, std::size_t index) {
  ScoredEpisode out;
  out.episode = sample_episode_with_retry(data.manifest, data.labels, config.k_shot,
                                          eval_episode_seed(config.seed, index));
  const EpisodeData episode = make_episode_data(out.episode, data.maps, data.label_embeddings);

  ForwardOptions options;
  std::vector<SelectionMask> masks;
  switch (config.mode) {
    case EvalMode::kBase: break;
    case EvalMode::kLcm:
      masks = lcm_masks(params.joint, episode, config.lcm);
      options.masks = &masks;
      break;
    case EvalMode::kZeroShot: options.prototypes = PrototypeMode::kZeroShot; break;
    case EvalMode::kSimpleAttention: options.prototypes = PrototypeMode::kSimpleAttention; break;
  }
  ad::Tape tape;
  const EpisodeOutput fwd = forward_episode(tape, bind(tape, params, false), episode, options);
  const Tensor& logits = fwd.query_logits.value();
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 1.0 / (1.0 + std::exp(-logits[i]));
  out.probabilities = Tensor(logits.shape(), std::move(p));
  out.truths = episode.query_targets;
  return out;
}

EvalResult evaluate(const ModelParams& params, const SplitData& data, const EvalConfig& config) {
  check(config.episodes > 0, "invalid-config", "need at least one evaluation episode");
  check(config.k_shot >= 1, "invalid-config", "k_shot must be at least 1");
  if (config.mode == EvalMode::kLcm) config.lcm.validate();

  EvalResult result;
  result.episodes.resize(config.episodes);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < config.episodes; i = next++) {
      try {
        const ScoredEpisode s = score_episode(params, data, config, i);
        result.episodes[i] = episode_metrics(s.probabilities, s.truths);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = config.episodes;
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, config.episodes));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  result.report = aggregate(result.episodes, data.labels);
  return result;
}

nlohmann::ordered_json to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["mi_ap"] = report.mi_ap;
  j["ma_ap"] = report.ma_ap;
  j["mi_f1"] = report.mi_f1;
  j["ma_f1"] = report.ma_f1;
  nlohmann::ordered_json labels = nlohmann::ordered_json::object();
  for (const auto& [name, ap] : report.label_ap) labels[name] = ap;
  j["per_label_ap"] = labels;
  j["episodes"] = report.episodes;
  return j;
}

}  // namespace mlfsc
