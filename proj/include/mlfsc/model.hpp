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

// The full episodic model: joint space, cross-interaction prototypes and the
// query scoring head, plus the LCM masking pass used at test time.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mlfsc/autodiff.hpp"
#include "mlfsc/cross_interaction.hpp"
#include "mlfsc/episodes.hpp"
#include "mlfsc/features.hpp"
#include "mlfsc/joint_space.hpp"
#include "mlfsc/lcm.hpp"
#include "mlfsc/random.hpp"

namespace mlfsc {

struct ModelConfig {
  std::size_t channels = 32;       // n
  std::size_t embedding_dim = 24;  // d_w
  std::size_t joint_dim = 64;      // d_j
  std::size_t heads = 8;           // n_a
  std::size_t inner_dim = 16;      // d_c
  std::size_t top_features = 8;    // n_d
  double lambda = 10.0;
  double dropout = 0.1;

  void validate() const;
};

struct ModelParams {
  JointSpaceParams joint;
  AttentionParams attention;
  DynConvParams dynconv;

  static ModelParams init(const ModelConfig& config, Rng& rng);

  template <typename F>
  void visit(F&& f) {
    joint.visit(f);
    attention.visit(f);
    dynconv.visit(f);
  }
};

struct ModelVars {
  JointSpaceVars joint;
  AttentionVars attention;
  DynConvVars dynconv;
};
ModelVars bind(ad::Tape& tape, const ModelParams& params, bool trainable);
/// Bound tensors in ModelParams::visit order.
std::vector<ad::Var> parameter_leaves(const ModelVars& vars);
/// Inverse of parameter_leaves: rebuilds ModelVars from leaves in visit
/// order, taking lambda, dropout and n_d from params.
ModelVars vars_from_leaves(const ModelParams& params, std::span<const ad::Var> leaves);

enum class PrototypeMode {
  kCrossInteraction,  // attention over local features plus dynamic convolution
  kSimpleAttention,   // attention term replaced by a weighted mean of globals
  kZeroShot,          // projected label embeddings, no visual support
};
const char* prototype_mode_name(PrototypeMode mode);
/// Error("invalid-config") for an unknown name.
PrototypeMode parse_prototype_mode(const std::string& name);

/// Inputs of one episode; maps are borrowed from a feature store.
struct EpisodeData {
  std::vector<const LocalFeatureMap*> support;
  std::vector<const LocalFeatureMap*> query;
  Tensor support_targets;   // [S, C]
  Tensor query_targets;     // [Q, C]
  Tensor label_embeddings;  // [C, d_w]
};

EpisodeData make_episode_data(const Episode& episode,
                              const std::vector<LocalFeatureMap>& maps,
                              const Tensor& label_embeddings);

struct ForwardOptions {
  PrototypeMode prototypes = PrototypeMode::kCrossInteraction;
  /// One mask per support image; null means keep every cell.
  const std::vector<SelectionMask>* masks = nullptr;
  bool train = false;
  std::uint64_t dropout_seed = 0;
};

struct EpisodeOutput {
  ad::Var cm_loss;
  ad::Var query_logits;  // [Q, C]
  ad::Var query_loss;
  ad::Var prototypes;    // [C, d_j]
  std::vector<std::vector<Tensor>> head_weights;  // per label, empty unless cross-interaction
};

EpisodeOutput forward_episode(ad::Tape& tape, const ModelVars& vars, const EpisodeData& data,
                              const ForwardOptions& options = {});

/// Summed BCE of lambda * cos(query, prototype) against the query targets.
/// query_joint [Q, d_j], prototypes [C, d_j].
ad::Var query_loss(ad::Var query_joint, ad::Var prototypes, const Tensor& targets,
                   double lambda);
ad::Var total_loss(ad::Var cm, ad::Var query, double gamma);

/// LCM pass over the support set with a frozen joint space. When an image
/// keeps no cell the mask falls back to all cells and a warning is logged.
std::vector<SelectionMask> lcm_masks(const JointSpaceParams& joint, const EpisodeData& data,
                                     const LcmConfig& config,
                                     std::vector<ImportanceMap>* states = nullptr);

}  // namespace mlfsc
