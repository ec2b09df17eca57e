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

#include "mlfsc/autodiff.hpp"
#include "mlfsc/random.hpp"
#include "mlfsc/tensor.hpp"

namespace mlfsc {

/// Bias-free linear maps of visual features (n) and label embeddings (d_w)
/// into a shared d_j-dimensional space, plus the cosine scale lambda.
struct JointSpaceParams {
  Tensor a_visual;  // [d_j, n]
  Tensor a_text;    // [d_j, d_w]
  double lambda = 10.0;

  /// Uniform in +-1/sqrt(fan_in).
  static JointSpaceParams init(std::size_t channels, std::size_t embedding_dim,
                               std::size_t joint_dim, double lambda, Rng& rng);

  std::size_t joint_dim() const { return a_visual.dim(0); }
  std::size_t channels() const { return a_visual.dim(1); }
  std::size_t embedding_dim() const { return a_text.dim(1); }

  template <typename F>
  void visit(F&& f) {
    f("joint.a_visual", a_visual);
    f("joint.a_text", a_text);
  }
};

Tensor project_visual(const JointSpaceParams& params, const Tensor& v);
Tensor project_label(const JointSpaceParams& params, const Tensor& w);
/// lambda * cos(v, w); Error("degenerate-vector") on a zero vector.
double score(const JointSpaceParams& params, const Tensor& v_joint,
             const Tensor& w_joint);

struct ScoreMatrix {
  Tensor logits;         // [images, labels]
  Tensor probabilities;  // sigmoid(logits)
};

struct JointSpaceVars {
  ad::Var a_visual;
  ad::Var a_text;
  double lambda = 10.0;
};
JointSpaceVars bind(ad::Tape& tape, const JointSpaceParams& params);
JointSpaceVars bind_frozen(ad::Tape& tape, const JointSpaceParams& params);

namespace ad {
/// rows [m, x] times matrix^T for a [d, x] matrix -> [m, d].
Var project_rows(Var rows, Var matrix);
/// lambda * cos(a_i, b_c) for every row pair -> [rows(a), rows(b)].
Var scaled_cosine_scores(Var a, Var b, double lambda);
}  // namespace ad

/// Cross-modality loss: summed BCE of the support images' global features
/// scored against projected label embeddings.
/// support_globals [S, n], label_embeddings [C, d_w], targets [S, C].
ad::Var cm_loss(const JointSpaceVars& params, ad::Var support_globals,
                ad::Var label_embeddings, const Tensor& targets);
double cm_loss(const JointSpaceParams& params, const Tensor& support_globals,
               const Tensor& label_embeddings, const Tensor& targets);

/// Scores query global features [Q, n] directly against projected label
/// embeddings [C, d_w].
ScoreMatrix zero_shot_predict(const JointSpaceParams& params,
                              const Tensor& query_globals,
                              const Tensor& label_embeddings);

}  // namespace mlfsc
