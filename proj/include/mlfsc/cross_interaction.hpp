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

// Label prototypes from support local features: channel-split cross
// attention queried by the projected label embedding, plus a dynamic 1x1
// convolution whose kernels are generated from that embedding.

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "mlfsc/autodiff.hpp"
#include "mlfsc/random.hpp"
#include "mlfsc/tensor.hpp"

namespace mlfsc {

struct AttentionParams {
  std::vector<Tensor> queries;  // per head [d_a, d_j]
  Tensor mlp_w1;                // [d_j, d_j]
  Tensor mlp_b1;                // [d_j]
  Tensor mlp_w2;                // [d_j, d_j]
  Tensor mlp_b2;                // [d_j]
  double dropout = 0.1;

  /// Error("invalid-config") unless heads divides joint_dim.
  static AttentionParams init(std::size_t joint_dim, std::size_t heads,
                              double dropout, Rng& rng);

  std::size_t heads() const { return queries.size(); }
  std::size_t head_dim() const { return queries.front().dim(0); }
  std::size_t joint_dim() const { return mlp_w1.dim(0); }

  template <typename F>
  void visit(F&& f) {
    for (std::size_t h = 0; h < queries.size(); ++h)
      f("attention.query." + std::to_string(h), queries[h]);
    f("attention.mlp.w1", mlp_w1);
    f("attention.mlp.b1", mlp_b1);
    f("attention.mlp.w2", mlp_w2);
    f("attention.mlp.b2", mlp_b2);
  }
};

struct DynConvParams {
  Tensor generator1;   // [d_c * d_j, d_j], produces Theta1 [d_c, d_j]
  Tensor generator2;   // [d_j * d_c, d_j], produces Theta2 [d_j, d_c]
  Tensor norm1_gain;   // [d_c]
  Tensor norm1_bias;   // [d_c]
  Tensor norm2_gain;   // [d_j]
  Tensor norm2_bias;   // [d_j]
  std::size_t top_features = 16;

  static DynConvParams init(std::size_t joint_dim, std::size_t inner_dim,
                            std::size_t top_features, Rng& rng);

  std::size_t inner_dim() const { return norm1_gain.size(); }
  std::size_t joint_dim() const { return norm2_gain.size(); }

  template <typename F>
  void visit(F&& f) {
    f("dynconv.generator1", generator1);
    f("dynconv.generator2", generator2);
    f("dynconv.norm1.gain", norm1_gain);
    f("dynconv.norm1.bias", norm1_bias);
    f("dynconv.norm2.gain", norm2_gain);
    f("dynconv.norm2.bias", norm2_bias);
  }
};

struct AttentionVars {
  std::vector<ad::Var> queries;
  ad::Var mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  double dropout = 0.1;
};

struct DynConvVars {
  ad::Var generator1, generator2;
  ad::Var norm1_gain, norm1_bias, norm2_gain, norm2_bias;
  std::size_t top_features = 16;
};

AttentionVars bind(ad::Tape& tape, const AttentionParams& params, bool trainable);
DynConvVars bind(ad::Tape& tape, const DynConvParams& params, bool trainable);

/// Dropout inside the attention MLP; inactive unless train is set.
struct DropoutContext {
  Rng* rng = nullptr;
  bool train = false;
};

struct AttentionResult {
  ad::Var prototype;                  // [d_j]
  std::vector<Tensor> head_weights;   // per head [l], sums to 1
};

/// pool: [l, d_j] projected local features carrying the label;
/// label: [d_j] projected label embedding.
AttentionResult attention_prototype(const AttentionVars& params, ad::Var pool,
                                    ad::Var label, DropoutContext dropout = {});

/// Row indices of pool sorted by descending cosine to label, ties by row
/// index, truncated to top_features. Zero-norm rows are skipped with a
/// warning; Error("empty-pool") if nothing remains.
std::vector<std::size_t> select_top_nd(const Tensor& pool, const Tensor& label,
                                       std::size_t top_features);

/// mean_i ReLU(Norm(Theta2 ReLU(Norm(Theta1 u_i)))) over the selected rows,
/// with Theta1/Theta2 generated from the label embedding.
ad::Var dynconv_prototype(const DynConvVars& params, ad::Var selected,
                          ad::Var label);

struct PrototypeVars {
  ad::Var attention;
  ad::Var dynamic;
  ad::Var prototype;  // attention + dynamic
  std::vector<Tensor> head_weights;
};

PrototypeVars build_prototype(const AttentionVars& attention,
                              const DynConvVars& dynconv, ad::Var pool,
                              ad::Var label, DropoutContext dropout = {});

/// sum_I softmax_I(lambda * cos(label, g_I)) * g_I over projected global
/// features [m, d_j] of the support images carrying the label.
ad::Var simple_attention_prototype(ad::Var globals, ad::Var label, double lambda);

struct Prototype {
  std::string label;
  Tensor vector;
  Tensor attention;
  Tensor dynamic;
};

/// Writes "head cell weight" rows for later heatmap rendering.
void write_attention_weights(const std::filesystem::path& path,
                             const std::vector<Tensor>& head_weights);

}  // namespace mlfsc
