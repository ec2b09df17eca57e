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

#include "mlfsc/cross_interaction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "mlfsc/error.hpp"
#include "mlfsc/joint_space.hpp"
#include "mlfsc/logging.hpp"

namespace mlfsc {
namespace {

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return uniform_tensor(std::move(shape), -bound, bound, rng);
}

ad::Var bind_one(ad::Tape& tape, const Tensor& t, bool trainable) {
  return trainable ? tape.variable(t) : tape.constant(t);
}

}  // namespace

AttentionParams AttentionParams::init(std::size_t joint_dim, std::size_t heads,
                                      double dropout, Rng& rng) {
  check(heads > 0 && joint_dim % heads == 0, "invalid-config",
        "attention heads (" + std::to_string(heads) +
            ") must divide the joint dimension (" + std::to_string(joint_dim) + ")");
  check(dropout >= 0.0 && dropout < 1.0, "invalid-config",
        "dropout must lie in [0, 1)");
  AttentionParams p;
  const std::size_t head_dim = joint_dim / heads;
  for (std::size_t h = 0; h < heads; ++h)
    p.queries.push_back(fan_in_uniform({head_dim, joint_dim}, joint_dim, rng));
  p.mlp_w1 = fan_in_uniform({joint_dim, joint_dim}, joint_dim, rng);
  p.mlp_b1 = Tensor({joint_dim});
  p.mlp_w2 = fan_in_uniform({joint_dim, joint_dim}, joint_dim, rng);
  p.mlp_b2 = Tensor({joint_dim});
  p.dropout = dropout;
  return p;
}

DynConvParams DynConvParams::init(std::size_t joint_dim, std::size_t inner_dim,
                                  std::size_t top_features, Rng& rng) {
  check(inner_dim >= 1 && top_features >= 1, "invalid-config",
        "dynamic convolution needs d_c >= 1 and n_d >= 1");
  DynConvParams p;
  p.generator1 = fan_in_uniform({inner_dim * joint_dim, joint_dim}, joint_dim, rng);
  p.generator2 = fan_in_uniform({joint_dim * inner_dim, joint_dim}, joint_dim, rng);
  p.norm1_gain = Tensor::filled({inner_dim}, 1.0);
  p.norm1_bias = Tensor({inner_dim});
  p.norm2_gain = Tensor::filled({joint_dim}, 1.0);
  p.norm2_bias = Tensor({joint_dim});
  p.top_features = top_features;
  return p;
}

AttentionVars bind(ad::Tape& tape, const AttentionParams& params, bool trainable) {
  AttentionVars v;
  for (const Tensor& q : params.queries) v.queries.push_back(bind_one(tape, q, trainable));
  v.mlp_w1 = bind_one(tape, params.mlp_w1, trainable);
  v.mlp_b1 = bind_one(tape, params.mlp_b1, trainable);
  v.mlp_w2 = bind_one(tape, params.mlp_w2, trainable);
  v.mlp_b2 = bind_one(tape, params.mlp_b2, trainable);
  v.dropout = params.dropout;
  return v;
}

DynConvVars bind(ad::Tape& tape, const DynConvParams& params, bool trainable) {
  return {bind_one(tape, params.generator1, trainable),
          bind_one(tape, params.generator2, trainable),
          bind_one(tape, params.norm1_gain, trainable),
          bind_one(tape, params.norm1_bias, trainable),
          bind_one(tape, params.norm2_gain, trainable),
          bind_one(tape, params.norm2_bias, trainable),
          params.top_features};
}

AttentionResult attention_prototype(const AttentionVars& params, ad::Var pool,
                                    ad::Var label, DropoutContext dropout) {
  check(pool.shape().size() == 2, "empty-pool",
        "attention needs a [l, d_j] pool of local features");
  const std::size_t heads = params.queries.size();
  const std::vector<ad::Var> splits = ad::split(pool, 1, heads);
  const double inv_sqrt_da =
      1.0 / std::sqrt(static_cast<double>(splits.front().shape()[1]));

  AttentionResult result;
  std::vector<ad::Var> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const ad::Var query = ad::matvec(params.queries[h], label);            // [d_a]
    const ad::Var logits = ad::scale(ad::matvec(splits[h], query), inv_sqrt_da);
    const ad::Var weights = ad::softmax(logits);                           // [l]
    const std::size_t l = weights.size();
    head_outputs.push_back(ad::reshape(
        ad::matmul(ad::reshape(weights, {1, l}), splits[h]), {splits[h].shape()[1]}));
    result.head_weights.push_back(weights.value());
  }
  const ad::Var joined = ad::concat(head_outputs, 0);

  ad::Var hidden = ad::gelu(ad::matvec(params.mlp_w1, joined) + params.mlp_b1);
  if (dropout.train) {
    check(dropout.rng != nullptr, "invalid-argument", "train-mode dropout needs an rng");
    hidden = ad::dropout(hidden, params.dropout, *dropout.rng, true);
  }
  result.prototype = ad::matvec(params.mlp_w2, hidden) + params.mlp_b2;
  return result;
}

std::vector<std::size_t> select_top_nd(const Tensor& pool, const Tensor& label,
                                       std::size_t top_features) {
  check(pool.rank() == 2 && label.rank() == 1 && pool.dim(1) == label.size(),
        "shape-mismatch",
        "pool " + shape_string(pool.shape()) + " for label " +
            shape_string(label.shape()));
  check(top_features >= 1, "invalid-argument", "n_d must be at least 1");
  const std::size_t l = pool.dim(0), d = pool.dim(1);
  double label_norm = 0.0;
  for (std::size_t j = 0; j < d; ++j) label_norm += label[j] * label[j];
  check(label_norm > 0.0, "degenerate-vector", "label embedding has zero norm");
  label_norm = std::sqrt(label_norm);

  std::vector<std::size_t> order;
  std::vector<double> cosines(l, 0.0);
  for (std::size_t i = 0; i < l; ++i) {
    double dot = 0.0, n2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dot += pool[i * d + j] * label[j];
      n2 += pool[i * d + j] * pool[i * d + j];
    }
    if (n2 == 0.0) {
      log_warning("select_top_nd: skipping zero-norm local feature " +
                  std::to_string(i));
      continue;
    }
    cosines[i] = dot / (std::sqrt(n2) * label_norm);
    order.push_back(i);
  }
  check(!order.empty(), "empty-pool", "no local feature with non-zero norm");
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cosines[a] > cosines[b];
  });
  order.resize(std::min(order.size(), top_features));
  return order;
}

ad::Var dynconv_prototype(const DynConvVars& params, ad::Var selected,
                          ad::Var label) {
  check(selected.shape().size() == 2, "empty-pool",
        "dynamic convolution needs a [k, d_j] selection");
  const std::size_t d_j = selected.shape()[1];
  const std::size_t d_c = params.norm1_gain.size();
  const ad::Var theta1 =
      ad::reshape(ad::matvec(params.generator1, label), {d_c, d_j});
  const ad::Var theta2 =
      ad::reshape(ad::matvec(params.generator2, label), {d_j, d_c});
  const ad::Var inner = ad::relu(ad::layer_norm(
      ad::matmul(selected, ad::transpose(theta1)), params.norm1_gain,
      params.norm1_bias));
  const ad::Var outer = ad::relu(ad::layer_norm(
      ad::matmul(inner, ad::transpose(theta2)), params.norm2_gain,
      params.norm2_bias));
  return ad::mean(outer, 0);
}

PrototypeVars build_prototype(const AttentionVars& attention,
                              const DynConvVars& dynconv, ad::Var pool,
                              ad::Var label, DropoutContext dropout) {
  AttentionResult att = attention_prototype(attention, pool, label, dropout);
  const std::vector<std::size_t> top =
      select_top_nd(pool.value(), label.value(), dynconv.top_features);
  const ad::Var dyn = dynconv_prototype(dynconv, ad::gather_rows(pool, top), label);
  return {att.prototype, dyn, att.prototype + dyn, std::move(att.head_weights)};
}

ad::Var simple_attention_prototype(ad::Var globals, ad::Var label, double lambda) {
  check(globals.shape().size() == 2, "empty-pool",
        "simple attention needs [m, d_j] global features");
  const ad::Var label_row = ad::reshape(label, {1, label.size()});
  const ad::Var scores =
      ad::scaled_cosine_scores(label_row, globals, lambda);         // [1, m]
  const ad::Var weights = ad::softmax(scores);
  return ad::reshape(ad::matmul(weights, globals), {label.size()});
}

void write_attention_weights(const std::filesystem::path& path,
                             const std::vector<Tensor>& head_weights) {
  std::ofstream out(path);
  check(out.good(), "io-error", "cannot write " + path.string());
  char buf[32];
  for (std::size_t h = 0; h < head_weights.size(); ++h)
    for (std::size_t i = 0; i < head_weights[h].size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", head_weights[h][i]);
      out << h << ' ' << i << ' ' << buf << '\n';
    }
}

}  // namespace mlfsc
