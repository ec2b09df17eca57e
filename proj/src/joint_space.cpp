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

#include "mlfsc/joint_space.hpp"

#include <cmath>

#include "mlfsc/error.hpp"

namespace mlfsc {

JointSpaceParams JointSpaceParams::init(std::size_t channels,
                                        std::size_t embedding_dim,
                                        std::size_t joint_dim, double lambda,
                                        Rng& rng) {
  check(lambda > 0.0, "invalid-config", "lambda must be positive");
  const double bv = 1.0 / std::sqrt(static_cast<double>(channels));
  const double bt = 1.0 / std::sqrt(static_cast<double>(embedding_dim));
  JointSpaceParams p;
  p.a_visual = uniform_tensor({joint_dim, channels}, -bv, bv, rng);
  p.a_text = uniform_tensor({joint_dim, embedding_dim}, -bt, bt, rng);
  p.lambda = lambda;
  return p;
}

namespace {

Tensor apply(const Tensor& m, const Tensor& v, const char* what) {
  check(v.rank() == 1 && v.size() == m.dim(1), "shape-mismatch",
        std::string(what) + ": vector " + shape_string(v.shape()) +
            " for matrix " + shape_string(m.shape()));
  ad::Tape tape;
  return ad::matvec(tape.constant(m), tape.constant(v)).value();
}

}  // namespace

Tensor project_visual(const JointSpaceParams& params, const Tensor& v) {
  return apply(params.a_visual, v, "project_visual");
}

Tensor project_label(const JointSpaceParams& params, const Tensor& w) {
  return apply(params.a_text, w, "project_label");
}

double score(const JointSpaceParams& params, const Tensor& v_joint,
             const Tensor& w_joint) {
  ad::Tape tape;
  return params.lambda *
         ad::cosine(tape.constant(v_joint), tape.constant(w_joint)).value().item();
}

JointSpaceVars bind(ad::Tape& tape, const JointSpaceParams& params) {
  return {tape.variable(params.a_visual), tape.variable(params.a_text),
          params.lambda};
}

JointSpaceVars bind_frozen(ad::Tape& tape, const JointSpaceParams& params) {
  return {tape.constant(params.a_visual), tape.constant(params.a_text),
          params.lambda};
}

namespace ad {

Var project_rows(Var rows, Var matrix) { return matmul(rows, transpose(matrix)); }

Var scaled_cosine_scores(Var a, Var b, double lambda) {
  return scale(matmul(normalize_rows(a), transpose(normalize_rows(b))), lambda);
}

}  // namespace ad

ad::Var cm_loss(const JointSpaceVars& params, ad::Var support_globals,
                ad::Var label_embeddings, const Tensor& targets) {
  const ad::Var images = ad::project_rows(support_globals, params.a_visual);
  const ad::Var labels = ad::project_rows(label_embeddings, params.a_text);
  return ad::bce_with_logits(
      ad::scaled_cosine_scores(images, labels, params.lambda), targets);
}

double cm_loss(const JointSpaceParams& params, const Tensor& support_globals,
               const Tensor& label_embeddings, const Tensor& targets) {
  check(support_globals.rank() == 2, "empty-support",
        "support features must be a non-empty [S, n] matrix");
  ad::Tape tape;
  return cm_loss(bind_frozen(tape, params), tape.constant(support_globals),
                 tape.constant(label_embeddings), targets)
      .value()
      .item();
}

ScoreMatrix zero_shot_predict(const JointSpaceParams& params,
                              const Tensor& query_globals,
                              const Tensor& label_embeddings) {
  ad::Tape tape;
  const JointSpaceVars vars = bind_frozen(tape, params);
  const ad::Var logits = ad::scaled_cosine_scores(
      ad::project_rows(tape.constant(query_globals), vars.a_visual),
      ad::project_rows(tape.constant(label_embeddings), vars.a_text),
      params.lambda);
  return {logits.value(), ad::sigmoid(logits).value()};
}

}  // namespace mlfsc
