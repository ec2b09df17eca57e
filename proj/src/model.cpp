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

#include "mlfsc/model.hpp"

#include "mlfsc/error.hpp"
#include "mlfsc/logging.hpp"

namespace mlfsc {

void ModelConfig::validate() const {
  check(channels > 0 && embedding_dim > 0 && joint_dim > 0, "invalid-config",
        "model dimensions must be positive");
  check(heads > 0 && joint_dim % heads == 0, "invalid-config",
        "n_heads (" + std::to_string(heads) + ") must divide d_j (" +
            std::to_string(joint_dim) + ")");
  check(inner_dim >= 1 && top_features >= 1, "invalid-config", "d_c and n_d must be at least 1");
  check(lambda > 0.0, "invalid-config", "lambda must be positive");
  check(dropout >= 0.0 && dropout < 1.0, "invalid-config", "dropout must lie in [0, 1)");
}

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams p;
  p.joint = JointSpaceParams::init(config.channels, config.embedding_dim, config.joint_dim,
                                   config.lambda, rng);
  p.attention = AttentionParams::init(config.joint_dim, config.heads, config.dropout, rng);
  p.dynconv = DynConvParams::init(config.joint_dim, config.inner_dim, config.top_features, rng);
  return p;
}

ModelVars bind(ad::Tape& tape, const ModelParams& params, bool trainable) {
  return {trainable ? bind(tape, params.joint) : bind_frozen(tape, params.joint),
          bind(tape, params.attention, trainable), bind(tape, params.dynconv, trainable)};
}

std::vector<ad::Var> parameter_leaves(const ModelVars& vars) {
  std::vector<ad::Var> leaves = {vars.joint.a_visual, vars.joint.a_text};
  leaves.insert(leaves.end(), vars.attention.queries.begin(), vars.attention.queries.end());
  for (const ad::Var& v : {vars.attention.mlp_w1, vars.attention.mlp_b1, vars.attention.mlp_w2,
                           vars.attention.mlp_b2, vars.dynconv.generator1,
                           vars.dynconv.generator2, vars.dynconv.norm1_gain,
                           vars.dynconv.norm1_bias, vars.dynconv.norm2_gain,
                           vars.dynconv.norm2_bias})
    leaves.push_back(v);
  return leaves;
}

ModelVars vars_from_leaves(const ModelParams& params, std::span<const ad::Var> leaves) {
  const std::size_t heads = params.attention.queries.size();
  check(leaves.size() == 12 + heads, "shape-mismatch",
        "expected " + std::to_string(12 + heads) + " parameter leaves, got " +
            std::to_string(leaves.size()));
  ModelVars v;
  v.joint = {leaves[0], leaves[1], params.joint.lambda};
  const auto at = [&](std::size_t i) { return leaves[2 + heads + i]; };
  v.attention = {{leaves.begin() + 2, leaves.begin() + 2 + heads}, at(0), at(1), at(2), at(3),
                 params.attention.dropout};
  v.dynconv = {at(4), at(5), at(6), at(7), at(8), at(9), params.dynconv.top_features};
  return v;
}

const char* prototype_mode_name(PrototypeMode mode) {
  switch (mode) {
    case PrototypeMode::kCrossInteraction: return "cross-interaction";
    case PrototypeMode::kSimpleAttention: return "simple-attention";
    case PrototypeMode::kZeroShot: return "zero-shot";
  }
  return "?";
}

PrototypeMode parse_prototype_mode(const std::string& name) {
  for (PrototypeMode m : {PrototypeMode::kCrossInteraction, PrototypeMode::kSimpleAttention,
                          PrototypeMode::kZeroShot})
    if (name == prototype_mode_name(m)) return m;
  throw Error("invalid-config", "unknown prototype mode '" + name + "'");
}

EpisodeData make_episode_data(const Episode& episode, const std::vector<LocalFeatureMap>& maps,
                              const Tensor& label_embeddings) {
  check(label_embeddings.rank() == 2 && label_embeddings.dim(0) == episode.labels.size(),
        "shape-mismatch", "label embeddings do not match the episode labels");
  EpisodeData d;
  for (const EpisodeItem& item : episode.support) d.support.push_back(&maps.at(item.record));
  for (const EpisodeItem& item : episode.query) d.query.push_back(&maps.at(item.record));
  d.support_targets = episode.support_targets();
  d.query_targets = episode.query_targets();
  d.label_embeddings = label_embeddings;
  return d;
}

namespace {

// Global features of several maps as rows of one [count, n] matrix.
Tensor stacked_globals(const std::vector<const LocalFeatureMap*>& maps) {
  const std::size_t n = maps.front()->channels();
  std::vector<double> v;
  v.reserve(maps.size() * n);
  for (const LocalFeatureMap* m : maps) {
    const Tensor g = global_pool(*m);
    v.insert(v.end(), g.values().begin(), g.values().end());
  }
  return Tensor({maps.size(), n}, std::move(v));
}

std::vector<std::size_t> kept_cells(const SelectionMask& mask) {
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < mask.keep.size(); ++i)
    if (mask.keep[i]) cells.push_back(i);
  return cells;
}

}  // namespace

ad::Var query_loss(ad::Var query_joint, ad::Var prototypes, const Tensor& targets,
                   double lambda) {
  return ad::bce_with_logits(ad::scaled_cosine_scores(query_joint, prototypes, lambda), targets);
}

ad::Var total_loss(ad::Var cm, ad::Var query, double gamma) {
  check(gamma >= 0.0, "invalid-config", "gamma must be non-negative");
  return cm + ad::scale(query, gamma);
}

EpisodeOutput forward_episode(ad::Tape& tape, const ModelVars& vars, const EpisodeData& data,
                              const ForwardOptions& options) {
  const std::size_t support = data.support.size();
  const std::size_t labels = data.label_embeddings.dim(0);
  check(support > 0 && !data.query.empty(), "empty-episode", "episode has no support or query");
  check(data.support_targets.shape() == Shape{support, labels} &&
            data.query_targets.shape() == Shape{data.query.size(), labels},
        "shape-mismatch", "episode targets do not match the images and labels");
  check(options.masks == nullptr || options.masks->size() == support, "shape-mismatch",
        "need one selection mask per support image");
  const double lambda = vars.joint.lambda;

  EpisodeOutput out;
  const ad::Var embeddings = tape.constant(data.label_embeddings);
  const ad::Var support_globals = tape.constant(stacked_globals(data.support));
  out.cm_loss = cm_loss(vars.joint, support_globals, embeddings, data.support_targets);

  const ad::Var label_joint = ad::project_rows(embeddings, vars.joint.a_text);  // [C, d_j]
  std::vector<ad::Var> prototypes;
  if (options.prototypes == PrototypeMode::kZeroShot) {
    out.prototypes = label_joint;
  } else {
    // Projected local features of each support image, masked if requested.
    std::vector<ad::Var> locals;
    for (std::size_t s = 0; s < support; ++s) {
      ad::Var cells = ad::project_rows(tape.constant(data.support[s]->locations()),
                                       vars.joint.a_visual);
      if (options.masks != nullptr && (*options.masks)[s].kept() != (*options.masks)[s].keep.size()) {
        const std::vector<std::size_t> kept = kept_cells((*options.masks)[s]);
        check(!kept.empty(), "empty-pool", "selection mask keeps no cell");
        cells = ad::gather_rows(cells, kept);
      }
      locals.push_back(cells);
    }
    const ad::Var globals_joint = ad::project_rows(support_globals, vars.joint.a_visual);

    for (std::size_t c = 0; c < labels; ++c) {
      std::vector<ad::Var> pool_parts;
      std::vector<std::size_t> carriers;
      for (std::size_t s = 0; s < support; ++s)
        if (data.support_targets.at(s, c) > 0.5) {
          pool_parts.push_back(locals[s]);
          carriers.push_back(s);
        }
      check(!carriers.empty(), "missing-prototype",
            "label " + std::to_string(c) + " has no support image");
      const ad::Var pool = pool_parts.size() == 1 ? pool_parts[0] : ad::concat(pool_parts, 0);
      const ad::Var label = ad::row(label_joint, c);
      Rng dropout_rng(derive_seed(options.dropout_seed, c));
      const DropoutContext dropout{&dropout_rng, options.train};

      if (options.prototypes == PrototypeMode::kCrossInteraction) {
        PrototypeVars p = build_prototype(vars.attention, vars.dynconv, pool, label, dropout);
        prototypes.push_back(p.prototype);
        out.head_weights.push_back(std::move(p.head_weights));
      } else {
        const ad::Var simple = simple_attention_prototype(
            ad::gather_rows(globals_joint, carriers), label, lambda);
        const std::vector<std::size_t> top =
            select_top_nd(pool.value(), label.value(), vars.dynconv.top_features);
        prototypes.push_back(
            simple + dynconv_prototype(vars.dynconv, ad::gather_rows(pool, top), label));
      }
    }
    std::vector<ad::Var> rows;
    for (const ad::Var& p : prototypes) rows.push_back(ad::reshape(p, {1, p.size()}));
    out.prototypes = rows.size() == 1 ? rows[0] : ad::concat(rows, 0);
  }

  const ad::Var query_joint =
      ad::project_rows(tape.constant(stacked_globals(data.query)), vars.joint.a_visual);
  out.query_logits = ad::scaled_cosine_scores(query_joint, out.prototypes, lambda);
  out.query_loss = ad::bce_with_logits(out.query_logits, data.query_targets);
  return out;
}

std::vector<SelectionMask> lcm_masks(const JointSpaceParams& joint, const EpisodeData& data,
                                     const LcmConfig& config,
                                     std::vector<ImportanceMap>* states) {
  config.validate();
  std::vector<SelectionMask> masks;
  const std::size_t labels = data.label_embeddings.dim(0);
  for (std::size_t s = 0; s < data.support.size(); ++s) {
    std::vector<double> y(labels);
    for (std::size_t c = 0; c < labels; ++c) y[c] = data.support_targets.at(s, c);
    const ImportanceObjective objective(joint, *data.support[s], data.label_embeddings,
                                        Tensor::vector(y));
    ImportanceMap state = fit_importance(objective, config);
    SelectionMask mask = select_features(state, config.theta);
    if (!mask.any()) {
      log_warning("LCM kept no local feature of support image " + std::to_string(s) +
                  "; using all cells");
      mask = SelectionMask::all(mask.height, mask.width, true);
    }
    masks.push_back(std::move(mask));
    if (states != nullptr) states->push_back(std::move(state));
  }
  return masks;
}

}  // namespace mlfsc
