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

#include "mlfsc/lcm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "mlfsc/error.hpp"
#include "mlfsc/optim.hpp"

namespace mlfsc {

void LcmConfig::validate() const {
  check(theta >= 0.5 && theta < 1.0, "invalid-theta",
        "theta must lie in [0.5, 1), got " + std::to_string(theta));
  check(alpha_cap >= 0.0 && alpha_cap < 1.0, "invalid-config",
        "alpha cap must lie in [0, 1)");
  check(learning_rate > 0.0, "invalid-config", "lcm learning rate must be positive");
}

ImportanceMap ImportanceMap::initial(std::size_t height, std::size_t width) {
  return {Tensor::filled({height, width}, 1.0), Tensor({height, width}), 0};
}

SelectionMask SelectionMask::all(std::size_t height, std::size_t width,
                                 bool value) {
  return {height, width, std::vector<bool>(height * width, value)};
}

std::size_t SelectionMask::kept() const {
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
}

Tensor normalize_rho(const Tensor& rho) {
  check(rho.all_finite(), "non-finite", "importance grid has non-finite values");
  const auto [lo, hi] = std::minmax_element(rho.values().begin(), rho.values().end());
  const double min = *lo, max = *hi;
  if (max == min) return Tensor::filled(rho.shape(), 1.0);

  std::vector<double> out(rho.size());
  double smallest_nonzero = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rho.size(); ++i) {
    out[i] = (rho[i] - min) / (max - min);
    if (out[i] > 0.0) smallest_nonzero = std::min(smallest_nonzero, out[i]);
  }
  for (double& v : out) {
    if (v == 0.0) v = smallest_nonzero;
  }
  return Tensor(rho.shape(), std::move(out));
}

ImportanceObjective::ImportanceObjective(const JointSpaceParams& params,
                                         const LocalFeatureMap& map,
                                         const Tensor& label_embeddings,
                                         const Tensor& targets, ModelStatus status)
    : height_(map.height()),
      width_(map.width()),
      lambda_(params.lambda),
      status_(status) {
  check(label_embeddings.rank() == 2 && targets.size() == label_embeddings.dim(0),
        "shape-mismatch",
        "targets " + shape_string(targets.shape()) + " for label embeddings " +
            shape_string(label_embeddings.shape()));
  ad::Tape tape;
  const JointSpaceVars vars = bind_frozen(tape, params);
  projected_locations_ =
      ad::project_rows(tape.constant(map.locations()), vars.a_visual).value();
  projected_labels_ =
      ad::project_rows(tape.constant(label_embeddings), vars.a_text).value();
  targets_ = targets.reshaped({1, targets.size()});
}

ad::Var ImportanceObjective::loss(ad::Tape& tape, ad::Var rho) const {
  // Pooling commutes with the linear projection, so the projected cells are
  // cached once and weighted here.
  const ad::Var pooled =
      ad::weighted_pool_locations(tape.constant(projected_locations_), rho);
  const ad::Var image = ad::reshape(pooled, {1, pooled.size()});
  return ad::bce_with_logits(
      ad::scaled_cosine_scores(image, tape.constant(projected_labels_), lambda_),
      targets_);
}

double ImportanceObjective::loss(const Tensor& rho) const {
  ad::Tape tape;
  return loss(tape, tape.constant(rho)).value().item();
}

RhoLoss ImportanceObjective::as_function() const {
  return [this](ad::Tape& tape, ad::Var rho) { return loss(tape, rho); };
}

namespace {

struct LossAndGradient {
  double loss;
  Tensor gradient;
};

LossAndGradient loss_and_gradient(const RhoLoss& loss, const Tensor& rho) {
  ad::Tape tape;
  const ad::Var r = tape.variable(rho);
  const ad::Var out = loss(tape, r);
  return {out.value().item(), tape.backward(out)[r]};
}

double evaluate(const RhoLoss& loss, const Tensor& rho) {
  ad::Tape tape;
  return loss(tape, tape.constant(rho)).value().item();
}

Tensor taylor_change(const Tensor& rho, const Tensor& gradient) {
  std::vector<double> g(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) g[i] = std::abs(rho[i] * gradient[i]);
  return Tensor(rho.shape(), std::move(g));
}

}  // namespace

double loss_change_exact(const RhoLoss& loss, const Tensor& rho, std::size_t row,
                         std::size_t col) {
  check(rho.rank() == 2 && row < rho.dim(0) && col < rho.dim(1),
        "index-out-of-range",
        "cell (" + std::to_string(row) + ", " + std::to_string(col) +
            ") outside grid " + shape_string(rho.shape()));
  std::vector<double> zeroed = rho.to_vector();
  zeroed[row * rho.dim(1) + col] = 0.0;
  return std::abs(evaluate(loss, rho) -
                  evaluate(loss, Tensor(rho.shape(), std::move(zeroed))));
}

Tensor loss_change_taylor(const RhoLoss& loss, const Tensor& rho) {
  return taylor_change(rho, loss_and_gradient(loss, rho).gradient);
}

ImportanceMap momentum_update(const ImportanceMap& state, const Tensor& change,
                              std::size_t iteration, double alpha_cap) {
  check(iteration >= 1, "invalid-argument", "momentum iterations start at 1");
  check(change.same_shape(state.momentum), "shape-mismatch",
        "loss-change grid " + shape_string(change.shape()) + " for momentum " +
            shape_string(state.momentum.shape()));
  const double alpha =
      std::min(1.0 - 1.0 / static_cast<double>(iteration + 1), alpha_cap);
  std::vector<double> f(change.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    f[i] = alpha * state.momentum[i] + (1.0 - alpha) * change[i];
  return {state.rho, Tensor(change.shape(), std::move(f)), iteration};
}

ImportanceMap fit_importance(const RhoLoss& loss, std::size_t height,
                             std::size_t width, const LcmConfig& config) {
  config.validate();
  ImportanceMap state = ImportanceMap::initial(height, width);
  AdamMoments moments;
  for (std::size_t i = 1; i <= config.epochs; ++i) {
    const LossAndGradient lg = loss_and_gradient(loss, state.rho);
    check(std::isfinite(lg.loss) && lg.gradient.all_finite(), "numeric-failure",
          "non-finite loss while fitting importance weights");
    state = momentum_update(state, taylor_change(state.rho, lg.gradient), i,
                            config.alpha_cap);

    const Tensor stepped =
        adam_step(state.rho, lg.gradient, moments, config.learning_rate, i);
    std::vector<double> clamped(stepped.size());
    for (std::size_t c = 0; c < clamped.size(); ++c)
      clamped[c] = std::clamp(stepped[c], 0.0, 1.0);
    state.rho = normalize_rho(Tensor(stepped.shape(), std::move(clamped)));
  }
  return state;
}

ImportanceMap fit_importance(const ImportanceObjective& objective,
                             const LcmConfig& config) {
  check(objective.status() == ModelStatus::kTrained, "untrained-model",
        "importance fitting needs a trained joint space");
  return fit_importance(objective.as_function(), objective.height(),
                        objective.width(), config);
}

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

SelectionMask select_features(const ImportanceMap& state, double theta) {
  check(theta >= 0.5, "invalid-theta",
        "theta below 0.5 cannot change the selection (sigmoid of f >= 0 is >= 0.5)");
  check(theta < 1.0, "invalid-theta", "theta >= 1 selects nothing");
  const Tensor& f = state.momentum;
  SelectionMask mask = SelectionMask::all(f.dim(0), f.dim(1), false);
  for (std::size_t i = 0; i < f.size(); ++i) mask.keep[i] = sigmoid(f[i]) >= theta;
  return mask;
}

Tensor importance_scores(const ImportanceMap& state) {
  std::vector<double> s(state.momentum.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = sigmoid(state.momentum[i]);
  return Tensor(state.momentum.shape(), std::move(s));
}

void write_importance_text(const std::filesystem::path& path,
                           const ImportanceMap& state) {
  const Tensor scores = importance_scores(state);
  std::ofstream out(path);
  check(out.good(), "io-error", "cannot write " + path.string());
  char buf[32];
  for (std::size_t r = 0; r < scores.dim(0); ++r) {
    for (std::size_t c = 0; c < scores.dim(1); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", scores.at(r, c));
      out << (c ? " " : "") << buf;
    }
    out << '\n';
  }
}

void write_mask_text(const std::filesystem::path& path, const SelectionMask& mask) {
  std::ofstream out(path);
  check(out.good(), "io-error", "cannot write " + path.string());
  for (std::size_t r = 0; r < mask.height; ++r) {
    for (std::size_t c = 0; c < mask.width; ++c)
      out << (c ? " " : "") << (mask.keep[r * mask.width + c] ? 1 : 0);
    out << '\n';
  }
}

}  // namespace mlfsc
