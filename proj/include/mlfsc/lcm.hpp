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

// Loss-change measurement: learns an importance grid rho over the local
// features of one support image (everything else frozen), tracks a momentum
// estimate of how much the cross-modality loss changes when each cell is
// zeroed, and thresholds it into a keep/drop mask.

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <vector>

#include "mlfsc/autodiff.hpp"
#include "mlfsc/features.hpp"
#include "mlfsc/joint_space.hpp"
#include "mlfsc/tensor.hpp"

namespace mlfsc {

struct LcmConfig {
  double theta = 0.65;
  double alpha_cap = 0.95;
  std::size_t epochs = 20;
  double learning_rate = 0.01;

  void validate() const;
};

/// rho and momentum are [h, w]; iteration counts completed updates.
struct ImportanceMap {
  Tensor rho;
  Tensor momentum;
  std::size_t iteration = 0;

  static ImportanceMap initial(std::size_t height, std::size_t width);
};

/// Keep/drop decision per grid cell, row-major.
struct SelectionMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<bool> keep;

  static SelectionMask all(std::size_t height, std::size_t width, bool value);
  std::size_t kept() const;
  bool any() const { return kept() > 0; }
  bool operator==(const SelectionMask&) const = default;
};

/// Min-max normalization to [0, 1]. Exact zeros are then replaced by the
/// smallest non-zero entry; a constant grid becomes all ones.
Tensor normalize_rho(const Tensor& rho);

/// Loss as a differentiable function of the importance grid.
using RhoLoss = std::function<ad::Var(ad::Tape&, ad::Var rho)>;

enum class ModelStatus { kUntrained, kTrained };

/// Cross-modality loss of one support image with weighted pooling, the
/// joint-space maps frozen.
class ImportanceObjective {
 public:
  /// label_embeddings [C, d_w]; targets has C entries in {0, 1}.
  ImportanceObjective(const JointSpaceParams& params, const LocalFeatureMap& map,
                      const Tensor& label_embeddings, const Tensor& targets,
                      ModelStatus status = ModelStatus::kTrained);

  ad::Var loss(ad::Tape& tape, ad::Var rho) const;
  double loss(const Tensor& rho) const;
  RhoLoss as_function() const;

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  ModelStatus status() const noexcept { return status_; }

 private:
  std::size_t height_;
  std::size_t width_;
  Tensor projected_locations_;  // [h*w, d_j]
  Tensor projected_labels_;     // [C, d_j]
  Tensor targets_;              // [1, C]
  double lambda_;
  ModelStatus status_;
};

/// |L(rho) - L(rho with cell (row, col) set to 0)|.
double loss_change_exact(const RhoLoss& loss, const Tensor& rho, std::size_t row,
                         std::size_t col);

/// First-order estimate |rho * dL/drho| for every cell from one backward pass.
Tensor loss_change_taylor(const RhoLoss& loss, const Tensor& rho);

/// f_i = a_i f_{i-1} + (1 - a_i) g_i with a_i = min(1 - 1/(i+1), alpha_cap).
/// iteration is i >= 1.
ImportanceMap momentum_update(const ImportanceMap& state, const Tensor& change,
                              std::size_t iteration, double alpha_cap);

/// Runs the inner loop for config.epochs iterations starting from rho = 1,
/// f = 0. Each iteration measures the loss change at the current rho, folds
/// it into the momentum, then takes an Adam step on rho, clamps to [0, 1]
/// and renormalizes. Error("untrained-model") for an untrained objective.
ImportanceMap fit_importance(const ImportanceObjective& objective,
                             const LcmConfig& config);
ImportanceMap fit_importance(const RhoLoss& loss, std::size_t height,
                             std::size_t width, const LcmConfig& config);

/// keep = sigmoid(f) >= theta; theta must lie in [0.5, 1).
SelectionMask select_features(const ImportanceMap& state, double theta);

/// sigmoid(f) as an [h, w] grid.
Tensor importance_scores(const ImportanceMap& state);

/// Rows of space-separated values (scores) or 0/1 flags (mask).
void write_importance_text(const std::filesystem::path& path,
                           const ImportanceMap& state);
void write_mask_text(const std::filesystem::path& path, const SelectionMask& mask);

}  // namespace mlfsc
