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

// Multi-label ranking and threshold metrics over a batch of query images:
// non-interpolated average precision (micro over all image/label pairs,
// macro over labels) and F1 at a strict probability threshold.
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlfsc/tensor.hpp"

namespace mlfsc {

/// Mean over positive ranks of precision at that rank, after a stable sort by
/// descending score. Empty when there is no positive ("undefined-ap").
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const double> truths);

/// probabilities and truths are [images, labels]; Error("invalid-batch") if
/// shapes differ, probabilities leave [0, 1] or truths are not 0/1.
void validate_batch(const Tensor& probabilities, const Tensor& truths);

std::optional<double> micro_ap(const Tensor& probabilities, const Tensor& truths);
std::vector<std::optional<double>> per_label_ap(const Tensor& probabilities,
                                                const Tensor& truths);
/// Mean AP over labels with at least one positive.
std::optional<double> macro_ap(const Tensor& probabilities, const Tensor& truths);

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
};
/// Positive means probability > threshold. Per-label F1 with no true and no
/// predicted positives counts as 0.
F1Scores f1_scores(const Tensor& probabilities, const Tensor& truths, double threshold = 0.5);

struct EpisodeMetrics {
  double mi_ap = 0.0;
  double ma_ap = 0.0;
  double mi_f1 = 0.0;
  double ma_f1 = 0.0;
  std::vector<std::optional<double>> label_ap;
};
/// Error("undefined-ap") when the batch has no positive at all.
EpisodeMetrics episode_metrics(const Tensor& probabilities, const Tensor& truths);

struct MetricsReport {
  double mi_ap = 0.0;
  double ma_ap = 0.0;
  double mi_f1 = 0.0;
  double ma_f1 = 0.0;
  std::map<std::string, double> label_ap;  // mean over episodes where defined
  std::size_t episodes = 0;
};

/// Unweighted means over episodes. labels names the columns of every
/// episode (all episodes share one label set).
MetricsReport aggregate(const std::vector<EpisodeMetrics>& episodes,
                        const std::vector<std::string>& labels);

}  // namespace mlfsc
