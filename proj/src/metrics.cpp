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

#include "mlfsc/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "mlfsc/error.hpp"

namespace mlfsc {

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const double> truths) {
  check(scores.size() == truths.size(), "shape-mismatch",
        "scores and truths differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double hits = 0.0, sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (truths[order[r]] > 0.5) {
      hits += 1.0;
      sum += hits / static_cast<double>(r + 1);
    }
  }
  if (hits == 0.0) return std::nullopt;
  return sum / hits;
}

void validate_batch(const Tensor& probabilities, const Tensor& truths) {
  check(probabilities.rank() == 2 && probabilities.same_shape(truths), "invalid-batch",
        "probabilities " + shape_string(probabilities.shape()) + " vs truths " +
            shape_string(truths.shape()));
  for (double p : probabilities.values())
    check(p >= 0.0 && p <= 1.0, "invalid-batch", "probability outside [0, 1]");
  for (double t : truths.values())
    check(t == 0.0 || t == 1.0, "invalid-batch", "truth values must be 0 or 1");
}

std::optional<double> micro_ap(const Tensor& probabilities, const Tensor& truths) {
  validate_batch(probabilities, truths);
  return average_precision(probabilities.values(), truths.values());
}

std::vector<std::optional<double>> per_label_ap(const Tensor& probabilities,
                                                const Tensor& truths) {
  validate_batch(probabilities, truths);
  const std::size_t rows = probabilities.dim(0), cols = probabilities.dim(1);
  std::vector<std::optional<double>> out;
  std::vector<double> s(rows), t(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) {
      s[r] = probabilities.at(r, c);
      t[r] = truths.at(r, c);
    }
    out.push_back(average_precision(s, t));
  }
  return out;
}

namespace {

std::optional<double> mean_defined(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

double f1(double tp, double fp, double fn) {
  const double denom = 2.0 * tp + fp + fn;
  return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

}  // namespace

std::optional<double> macro_ap(const Tensor& probabilities, const Tensor& truths) {
  return mean_defined(per_label_ap(probabilities, truths));
}

F1Scores f1_scores(const Tensor& probabilities, const Tensor& truths, double threshold) {
  validate_batch(probabilities, truths);
  const std::size_t rows = probabilities.dim(0), cols = probabilities.dim(1);
  double tp = 0, fp = 0, fn = 0, macro = 0;
  for (std::size_t c = 0; c < cols; ++c) {
    double ltp = 0, lfp = 0, lfn = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      const bool predicted = probabilities.at(r, c) > threshold;
      const bool actual = truths.at(r, c) > 0.5;
      ltp += predicted && actual;
      lfp += predicted && !actual;
      lfn += !predicted && actual;
    }
    macro += f1(ltp, lfp, lfn);
    tp += ltp;
    fp += lfp;
    fn += lfn;
  }
  return {f1(tp, fp, fn), macro / static_cast<double>(cols)};
}

EpisodeMetrics episode_metrics(const Tensor& probabilities, const Tensor& truths) {
  EpisodeMetrics m;
  const auto micro = micro_ap(probabilities, truths);
  check(micro.has_value(), "undefined-ap", "batch has no positive label");
  m.mi_ap = *micro;
  m.label_ap = per_label_ap(probabilities, truths);
  m.ma_ap = *mean_defined(m.label_ap);
  const F1Scores f = f1_scores(probabilities, truths);
  m.mi_f1 = f.micro;
  m.ma_f1 = f.macro;
  return m;
}

MetricsReport aggregate(const std::vector<EpisodeMetrics>& episodes,
                        const std::vector<std::string>& labels) {
  check(!episodes.empty(), "invalid-argument", "no episodes to aggregate");
  MetricsReport r;
  r.episodes = episodes.size();
  std::vector<double> label_sum(labels.size(), 0.0);
  std::vector<std::size_t> label_n(labels.size(), 0);
  for (const EpisodeMetrics& e : episodes) {
    check(e.label_ap.size() == labels.size(), "shape-mismatch",
          "episode metrics do not match the label list");
    r.mi_ap += e.mi_ap;
    r.ma_ap += e.ma_ap;
    r.mi_f1 += e.mi_f1;
    r.ma_f1 += e.ma_f1;
    for (std::size_t c = 0; c < labels.size(); ++c)
      if (e.label_ap[c]) {
        label_sum[c] += *e.label_ap[c];
        ++label_n[c];
      }
  }
  const double n = static_cast<double>(episodes.size());
  r.mi_ap /= n;
  r.ma_ap /= n;
  r.mi_f1 /= n;
  r.ma_f1 /= n;
  for (std::size_t c = 0; c < labels.size(); ++c)
    if (label_n[c] > 0) r.label_ap[labels[c]] = label_sum[c] / static_cast<double>(label_n[c]);
  return r;
}

}  // namespace mlfsc
