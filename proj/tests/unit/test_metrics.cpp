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

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "doctest.h"
#include "mlfsc/error.hpp"
#include "mlfsc/metrics.hpp"
#include "mlfsc/random.hpp"
#include "test_util.hpp"

using namespace mlfsc;

namespace {

using Vec = std::vector<double>;

// Rank of item i: items with a higher score, or an equal score and a lower
// index, come first.
double oracle_ap(const Vec& s, const Vec& y) {
  double total = 0.0;
  int positives = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1.0) continue;
    ++positives;
    int rank = 1, hits = 1;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j == i) continue;
      const bool ahead = s[j] > s[i] || (s[j] == s[i] && j < i);
      if (ahead) {
        ++rank;
        if (y[j] == 1.0) ++hits;
      }
    }
    total += static_cast<double>(hits) / rank;
  }
  return positives == 0 ? std::numeric_limits<double>::quiet_NaN() : total / positives;
}

Vec column(const Tensor& m, std::size_t c) {
  Vec v(m.dim(0));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = m.at(i, c);
  return v;
}

double f1(double tp, double fp, double fn) {
  return tp == 0.0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
}

struct Batch {
  Tensor p, y;
};

Batch random_batch(Rng& rng) {
  const std::size_t rows = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
  const std::size_t cols = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
  const bool coarse = std::bernoulli_distribution(0.3)(rng);  // many ties
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec p(rows * cols), y(rows * cols);
  bool any = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = coarse ? std::round(u(rng) * 4.0) / 4.0 : u(rng);
    y[i] = u(rng) < 0.35 ? 1.0 : 0.0;
    any = any || y[i] == 1.0;
  }
  if (!any) y[std::uniform_int_distribution<std::size_t>(0, y.size() - 1)(rng)] = 1.0;
  return {Tensor({rows, cols}, p), Tensor({rows, cols}, y)};
}

}  // namespace

TEST_CASE("average precision examples") {
  CHECK(*average_precision(Vec{0.9, 0.8, 0.7}, Vec{1, 0, 1}) ==
        doctest::Approx(0.8333333333333334).epsilon(1e-15));
  CHECK(*average_precision(Vec{0.1, 0.9, 0.8, 0.2}, Vec{0, 1, 1, 0}) == 1.0);
  CHECK(*average_precision(Vec{0.5}, Vec{1}) == 1.0);
  CHECK_FALSE(average_precision(Vec{0.9, 0.1}, Vec{0, 0}).has_value());
  // Ties resolve by original position.
  CHECK(*average_precision(Vec{0.5, 0.5}, Vec{0, 1}) == doctest::Approx(0.5));
  CHECK(*average_precision(Vec{0.5, 0.5}, Vec{1, 0}) == 1.0);
  CHECK_THROWS_AS(average_precision(Vec{0.5, 0.2}, Vec{1}), Error);
}

TEST_CASE("batch validation") {
  const Tensor p = Tensor::matrix(1, 2, {0.5, 0.2});
  CHECK_THROWS_WITH_AS(validate_batch(p, Tensor::matrix(2, 1, {1, 0})),
                       doctest::Contains("invalid-batch"), Error);
  CHECK_THROWS_WITH_AS(validate_batch(Tensor::matrix(1, 2, {1.5, 0.2}), Tensor::matrix(1, 2, {1, 0})),
                       doctest::Contains("invalid-batch"), Error);
  CHECK_THROWS_WITH_AS(validate_batch(p, Tensor::matrix(1, 2, {0.5, 0})),
                       doctest::Contains("invalid-batch"), Error);
  CHECK_NOTHROW(validate_batch(p, Tensor::matrix(1, 2, {1, 0})));
}

TEST_CASE("micro and macro AP reductions") {
  const Tensor one = Tensor::matrix(1, 1, {0.7});
  CHECK(*micro_ap(one, Tensor::matrix(1, 1, {1})) == 1.0);

  const Tensor col = Tensor::matrix(4, 1, {0.2, 0.9, 0.4, 0.6});
  const Tensor truth = Tensor::matrix(4, 1, {1, 0, 1, 0});
  const double ap = *average_precision(column(col, 0), column(truth, 0));
  CHECK(*micro_ap(col, truth) == doctest::Approx(ap).epsilon(1e-15));
  CHECK(*macro_ap(col, truth) == doctest::Approx(ap).epsilon(1e-15));

  // Identical columns: macro equals each column's AP.
  const Tensor twin = Tensor::matrix(4, 2, {0.2, 0.2, 0.9, 0.9, 0.4, 0.4, 0.6, 0.6});
  const Tensor twin_truth = Tensor::matrix(4, 2, {1, 1, 0, 0, 1, 1, 0, 0});
  CHECK(*macro_ap(twin, twin_truth) == doctest::Approx(ap).epsilon(1e-15));

  // A label without positives is skipped, not counted as zero.
  const Tensor skip_truth = Tensor::matrix(4, 2, {1, 0, 0, 0, 1, 0, 0, 0});
  const auto labels = per_label_ap(twin, skip_truth);
  CHECK(labels[0].has_value());
  CHECK_FALSE(labels[1].has_value());
  CHECK(*macro_ap(twin, skip_truth) == doctest::Approx(ap).epsilon(1e-15));
  CHECK_FALSE(macro_ap(twin, Tensor::matrix(4, 2, {0, 0, 0, 0, 0, 0, 0, 0})).has_value());
}

TEST_CASE("F1 uses a strict threshold") {
  const Tensor y = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const F1Scores perfect = f1_scores(Tensor::matrix(2, 2, {0.9, 0.1, 0.2, 0.8}), y);
  CHECK(perfect.micro == 1.0);
  CHECK(perfect.macro == 1.0);
  const F1Scores half = f1_scores(Tensor::filled({2, 2}, 0.5), y);
  CHECK(half.micro == 0.0);
  CHECK(half.macro == 0.0);
  // Label 1 has neither true nor predicted positives: its F1 counts as 0.
  const F1Scores empty = f1_scores(Tensor::matrix(2, 2, {0.9, 0.1, 0.2, 0.1}),
                                   Tensor::matrix(2, 2, {1, 0, 0, 0}));
  CHECK(empty.micro == 1.0);
  CHECK(empty.macro == 0.5);
}

TEST_CASE("metrics agree with definition-level oracles on random batches") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const Batch b = random_batch(rng);
    const std::size_t rows = b.p.dim(0), cols = b.p.dim(1);
    CAPTURE(trial);

    const double micro = oracle_ap(b.p.to_vector(), b.y.to_vector());
    CHECK(std::abs(*micro_ap(b.p, b.y) - micro) <= 1e-9);

    double macro_sum = 0.0;
    int defined = 0;
    const auto labels = per_label_ap(b.p, b.y);
    for (std::size_t c = 0; c < cols; ++c) {
      const double a = oracle_ap(column(b.p, c), column(b.y, c));
      CHECK(labels[c].has_value() == !std::isnan(a));
      if (std::isnan(a)) continue;
      CHECK(std::abs(*labels[c] - a) <= 1e-9);
      macro_sum += a;
      ++defined;
    }
    CHECK(std::abs(*macro_ap(b.p, b.y) - macro_sum / defined) <= 1e-9);

    double tp = 0, fp = 0, fn = 0, macro_f1 = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      double ctp = 0, cfp = 0, cfn = 0;
      for (std::size_t i = 0; i < rows; ++i) {
        const bool pred = b.p.at(i, c) > 0.5, truth = b.y.at(i, c) == 1.0;
        ctp += pred && truth;
        cfp += pred && !truth;
        cfn += !pred && truth;
      }
      tp += ctp;
      fp += cfp;
      fn += cfn;
      macro_f1 += f1(ctp, cfp, cfn);
    }
    const F1Scores f = f1_scores(b.p, b.y);
    CHECK(std::abs(f.micro - f1(tp, fp, fn)) <= 1e-9);
    CHECK(std::abs(f.macro - macro_f1 / cols) <= 1e-9);

    const EpisodeMetrics m = episode_metrics(b.p, b.y);
    for (double v : {m.mi_ap, m.ma_ap, m.mi_f1, m.ma_f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("AP depends only on the ranking") {
  Rng rng(5);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vec logits(10), probs(10), y(10);
    for (std::size_t i = 0; i < 10; ++i) {
      logits[i] = n(rng);
      probs[i] = testing::sigmoid(logits[i]);
      y[i] = i % 3 == 0 ? 1.0 : 0.0;
    }
    CHECK(*average_precision(logits, y) == doctest::Approx(*average_precision(probs, y)));
  }
}

TEST_CASE("episode metrics and aggregation") {
  CHECK_THROWS_WITH_AS(episode_metrics(Tensor::matrix(1, 2, {0.4, 0.6}), Tensor::matrix(1, 2, {0, 0})),
                       doctest::Contains("undefined-ap"), Error);
  const Tensor p = Tensor::matrix(3, 2, {0.9, 0.2, 0.3, 0.8, 0.6, 0.4});
  const Tensor y = Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1});
  const EpisodeMetrics m = episode_metrics(p, y);
  const MetricsReport single = aggregate({m}, {"a", "b"});
  CHECK(single.episodes == 1);
  CHECK(single.mi_ap == m.mi_ap);
  CHECK(single.ma_ap == m.ma_ap);
  CHECK(single.mi_f1 == m.mi_f1);
  CHECK(single.ma_f1 == m.ma_f1);
  CHECK(single.label_ap.at("a") == *m.label_ap[0]);

  EpisodeMetrics other = m;
  other.ma_ap = 0.0;
  other.label_ap[1].reset();
  const MetricsReport two = aggregate({m, other}, {"a", "b"});
  CHECK(two.ma_ap == doctest::Approx(m.ma_ap / 2.0));
  CHECK(two.label_ap.at("b") == *m.label_ap[1]);  // undefined episode skipped
  CHECK_THROWS_AS(aggregate({m}, {"a"}), Error);
}
