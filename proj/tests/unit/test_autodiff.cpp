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
#include <functional>
#include <numeric>

#include "doctest.h"
#include "mlfsc/autodiff.hpp"
#include "mlfsc/error.hpp"
#include "mlfsc/gradcheck.hpp"
#include "test_util.hpp"

using namespace mlfsc;
using mlfsc::testing::random_tensor;

TEST_CASE("forward examples") {
  ad::Tape t;
  const Tensor s = ad::softmax(t.constant(Tensor::vector({0, 0}))).value();
  CHECK(s[0] == doctest::Approx(0.5));
  CHECK(s[1] == doctest::Approx(0.5));
  CHECK(ad::sigmoid(t.constant(Tensor::scalar(0))).value().item() == 0.5);

  const ad::Var v = t.constant(Tensor::vector({0.3, -2.0, 4.5}));
  CHECK(ad::cosine(v, v).value().item() == doctest::Approx(1.0).epsilon(1e-15));

  const ad::Var ln = ad::layer_norm(t.constant(Tensor::vector({1, 2, 3})),
                                    t.constant(Tensor::filled({3}, 1.0)),
                                    t.constant(Tensor({3})));
  const auto y = ln.value().values();
  const double mu = (y[0] + y[1] + y[2]) / 3.0;
  const double var = ((y[0] - mu) * (y[0] - mu) + (y[1] - mu) * (y[1] - mu) +
                      (y[2] - mu) * (y[2] - mu)) / 3.0;
  CHECK(std::abs(mu) < 1e-12);
  // eps = 1e-5 shrinks the variance by var / (var + eps).
  CHECK(var == doctest::Approx((2.0 / 3.0) / (2.0 / 3.0 + 1e-5)).epsilon(1e-12));
}

TEST_CASE("backward examples") {
  {
    ad::Tape t;
    const ad::Var x = t.variable(Tensor::scalar(3));
    const auto g = t.backward(x * x);
    CHECK(g[x].item() == doctest::Approx(6.0));
  }
  {
    ad::Tape t;
    const ad::Var x = t.variable(Tensor({5}));
    const Tensor g = t.backward(ad::sum(ad::sigmoid(x)))[x];
    for (double v : g.values()) CHECK(v == doctest::Approx(0.25));
  }
}

TEST_CASE("backward rejects non-scalar outputs") {
  ad::Tape t;
  const ad::Var x = t.variable(Tensor({3}));
  CHECK_THROWS_WITH_AS(t.backward(x), doctest::Contains("not-scalar"), Error);
}

// Plain-double evaluation of sum(sigmoid(A x) * (A x)) + log(1 + |x|^2),
// shared by the composite-graph check below. Independent of the tape.
double composite_reference(const std::vector<double>& a, const std::vector<double>& x) {
  double total = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < 4; ++j) z += a[i * 4 + j] * x[j];
    total += z / (1.0 + std::exp(-z));
  }
  for (double v : x) sq += v * v;
  return total + std::log(1.0 + sq);
}

TEST_CASE("random composite graph matches independent finite differences") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor x = random_tensor({4}, rng);
    ad::Tape t;
    const ad::Var av = t.constant(a);
    const ad::Var xv = t.variable(x);
    const ad::Var z = ad::matvec(av, xv);
    const ad::Var out = ad::sum(ad::sigmoid(z) * z) +
                        ad::log(t.constant(Tensor::scalar(1.0)) + ad::sum(xv * xv));
    CHECK(out.value().item() ==
          doctest::Approx(composite_reference(a.to_vector(), x.to_vector())).epsilon(1e-13));
    const Tensor g = t.backward(out)[xv];
    for (std::size_t i = 0; i < 4; ++i) {
      std::vector<double> up = x.to_vector(), down = x.to_vector();
      up[i] += 1e-6;
      down[i] -= 1e-6;
      const double fd = (composite_reference(a.to_vector(), up) -
                         composite_reference(a.to_vector(), down)) / 2e-6;
      CHECK(std::abs(g[i] - fd) / std::max(1.0, std::abs(g[i])) < 1e-8);
    }
  }
}

TEST_CASE("grad_check of sum is exact") {
  Rng rng(1);
  const double err =
      ad::grad_check([](ad::Tape&, ad::Var x) { return ad::sum(x); },
                     random_tensor({7}, rng));
  CHECK(err <= 1e-9);
}

TEST_CASE("grad_check argument errors") {
  const auto identity = [](ad::Tape&, ad::Var x) { return x; };
  CHECK_THROWS_WITH_AS(ad::grad_check(identity, Tensor({3})),
                       doctest::Contains("not-scalar"), Error);
  const auto f = [](ad::Tape&, ad::Var x) { return ad::sum(x); };
  CHECK_THROWS_AS(ad::grad_check(f, Tensor({2}), 0.0), Error);
  CHECK_THROWS_AS(ad::grad_check(f, Tensor({2}), 1e-2), Error);
}

namespace {

struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)> fn;
  double lo = -1.0;
  double hi = 1.0;
};

// Reduces any op output to a scalar with fixed random weights so every output
// component participates in the check.
ad::Var weighted_sum(ad::Var out) {
  Rng rng(out.size() * 31 + 5);
  ad::Tape& t = out.tape();
  return ad::sum(out * t.constant(random_tensor(out.shape(), rng)));
}

std::vector<OpCase> op_cases() {
  using V = std::span<const ad::Var>;
  return {
      {"add", {{2, 3}, {2, 3}}, [](ad::Tape&, V v) { return weighted_sum(v[0] + v[1]); }},
      {"add-scalar", {{2, 3}, {}}, [](ad::Tape&, V v) { return weighted_sum(v[0] + v[1]); }},
      {"sub", {{4}, {4}}, [](ad::Tape&, V v) { return weighted_sum(v[0] - v[1]); }},
      {"mul", {{2, 3}, {2, 3}}, [](ad::Tape&, V v) { return weighted_sum(v[0] * v[1]); }},
      {"mul-scalar", {{}, {5}}, [](ad::Tape&, V v) { return weighted_sum(v[0] * v[1]); }},
      {"scale", {{3}}, [](ad::Tape&, V v) { return weighted_sum(ad::scale(v[0], -2.5)); }},
      {"matmul", {{2, 3}, {3, 4}}, [](ad::Tape&, V v) { return weighted_sum(ad::matmul(v[0], v[1])); }},
      {"matvec", {{3, 4}, {4}}, [](ad::Tape&, V v) { return weighted_sum(ad::matvec(v[0], v[1])); }},
      {"transpose", {{2, 3}}, [](ad::Tape&, V v) { return weighted_sum(ad::transpose(v[0])); }},
      {"reshape", {{2, 3}}, [](ad::Tape&, V v) { return weighted_sum(ad::reshape(v[0], {3, 2})); }},
      {"mean", {{2, 3}}, [](ad::Tape&, V v) { return ad::mean(v[0] * v[0]); }},
      {"mean-axis0", {{3, 4}}, [](ad::Tape&, V v) { return weighted_sum(ad::mean(v[0], 0)); }},
      {"mean-axis1", {{3, 4}}, [](ad::Tape&, V v) { return weighted_sum(ad::mean(v[0], 1)); }},
      {"concat", {{2, 3}, {2, 2}}, [](ad::Tape&, V v) {
         const ad::Var parts[] = {v[0], v[1]};
         return weighted_sum(ad::concat(parts, 1)); }},
      {"slice", {{3, 4}}, [](ad::Tape&, V v) { return weighted_sum(ad::slice(v[0], 1, 1, 3)); }},
      {"gather-rows", {{4, 3}}, [](ad::Tape&, V v) {
         const std::size_t rows[] = {2, 0, 2};
         return weighted_sum(ad::gather_rows(v[0], rows)); }},
      {"softmax", {{2, 5}}, [](ad::Tape&, V v) { return weighted_sum(ad::softmax(v[0])); }},
      {"sigmoid", {{6}}, [](ad::Tape&, V v) { return weighted_sum(ad::sigmoid(v[0])); }},
      {"log", {{6}}, [](ad::Tape&, V v) { return weighted_sum(ad::log(v[0])); }, 0.2, 2.0},
      {"relu", {{6}}, [](ad::Tape&, V v) { return weighted_sum(ad::relu(v[0])); }},
      {"gelu", {{6}}, [](ad::Tape&, V v) { return weighted_sum(ad::gelu(v[0])); }, -3.0, 3.0},
      {"layer-norm", {{3, 5}, {5}, {5}}, [](ad::Tape&, V v) {
         return weighted_sum(ad::layer_norm(v[0], v[1], v[2])); }},
      {"cosine", {{5}, {5}}, [](ad::Tape&, V v) { return ad::cosine(v[0], v[1]); }},
      {"normalize-rows", {{3, 4}}, [](ad::Tape&, V v) { return weighted_sum(ad::normalize_rows(v[0])); }},
      {"dropout-eval", {{6}}, [](ad::Tape&, V v) {
         Rng rng(3);
         return weighted_sum(ad::dropout(v[0], 0.1, rng, false)); }},
      {"dropout-train", {{6}}, [](ad::Tape&, V v) {
         Rng rng(3);  // same mask on every evaluation
         return weighted_sum(ad::dropout(v[0], 0.5, rng, true)); }},
      {"bce-with-logits", {{2, 3}}, [](ad::Tape&, V v) {
         return ad::bce_with_logits(ad::scale(v[0], 4.0),
                                    Tensor::matrix(2, 3, {1, 0, 1, 0, 0, 1})); }},
      {"conv2d", {{2, 5, 6}, {3, 2, 3, 3}, {3}}, [](ad::Tape&, V v) {
         return weighted_sum(ad::conv2d(v[0], v[1], v[2], 2, 1)); }},
  };
}

}  // namespace

TEST_CASE("every op matches central differences at 100 random points") {
  Rng rng(20240601);
  for (const OpCase& c : op_cases()) {
    double worst = 0.0;
    for (int point = 0; point < 100; ++point) {
      std::vector<Tensor> inputs;
      for (const Shape& s : c.shapes) inputs.push_back(random_tensor(s, rng, c.lo, c.hi));
      worst = std::max(worst, ad::grad_check(c.fn, inputs, 1e-6).max_rel_error);
    }
    INFO(c.name);
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("split then concat reconstructs the input bitwise") {
  Rng rng(11);
  ad::Tape t;
  const Tensor x = random_tensor({3, 8}, rng);
  const ad::Var xv = t.constant(x);
  for (std::size_t axis : {0u, 1u}) {
    const std::size_t parts = axis == 0 ? 3 : 4;
    const auto pieces = ad::split(xv, axis, parts);
    CHECK(ad::concat(pieces, axis).value().bitwise_equal(x));
  }
  CHECK_THROWS_WITH_AS(ad::split(xv, 1, 3), doctest::Contains("shape-mismatch"), Error);
}

TEST_CASE("softmax normalization and shift invariance") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    ad::Tape t;
    const Tensor logits = random_tensor({9}, rng, -20.0, 20.0);
    const Tensor p = ad::softmax(t.constant(logits)).value();
    double total = 0.0;
    for (double v : p.values()) total += v;
    CHECK(std::abs(total - 1.0) < 1e-12);
    const ad::Var shifted = t.constant(logits) + t.constant(Tensor::scalar(37.25));
    CHECK(mlfsc::testing::max_abs_diff(ad::softmax(shifted).value(), p) < 1e-9);
  }
}

TEST_CASE("shared subexpressions accumulate gradients (diamond)") {
  // y = a * b with a = 2x and b = x^2: dy/dx = 6 x^2.
  ad::Tape t;
  const ad::Var x = t.variable(Tensor::scalar(1.7));
  const ad::Var a = ad::scale(x, 2.0);
  const ad::Var b = x * x;
  const ad::Var y = a * b;
  CHECK(t.backward(y)[x].item() == doctest::Approx(6.0 * 1.7 * 1.7).epsilon(1e-14));
}

TEST_CASE("structured errors") {
  ad::Tape t;
  const ad::Var a = t.constant(Tensor({2, 3}));
  const ad::Var b = t.constant(Tensor({3, 3}));
  CHECK_THROWS_WITH_AS(a + b, doctest::Contains("add"), Error);
  CHECK_THROWS_WITH_AS(ad::matmul(a, a), doctest::Contains("[2,3]"), Error);
  const ad::Var z = t.constant(Tensor({3}));
  const ad::Var v = t.constant(Tensor::vector({1, 2, 3}));
  try {
    ad::cosine(z, v);
    FAIL("expected degenerate-vector");
  } catch (const Error& e) {
    CHECK(e.code() == "degenerate-vector");
  }
  CHECK_THROWS_WITH_AS(ad::log(z), doctest::Contains("domain"), Error);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), Error);
}

TEST_CASE("dropout is deterministic for a seed and identity in eval mode") {
  ad::Tape t;
  const ad::Var x = t.constant(Tensor::filled({64}, 1.0));
  Rng r1(9), r2(9), r3(0);
  CHECK(ad::dropout(x, 0.1, r3, false).id() == x.id());
  const Tensor a = ad::dropout(x, 0.25, r1, true).value();
  const Tensor b = ad::dropout(x, 0.25, r2, true).value();
  CHECK(a.bitwise_equal(b));
  for (double v : a.values()) CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
}

TEST_CASE("conv2d against a direct loop") {
  Rng rng(2);
  const Tensor x = random_tensor({2, 6, 5}, rng);
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  ad::Tape t;
  const Tensor y = ad::conv2d(t.constant(x), t.constant(w), t.constant(b), 2, 1).value();
  REQUIRE(y.shape() == Shape{3, 3, 3});
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t oy = 0; oy < 3; ++oy)
      for (std::size_t ox = 0; ox < 3; ++ox) {
        double acc = b[o];
        for (std::size_t c = 0; c < 2; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = static_cast<int>(oy) * 2 + ky - 1;
              const int ix = static_cast<int>(ox) * 2 + kx - 1;
              if (iy < 0 || iy >= 6 || ix < 0 || ix >= 5) continue;
              acc += w[((o * 2 + c) * 3 + ky) * 3 + kx] * x[(c * 6 + iy) * 5 + ix];
            }
        CHECK(y[(o * 3 + oy) * 3 + ox] == doctest::Approx(acc).epsilon(1e-13));
      }
}
