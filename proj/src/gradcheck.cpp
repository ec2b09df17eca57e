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

#include "mlfsc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mlfsc/error.hpp"

namespace mlfsc::ad {
namespace {

double evaluate(const MultiScalarFn& f, std::span<const Tensor> inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.constant(t));
  const Var out = f(tape, vars);
  check(out.size() == 1, "not-scalar",
        "grad_check needs a scalar function, got " + shape_string(out.shape()));
  return out.value()[0];
}

}  // namespace

GradCheckResult grad_check(const MultiScalarFn& f, std::span<const Tensor> inputs,
                           double eps) {
  check(eps > 0.0 && eps <= 1e-3, "invalid-argument",
        "grad_check eps must lie in (0, 1e-3]");
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.variable(t));
  const Var out = f(tape, vars);
  check(out.size() == 1, "not-scalar",
        "grad_check needs a scalar function, got " + shape_string(out.shape()));
  const Gradients grads = tape.backward(out);

  GradCheckResult result;
  std::vector<Tensor> probe(inputs.begin(), inputs.end());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = grads[vars[k]];
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      std::vector<double> shifted = inputs[k].to_vector();
      shifted[i] = inputs[k][i] + eps;
      probe[k] = Tensor(inputs[k].shape(), shifted);
      const double up = evaluate(f, probe);
      shifted[i] = inputs[k][i] - eps;
      probe[k] = Tensor(inputs[k].shape(), shifted);
      const double down = evaluate(f, probe);
      probe[k] = inputs[k];

      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::abs(analytic[i] - numeric) /
                         std::max(1.0, std::abs(analytic[i]));
      if (err > result.max_rel_error || std::isnan(err)) {
        result = {std::isnan(err) ? INFINITY : err, k, i};
      }
    }
  }
  return result;
}

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  const Tensor inputs[] = {x};
  return grad_check(
             [&f](Tape& tape, std::span<const Var> v) { return f(tape, v[0]); },
             inputs, eps)
      .max_rel_error;
}

}  // namespace mlfsc::ad
