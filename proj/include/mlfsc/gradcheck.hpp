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

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mlfsc/autodiff.hpp"
#include "mlfsc/tensor.hpp"

namespace mlfsc::ad {

/// Builds a scalar on a fresh tape from the given input variables.
using MultiScalarFn = std::function<Var(Tape&, std::span<const Var>)>;
using ScalarFn = std::function<Var(Tape&, Var)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
};

/// Compares reverse-mode gradients against central differences.
///
/// The error of one component is |analytic - numeric| / max(1, |analytic|);
/// the result is the maximum over all components of all inputs.
/// eps must lie in (0, 1e-3]; a non-scalar f raises Error("not-scalar").
GradCheckResult grad_check(const MultiScalarFn& f, std::span<const Tensor> inputs,
                           double eps = 1e-6);
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-6);

}  // namespace mlfsc::ad
