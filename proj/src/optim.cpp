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

#include "mlfsc/optim.hpp"

#include <cmath>

#include "mlfsc/error.hpp"

namespace mlfsc {

Tensor adam_step(const Tensor& param, const Tensor& grad, AdamMoments& moments,
                 double lr, std::size_t step, const AdamConfig& config) {
  check(param.same_shape(grad), "shape-mismatch",
        "adam: gradient " + shape_string(grad.shape()) + " for parameter " +
            shape_string(param.shape()));
  check(step >= 1, "invalid-argument", "adam step index starts at 1");
  if (!moments.initialized) {
    moments.first = Tensor(param.shape());
    moments.second = Tensor(param.shape());
    moments.initialized = true;
  }
  check(moments.first.same_shape(param) && moments.second.same_shape(param),
        "shape-mismatch",
        "adam: moment buffers " + shape_string(moments.first.shape()) +
            " for parameter " + shape_string(param.shape()));

  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  std::vector<double> m(param.size()), v(param.size()), out(param.size());
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = config.beta1 * moments.first[i] + (1.0 - config.beta1) * grad[i];
    v[i] = config.beta2 * moments.second[i] +
           (1.0 - config.beta2) * grad[i] * grad[i];
    out[i] = param[i] - lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.epsilon);
  }
  moments.first = Tensor(param.shape(), std::move(m));
  moments.second = Tensor(param.shape(), std::move(v));
  return Tensor(param.shape(), std::move(out));
}

}  // namespace mlfsc
