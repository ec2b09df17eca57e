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

#include "mlfsc/tensor.hpp"

namespace mlfsc {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment estimates for one parameter tensor. Default
/// constructed moments are treated as zeros of the parameter's shape.
struct AdamMoments {
  Tensor first;
  Tensor second;
  bool initialized = false;
};

/// One bias-corrected Adam update. step counts from 1.
Tensor adam_step(const Tensor& param, const Tensor& grad, AdamMoments& moments,
                 double lr, std::size_t step, const AdamConfig& config = {});

}  // namespace mlfsc
