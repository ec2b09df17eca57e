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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mlfsc/autodiff.hpp"
#include "mlfsc/random.hpp"
#include "mlfsc/tensor.hpp"

namespace mlfsc {

/// n x h x w grid of local features for one image (channel slowest).
class LocalFeatureMap {
 public:
  LocalFeatureMap() = default;
  /// values must have shape [channels, height, width] with finite entries.
  explicit LocalFeatureMap(Tensor values);

  std::size_t channels() const { return values_.dim(0); }
  std::size_t height() const { return values_.dim(1); }
  std::size_t width() const { return values_.dim(2); }
  std::size_t cells() const { return height() * width(); }
  const Tensor& values() const noexcept { return values_; }
  double at(std::size_t channel, std::size_t row, std::size_t col) const;

  /// [h*w, n] matrix; row j*w + k holds the feature at grid cell (j, k).
  Tensor locations() const;

 private:
  Tensor values_{Shape{1, 1, 1}};
};

/// Mean over all grid cells, per channel.
Tensor global_pool(const LocalFeatureMap& map);
/// (1 / (h*w)) * sum_{j,k} rho[j,k] * f[:, j, k]; rho is [h, w] in [0, 1].
Tensor weighted_pool(const LocalFeatureMap& map, const Tensor& rho);

namespace ad {
/// Differentiable global pooling of a [cells, n] location matrix.
Var pool_locations(Var locations);
/// Differentiable importance-weighted pooling; rho has cells entries.
Var weighted_pool_locations(Var locations, Var rho);
/// [n, h, w] feature map -> [h*w, n] location matrix.
Var feature_map_locations(Var map);
}  // namespace ad

// FMAP1 files: "FMAP1", u32 n, u32 h, u32 w (little-endian), then n*h*w
// little-endian float32 values in (channel, row, col) order.
LocalFeatureMap parse_feature_bytes(std::span<const unsigned char> bytes);
LocalFeatureMap load_feature_file(const std::filesystem::path& path);
std::vector<unsigned char> feature_bytes(const LocalFeatureMap& map);
void write_feature_file(const std::filesystem::path& path,
                        const LocalFeatureMap& map);

/// Two 3x3 stride-2 convolutions with padding 1, each followed by ReLU,
/// mapping a 3 x H x W image to n x ceil(ceil(H/2)/2) x ceil(ceil(W/2)/2).
struct ToyBackbone {
  Tensor conv1_weight;  // [hidden, 3, 3, 3]
  Tensor conv1_bias;    // [hidden]
  Tensor conv2_weight;  // [channels, hidden, 3, 3]
  Tensor conv2_bias;    // [channels]

  static ToyBackbone init(std::size_t hidden, std::size_t channels, Rng& rng);
  std::size_t channels() const { return conv2_weight.dim(0); }

  template <typename F>
  void visit(F&& f) {
    f("backbone.conv1.weight", conv1_weight);
    f("backbone.conv1.bias", conv1_bias);
    f("backbone.conv2.weight", conv2_weight);
    f("backbone.conv2.bias", conv2_bias);
  }
};

inline constexpr std::size_t kMinBackboneExtent = 8;

/// Spatial extent of the backbone output for an input extent.
std::size_t toy_backbone_extent(std::size_t input_extent);

struct ToyBackboneVars {
  ad::Var conv1_weight, conv1_bias, conv2_weight, conv2_bias;
};
ToyBackboneVars bind(ad::Tape& tape, const ToyBackbone& params);

/// image is [3, H, W] with H, W >= 8; returns [n, h, w].
ad::Var toy_backbone_forward(const ToyBackboneVars& params, ad::Var image);
LocalFeatureMap toy_backbone_forward(const ToyBackbone& params,
                                     const Tensor& image);

}  // namespace mlfsc
