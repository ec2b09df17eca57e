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

#include "mlfsc/features.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mlfsc/error.hpp"

namespace mlfsc {

static_assert(std::endian::native == std::endian::little,
              "FMAP1 reader assumes a little-endian host");

LocalFeatureMap::LocalFeatureMap(Tensor values) : values_(std::move(values)) {
  check(values_.rank() == 3, "shape-mismatch",
        "feature map needs [n, h, w], got " + shape_string(values_.shape()));
  check(values_.all_finite(), "non-finite", "feature map has non-finite values");
}

double LocalFeatureMap::at(std::size_t channel, std::size_t row,
                           std::size_t col) const {
  return values_[(channel * height() + row) * width() + col];
}

Tensor LocalFeatureMap::locations() const {
  const std::size_t n = channels(), cells = this->cells();
  std::vector<double> out(cells * n);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t p = 0; p < cells; ++p) out[p * n + c] = values_[c * cells + p];
  return Tensor::matrix(cells, n, std::move(out));
}

Tensor global_pool(const LocalFeatureMap& map) {
  return weighted_pool(map, Tensor::filled({map.height(), map.width()}, 1.0));
}

Tensor weighted_pool(const LocalFeatureMap& map, const Tensor& rho) {
  check(rho.shape() == Shape{map.height(), map.width()}, "shape-mismatch",
        "importance grid " + shape_string(rho.shape()) + " for a " +
            std::to_string(map.height()) + "x" + std::to_string(map.width()) +
            " map");
  const std::size_t cells = map.cells();
  std::vector<double> out(map.channels(), 0.0);
  for (std::size_t c = 0; c < map.channels(); ++c) {
    double acc = 0.0;
    for (std::size_t p = 0; p < cells; ++p)
      acc += rho[p] * map.values()[c * cells + p];
    out[c] = acc / static_cast<double>(cells);
  }
  return Tensor::vector(std::move(out));
}

namespace ad {

Var pool_locations(Var locations) { return mean(locations, 0); }

Var weighted_pool_locations(Var locations, Var rho) {
  const std::size_t cells = locations.shape().at(0);
  check(rho.size() == cells, "shape-mismatch",
        "importance grid of " + std::to_string(rho.size()) + " cells for " +
            std::to_string(cells) + " locations");
  const Var weighted = matmul(reshape(rho, {1, cells}), locations);
  return scale(reshape(weighted, {locations.shape()[1]}),
               1.0 / static_cast<double>(cells));
}

Var feature_map_locations(Var map) {
  const Shape& s = map.shape();
  check(s.size() == 3, "shape-mismatch",
        "feature map needs [n, h, w], got " + shape_string(s));
  return transpose(reshape(map, {s[0], s[1] * s[2]}));
}

}  // namespace ad

namespace {

constexpr char kMagic[] = {'F', 'M', 'A', 'P', '1'};
constexpr std::size_t kHeaderBytes = sizeof kMagic + 3 * sizeof(std::uint32_t);

std::uint32_t read_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  std::memcpy(&v, p, sizeof v);
  return v;
}

}  // namespace

LocalFeatureMap parse_feature_bytes(std::span<const unsigned char> bytes) {
  check(bytes.size() >= sizeof kMagic &&
            std::memcmp(bytes.data(), kMagic, sizeof kMagic) == 0,
        "bad-magic", "missing FMAP1 magic");
  check(bytes.size() >= kHeaderBytes, "truncated", "header shorter than 17 bytes");
  const std::uint32_t n = read_u32(bytes.data() + 5);
  const std::uint32_t h = read_u32(bytes.data() + 9);
  const std::uint32_t w = read_u32(bytes.data() + 13);
  check(n > 0 && h > 0 && w > 0, "zero-dims",
        "FMAP1 dimensions must be positive");
  const std::uint64_t count = std::uint64_t{n} * h * w;
  const std::uint64_t payload = bytes.size() - kHeaderBytes;
  check(payload >= count * sizeof(float), "truncated",
        "declared " + std::to_string(count) + " floats, file has " +
            std::to_string(payload / sizeof(float)));
  check(payload == count * sizeof(float), "trailing-data",
        "bytes after the declared payload");
  std::vector<double> values(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    float f = 0.0f;
    std::memcpy(&f, bytes.data() + kHeaderBytes + i * sizeof f, sizeof f);
    values[i] = f;
  }
  return LocalFeatureMap(Tensor({n, h, w}, std::move(values)));
}

LocalFeatureMap load_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "io-error", "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return parse_feature_bytes(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<unsigned char> feature_bytes(const LocalFeatureMap& map) {
  std::vector<unsigned char> out(kHeaderBytes + map.values().size() * sizeof(float));
  std::memcpy(out.data(), kMagic, sizeof kMagic);
  const std::uint32_t dims[] = {static_cast<std::uint32_t>(map.channels()),
                                static_cast<std::uint32_t>(map.height()),
                                static_cast<std::uint32_t>(map.width())};
  std::memcpy(out.data() + sizeof kMagic, dims, sizeof dims);
  for (std::size_t i = 0; i < map.values().size(); ++i) {
    const float f = static_cast<float>(map.values()[i]);
    std::memcpy(out.data() + kHeaderBytes + i * sizeof f, &f, sizeof f);
  }
  return out;
}

void write_feature_file(const std::filesystem::path& path,
                        const LocalFeatureMap& map) {
  const std::vector<unsigned char> bytes = feature_bytes(map);
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "io-error", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  check(out.good(), "io-error", "failed writing " + path.string());
}

ToyBackbone ToyBackbone::init(std::size_t hidden, std::size_t channels, Rng& rng) {
  const double b1 = 1.0 / std::sqrt(3.0 * 9.0);
  const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden) * 9.0);
  return ToyBackbone{
      uniform_tensor({hidden, 3, 3, 3}, -b1, b1, rng),
      Tensor({hidden}),
      uniform_tensor({channels, hidden, 3, 3}, -b2, b2, rng),
      Tensor({channels}),
  };
}

std::size_t toy_backbone_extent(std::size_t input_extent) {
  return ad::conv_output_extent(ad::conv_output_extent(input_extent, 3, 2, 1), 3,
                                2, 1);
}

ToyBackboneVars bind(ad::Tape& tape, const ToyBackbone& params) {
  return {tape.variable(params.conv1_weight), tape.variable(params.conv1_bias),
          tape.variable(params.conv2_weight), tape.variable(params.conv2_bias)};
}

ad::Var toy_backbone_forward(const ToyBackboneVars& params, ad::Var image) {
  const Shape& s = image.shape();
  check(s.size() == 3 && s[0] == 3, "shape-mismatch",
        "backbone input must be [3, H, W], got " + shape_string(s));
  check(s[1] >= kMinBackboneExtent && s[2] >= kMinBackboneExtent,
        "undersized-image",
        "backbone input must be at least 8x8, got " + shape_string(s));
  const ad::Var hidden =
      ad::relu(ad::conv2d(image, params.conv1_weight, params.conv1_bias, 2, 1));
  return ad::relu(ad::conv2d(hidden, params.conv2_weight, params.conv2_bias, 2, 1));
}

LocalFeatureMap toy_backbone_forward(const ToyBackbone& params,
                                     const Tensor& image) {
  ad::Tape tape;
  const ToyBackboneVars vars{
      tape.constant(params.conv1_weight), tape.constant(params.conv1_bias),
      tape.constant(params.conv2_weight), tape.constant(params.conv2_bias)};
  return LocalFeatureMap(toy_backbone_forward(vars, tape.constant(image)).value());
}

}  // namespace mlfsc
