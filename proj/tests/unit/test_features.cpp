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

#include <filesystem>

#include "doctest.h"
#include "mlfsc/error.hpp"
#include "mlfsc/features.hpp"
#include "test_util.hpp"

using namespace mlfsc;
using mlfsc::testing::max_abs_diff;

namespace {

LocalFeatureMap map_1x2x2() {
  return LocalFeatureMap(Tensor({1, 2, 2}, {1, 2, 3, 4}));
}

std::string code_of(std::span<const unsigned char> bytes) {
  try {
    parse_feature_bytes(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("global pooling") {
  CHECK(global_pool(map_1x2x2())[0] == 2.5);
  const LocalFeatureMap constant(Tensor::filled({3, 4, 5}, -1.25));
  for (double v : global_pool(constant).to_vector()) CHECK(v == -1.25);
}

TEST_CASE("weighted pooling") {
  const LocalFeatureMap m = map_1x2x2();
  CHECK(weighted_pool(m, Tensor::matrix(2, 2, {1, 0, 0, 1}))[0] == 1.25);
  CHECK(weighted_pool(m, Tensor({2, 2}))[0] == 0.0);
  Rng rng(1);
  const LocalFeatureMap r(uniform_tensor({4, 3, 5}, -2, 2, rng));
  CHECK(max_abs_diff(weighted_pool(r, Tensor::filled({3, 5}, 1.0)), global_pool(r)) < 1e-15);
  CHECK_THROWS_AS(weighted_pool(r, Tensor({5, 3})), Error);
}

TEST_CASE("weighted pooling is linear in rho") {
  Rng rng(2);
  const LocalFeatureMap m(uniform_tensor({5, 3, 3}, -1, 1, rng));
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor r1 = uniform_tensor({3, 3}, 0, 1, rng);
    const Tensor r2 = uniform_tensor({3, 3}, 0, 1, rng);
    const double a = std::uniform_real_distribution<double>(0, 1)(rng);
    const double b = 1.0 - a;
    std::vector<double> mix(9);
    for (std::size_t i = 0; i < 9; ++i) mix[i] = a * r1[i] + b * r2[i];
    const Tensor lhs = weighted_pool(m, Tensor({3, 3}, mix));
    const Tensor p1 = weighted_pool(m, r1), p2 = weighted_pool(m, r2);
    for (std::size_t c = 0; c < 5; ++c) CHECK(std::abs(lhs[c] - (a * p1[c] + b * p2[c])) <= 1e-12);
  }
}

TEST_CASE("differentiable pooling agrees with the plain version") {
  Rng rng(3);
  const LocalFeatureMap m(uniform_tensor({4, 2, 3}, -1, 1, rng));
  const Tensor rho = uniform_tensor({2, 3}, 0, 1, rng);
  ad::Tape t;
  const ad::Var locs = t.constant(m.locations());
  CHECK(max_abs_diff(ad::pool_locations(locs).value(), global_pool(m)) < 1e-15);
  CHECK(max_abs_diff(ad::weighted_pool_locations(locs, t.constant(rho)).value(),
                     weighted_pool(m, rho)) < 1e-15);
  const Tensor via_map = ad::feature_map_locations(t.constant(m.values())).value();
  CHECK(via_map.bitwise_equal(m.locations()));
}

TEST_CASE("FMAP1 parsing") {
  const LocalFeatureMap m(Tensor({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8}));
  std::vector<unsigned char> bytes = feature_bytes(m);
  CHECK(bytes.size() == 17 + 8 * 4);
  const LocalFeatureMap back = parse_feature_bytes(bytes);
  CHECK(back.values().bitwise_equal(m.values()));
  CHECK(back.at(1, 0, 1) == 6.0);

  std::vector<unsigned char> bad = bytes;
  std::fill_n(bad.begin(), 5, 'X');
  CHECK(code_of(bad) == "bad-magic");
  std::vector<unsigned char> short_payload(bytes.begin(), bytes.end() - 4);
  CHECK(code_of(short_payload) == "truncated");
  std::vector<unsigned char> zero = bytes;
  std::fill_n(zero.begin() + 9, 4, 0);
  CHECK(code_of(zero) == "zero-dims");
  std::vector<unsigned char> header_only(bytes.begin(), bytes.begin() + 10);
  CHECK(code_of(header_only) == "truncated");
}

TEST_CASE("FMAP1 file round trip is bitwise exact") {
  Rng rng(4);
  std::vector<double> v(6 * 3 * 4);
  for (double& x : v) x = static_cast<float>(std::normal_distribution<double>(0, 2)(rng));
  const LocalFeatureMap m(Tensor({6, 3, 4}, v));
  const auto path = std::filesystem::temp_directory_path() / "mlfsc_fmap_test.fmap";
  write_feature_file(path, m);
  const LocalFeatureMap back = load_feature_file(path);
  CHECK(back.values().bitwise_equal(m.values()));
  CHECK(feature_bytes(back) == feature_bytes(m));
  std::filesystem::remove(path);
}

TEST_CASE("toy backbone") {
  Rng rng(5);
  ToyBackbone zero = ToyBackbone::init(4, 6, rng);
  zero.conv1_weight = Tensor(zero.conv1_weight.shape());
  zero.conv2_weight = Tensor(zero.conv2_weight.shape());
  const Tensor image = uniform_tensor({3, 9, 12}, -1, 1, rng);
  const LocalFeatureMap out = toy_backbone_forward(zero, image);
  for (double v : out.values().to_vector()) CHECK(v == 0.0);

  // Shape oracle: padding 1, stride 2, kernel 3 -> floor((x + 2 - 3) / 2) + 1.
  const std::pair<std::size_t, std::size_t> cases[] = {{8, 2}, {9, 3}, {12, 3}, {16, 4}, {17, 5}};
  for (auto [in, expected] : cases) CHECK(toy_backbone_extent(in) == expected);
  const ToyBackbone random = ToyBackbone::init(4, 6, rng);
  const LocalFeatureMap r = toy_backbone_forward(random, image);
  CHECK(r.values().shape() == Shape{6, 3, 3});

  CHECK_THROWS_WITH_AS(toy_backbone_forward(random, Tensor({3, 7, 9})),
                       doctest::Contains("undersized-image"), Error);
}

TEST_CASE("toy backbone identity-like kernel on a constant image") {
  // One hidden and one output channel whose kernels sum a single center tap:
  // interior outputs reproduce the constant.
  ToyBackbone bb;
  std::vector<double> w1(27, 0.0);
  w1[4] = 1.0;  // input channel 0, center
  bb.conv1_weight = Tensor({1, 3, 3, 3}, w1);
  bb.conv1_bias = Tensor({1});
  std::vector<double> w2(9, 0.0);
  w2[4] = 1.0;
  bb.conv2_weight = Tensor({1, 1, 3, 3}, w2);
  bb.conv2_bias = Tensor({1});
  const LocalFeatureMap out = toy_backbone_forward(bb, Tensor::filled({3, 8, 8}, 0.75));
  for (double v : out.values().to_vector()) CHECK(v == 0.75);
}
