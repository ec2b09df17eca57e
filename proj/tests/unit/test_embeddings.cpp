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

#include <functional>
#include <sstream>

#include "doctest.h"
#include "mlfsc/embeddings.hpp"
#include "mlfsc/error.hpp"
#include "test_util.hpp"

using namespace mlfsc;

namespace {

EmbeddingTable parse(const std::string& text) {
  std::istringstream in(text);
  return parse_embedding_text(in);
}

std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("parse a single entry") {
  const EmbeddingTable t = parse("cat 0.1 0.2 0.3\n");
  CHECK(t.dimension() == 3);
  const auto* v = t.find("cat");
  REQUIRE(v != nullptr);
  CHECK((*v)[0] == 0.1);
  CHECK((*v)[2] == 0.3);
}

TEST_CASE("parse errors") {
  std::istringstream in("a 1 2 3\nb 1 2 3 4\n");
  try {
    parse_embedding_text(in);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "inconsistent-arity");
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(error_code([] { parse(""); }) == "empty-embedding-file");
  CHECK(error_code([] { parse("a 1 x 3\n"); }) == "non-numeric");
  CHECK(error_code([] { parse("a 1 2\na 3 4\n"); }) == "duplicate-token");
  CHECK(error_code([] { parse("a 1  2\n"); }) == "non-numeric");
}

TEST_CASE("embed_label lookup, averaging and missing tokens") {
  const EmbeddingTable t = parse("cat 0.1 0.2\na 0 0\nb 2 4\nplant 1 1\npotted 3 5\n");
  const Tensor cat = embed_label(t, "cat");
  CHECK(cat[0] == 0.1);
  CHECK(cat[1] == 0.2);
  const Tensor ab = embed_label(t, "a b");
  CHECK(ab[0] == 1.0);
  CHECK(ab[1] == 2.0);
  CHECK(embed_label(t, "Potted_Plant").bitwise_equal(embed_label(t, "potted plant")));
  try {
    embed_label(t, "unicorn");
    FAIL("expected missing-token");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "missing-token: unicorn");
  }
  CHECK(error_code([&] { embed_label(t, " _ "); }) == "empty-label");
  const Tensor unit = embed_label(t, "b", {.l2_normalize = true});
  CHECK(unit[0] * unit[0] + unit[1] * unit[1] == doctest::Approx(1.0));
}

TEST_CASE("token averaging is order independent") {
  Rng rng(4);
  EmbeddingTable t(6);
  const char* tokens[] = {"x", "y", "z", "w"};
  for (const char* tok : tokens) t.add(tok, uniform_tensor({6}, -1, 1, rng).to_vector());
  const Tensor a = embed_label(t, "x y z w");
  const Tensor b = embed_label(t, "w_z y x");
  CHECK(mlfsc::testing::max_abs_diff(a, b) < 1e-15);
}

TEST_CASE("serialize and reparse round trip") {
  Rng rng(8);
  EmbeddingTable t(13);
  for (int i = 0; i < 20; ++i)
    t.add("tok" + std::to_string(i), normal_tensor({13}, 3.0, rng).to_vector());
  std::ostringstream out;
  write_embedding_text(out, t);
  const EmbeddingTable back = parse(out.str());
  REQUIRE(back.size() == t.size());
  for (const std::string& tok : t.tokens()) {
    const auto& a = *t.find(tok);
    const auto& b = *back.find(tok);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
  }
}

TEST_CASE("split vocabulary") {
  std::istringstream in("# header\nbase\tcat\nbase\tdog\nnovel\tpotted plant\n\n");
  const LabelVocabulary v = parse_split_text(in);
  CHECK(v.labels("base") == std::vector<std::string>{"cat", "dog"});
  CHECK(v.split_of("potted plant") == "novel");
  CHECK_FALSE(v.split_of("cow").has_value());
  std::istringstream overlap("base\tcat\nnovel\tcat\n");
  CHECK(error_code([&] { parse_split_text(overlap); }) == "overlapping-splits");
  CHECK(error_code([&] { v.labels("val"); }) == "unknown-split");
}
