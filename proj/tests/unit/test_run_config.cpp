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

#include <string>

#include "doctest.h"
#include "mlfsc/error.hpp"
#include "mlfsc/gradcheck_suite.hpp"
#include "mlfsc/run_config.hpp"

using namespace mlfsc;

TEST_CASE("run config text round trip") {
  RunConfig c;
  c.d_j = 32;
  c.n_heads = 4;
  c.lr = 3e-4;
  c.theta = 0.7;
  c.seed = 18446744073709551615ULL;
  c.prototype = "simple-attention";
  c.checkpoint = "some dir/model.ckpt";
  const RunConfig back = RunConfig::parse(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.lr == 3e-4);
  CHECK(back.seed == c.seed);
  CHECK(back.checkpoint == c.checkpoint);
  CHECK(RunConfig::parse("").to_text() == RunConfig{}.to_text());
  CHECK(RunConfig::keys().size() == 25);
}

TEST_CASE("run config parsing") {
  const RunConfig c = RunConfig::parse(
      "# desk run\n"
      "  d_j = 16   # joint width\n"
      "\n"
      "n_heads=2\r\n"
      "gamma = 0\n");
  CHECK(c.d_j == 16);
  CHECK(c.n_heads == 2);
  CHECK(c.gamma == 0.0);
  CHECK(c.epochs == 30);

  CHECK_THROWS_WITH_AS(RunConfig::parse("bogus = 1\n"), doctest::Contains("unknown key"), Error);
  CHECK_THROWS_WITH_AS(RunConfig::parse("d_j = 1\nepochs = ten\n"), doctest::Contains("line 2"),
                       Error);
  CHECK_THROWS_AS(RunConfig::parse("k_shot = -1\n"), Error);
  CHECK_THROWS_AS(RunConfig::parse("lr = 1e-3x\n"), Error);
  CHECK_THROWS_WITH_AS(RunConfig::parse("just words\n"), doctest::Contains("key = value"), Error);

  RunConfig later = c;
  later.merge_text("d_j = 24\n");
  CHECK(later.d_j == 24);
  CHECK(later.n_heads == 2);
}

TEST_CASE("run config invariants") {
  const auto invalid = [](const std::string& text) {
    try {
      RunConfig::parse(text).validate();
    } catch (const Error& e) {
      return e.code() == "invalid-config";
    }
    return false;
  };
  CHECK_NOTHROW(RunConfig{}.validate());
  CHECK(invalid("n_heads = 7\n"));
  CHECK(invalid("theta = 1\n"));
  CHECK(invalid("theta = 0.49\n"));
  CHECK_NOTHROW(RunConfig::parse("theta = 0.5\n").validate());
  CHECK(invalid("k_shot = 0\n"));
  CHECK(invalid("prototype = mystery\n"));
  CHECK(invalid("prototype = zero-shot\n"));
  CHECK(invalid("threads = 0\n"));
}

TEST_CASE("derived component configs") {
  const RunConfig c = RunConfig::parse("d_j = 16\nn_heads = 4\ntheta = 0.8\nlcm_epochs = 5\n"
                                       "k_shot = 5\nthreads = 3\nseed = 9\n");
  const ModelConfig m = c.model_config(32, 24);
  CHECK(m.joint_dim == 16);
  CHECK(m.heads == 4);
  CHECK(m.channels == 32);
  const EvalConfig e = c.eval_config(EvalMode::kLcm);
  CHECK(e.lcm.theta == 0.8);
  CHECK(e.lcm.epochs == 5);
  CHECK(e.k_shot == 5);
  CHECK(e.threads == 3);
  CHECK(c.train_config().seed == 9);
}

TEST_CASE("run ids depend on config and context") {
  RunConfig c;
  const std::string a = run_id(c, "eval");
  CHECK(a.size() == 12);
  CHECK(run_id(c, "eval") == a);
  CHECK(run_id(c, "train") != a);
  c.seed = 2;
  CHECK(run_id(c, "eval") != a);
}

TEST_CASE("gradient-check suite passes and catches an injected fault") {
  GradCheckSuiteConfig cfg;
  cfg.points = 3;
  const std::vector<GradCheckRow> rows = run_gradcheck_suite(cfg);
  CHECK(rows.size() >= 40);
  for (const GradCheckRow& r : rows) {
    CAPTURE(r.name);
    CHECK(r.passed());
  }
  CHECK(all_passed(rows));
  CHECK(format_gradcheck_table(rows).find("FAIL") == std::string::npos);

  cfg.inject_fault = true;
  const std::vector<GradCheckRow> faulty = run_gradcheck_suite(cfg);
  CHECK_FALSE(all_passed(faulty));
  CHECK(faulty.back().name == "injected-fault");
  CHECK(format_gradcheck_table(faulty).find("FAIL") != std::string::npos);
}
