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
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "mlfsc/error.hpp"
#include "mlfsc/evaluate.hpp"
#include "mlfsc/logging.hpp"
#include "mlfsc/trainer.hpp"

using namespace mlfsc;
using namespace mlfsc::testing;
namespace fs = std::filesystem;

TEST_CASE("evaluation is deterministic and mode-paired") {
  const fs::path dir = scratch_dir("evaluate");
  const SmallData d = small_data(dir);
  ModelState s = ModelState::fresh(small_model(), 2);
  TrainConfig tc;
  tc.epochs = 3;
  tc.warmup_epochs = 1;
  tc.episodes_per_epoch = 4;
  train(s, d.base, tc);

  EvalConfig c;
  c.episodes = 6;
  const EvalResult once = evaluate(s.params, d.novel, c);
  CHECK(once.report.episodes == 6);
  CHECK(once.episodes.size() == 6);
  CHECK(to_json(evaluate(s.params, d.novel, c).report).dump() == to_json(once.report).dump());

  SUBCASE("thread count does not change the report") {
    EvalConfig threaded = c;
    threaded.threads = 4;
    CHECK(to_json(evaluate(s.params, d.novel, threaded).report).dump() ==
          to_json(once.report).dump());
  }

  SUBCASE("theta 0.5 LCM equals the base model") {
    EvalConfig lcm = c;
    lcm.mode = EvalMode::kLcm;
    lcm.lcm.theta = 0.5;
    CHECK(to_json(evaluate(s.params, d.novel, lcm).report).dump() ==
          to_json(once.report).dump());
  }

  SUBCASE("modes score the same episodes") {
    EvalConfig zs = c;
    zs.mode = EvalMode::kZeroShot;
    for (std::size_t i = 0; i < 3; ++i) {
      const ScoredEpisode a = score_episode(s.params, d.novel, c, i);
      const ScoredEpisode b = score_episode(s.params, d.novel, zs, i);
      CHECK(a.truths.bitwise_equal(b.truths));
      CHECK_FALSE(a.probabilities.bitwise_equal(b.probabilities));
      for (double p : a.probabilities.to_vector()) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
    }
    CHECK(eval_episode_seed(1, 0) != eval_episode_seed(1, 1));
    CHECK(eval_episode_seed(1, 0) != eval_episode_seed(2, 0));
  }

  SUBCASE("a single episode reports its own metrics") {
    EvalConfig one = c;
    one.episodes = 1;
    const EvalResult r = evaluate(s.params, d.novel, one);
    CHECK(r.report.ma_ap == r.episodes[0].ma_ap);
    CHECK(r.report.mi_ap == r.episodes[0].mi_ap);
    CHECK(r.report.mi_f1 == r.episodes[0].mi_f1);
    CHECK(r.report.ma_f1 == r.episodes[0].ma_f1);
  }

  SUBCASE("strict LCM threshold runs and reports fallbacks as warnings") {
    EvalConfig lcm = c;
    lcm.mode = EvalMode::kLcm;
    lcm.episodes = 2;
    const LogLevel previous = log_level();
    set_log_level(LogLevel::kQuiet);
    const EvalResult r = evaluate(s.params, d.novel, lcm);
    set_log_level(previous);
    CHECK(r.report.episodes == 2);
  }

  SUBCASE("report JSON layout") {
    const nlohmann::ordered_json j = to_json(once.report);
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    CHECK(keys == std::vector<std::string>{"mi_ap", "ma_ap", "mi_f1", "ma_f1", "per_label_ap",
                                           "episodes"});
    CHECK(j["per_label_ap"].size() == d.novel.labels.size());
  }

  SUBCASE("configuration errors") {
    EvalConfig bad = c;
    bad.episodes = 0;
    CHECK_THROWS_AS(evaluate(s.params, d.novel, bad), Error);
    CHECK(parse_eval_mode("zeroshot") == EvalMode::kZeroShot);
    CHECK(std::string(eval_mode_name(EvalMode::kSimpleAttention)) == "simple-attention");
    CHECK_THROWS_WITH_AS(parse_eval_mode("fancy"), doctest::Contains("invalid-config"), Error);
  }
  fs::remove_all(dir);
}
