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

#include <cmath>
#include <filesystem>
#include <limits>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "mlfsc/error.hpp"
#include "mlfsc/optim.hpp"
#include "mlfsc/trainer.hpp"

using namespace mlfsc;
using namespace mlfsc::testing;
namespace fs = std::filesystem;

namespace {

bool same_params(const ModelState& a, const ModelState& b) {
  ModelParams pa = a.params, pb = b.params;
  std::vector<Tensor> ta, tb;
  pa.visit([&](const std::string&, Tensor& x) { ta.push_back(x); });
  pb.visit([&](const std::string&, Tensor& x) { tb.push_back(x); });
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (!ta[i].bitwise_equal(tb[i])) return false;
  return true;
}

TrainConfig short_run(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.warmup_epochs = epochs > 1 ? 1 : 0;
  c.episodes_per_epoch = 3;
  c.learning_rate = 1e-2;
  return c;
}

}  // namespace

TEST_CASE("adam step examples") {
  const Tensor x = Tensor::vector({1.0, -2.0, 0.5});
  AdamMoments m;
  CHECK(adam_step(x, Tensor::vector({0, 0, 0}), m, 1e-3, 1).bitwise_equal(x));

  AdamMoments m2;
  const Tensor y = adam_step(x, Tensor::vector({0.3, -5.0, 2.0}), m2, 1e-3, 1);
  CHECK(y[0] - x[0] == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(y[1] - x[1] == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(y[2] - x[2] == doctest::Approx(-1e-3).epsilon(1e-6));

  // Quadratic bowl (x - 1)^2 from 0.
  Tensor p = Tensor::vector({0.0});
  AdamMoments bowl;
  for (std::size_t step = 1; step <= 100; ++step)
    p = adam_step(p, Tensor::vector({2.0 * (p[0] - 1.0)}), bowl, 0.1, step);
  CHECK(std::abs(p[0] - 1.0) < 1e-2);

  AdamMoments m3;
  CHECK_THROWS_WITH_AS(adam_step(x, Tensor::vector({1, 2}), m3, 1e-3, 1),
                       doctest::Contains("shape-mismatch"), Error);
}

TEST_CASE("learning rate warm-up and config validation") {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.warmup_epochs = 3;
  CHECK(learning_rate_at(c, 0) == doctest::Approx(1e-3 / 3));
  CHECK(learning_rate_at(c, 1) == doctest::Approx(2e-3 / 3));
  CHECK(learning_rate_at(c, 2) == doctest::Approx(1e-3));
  CHECK(learning_rate_at(c, 3) == 1e-3);
  CHECK(learning_rate_at(c, 29) == 1e-3);
  c.warmup_epochs = 0;
  CHECK(learning_rate_at(c, 0) == 1e-3);

  TrainConfig bad;
  bad.warmup_epochs = bad.epochs;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("invalid-config"), Error);
  bad = TrainConfig{};
  bad.gamma = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = TrainConfig{};
  bad.prototypes = PrototypeMode::kZeroShot;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = TrainConfig{};
  bad.k_shot = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK(train_episode_seed(1, 0, 0) != train_episode_seed(1, 0, 1));
  CHECK(train_episode_seed(1, 0, 1) != train_episode_seed(1, 1, 0));
}

TEST_CASE("training is deterministic, resumable and leaves the data alone") {
  const fs::path dir = scratch_dir("trainer");
  const SmallData d = small_data(dir);
  const std::string manifest_before = file_bytes(d.paths.manifest);
  const std::string feature_before = file_bytes(d.base.manifest[0].features);

  SUBCASE("zero epochs is the identity") {
    ModelState s = ModelState::fresh(small_model(), 3);
    const ModelState before = s;
    CHECK(train(s, d.base, short_run(0)).empty());
    CHECK(same_params(s, before));
    CHECK(s.epoch == 0);
  }

  SUBCASE("identical seeds give identical parameters") {
    ModelState a = ModelState::fresh(small_model(), 3);
    ModelState b = ModelState::fresh(small_model(), 3);
    const auto la = train(a, d.base, short_run(3));
    const auto lb = train(b, d.base, short_run(3));
    CHECK(same_params(a, b));
    REQUIRE(la.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(la[i].total_loss == lb[i].total_loss);
    CHECK(a.epoch == 3);
    CHECK(a.step == 9);

    ModelState c = ModelState::fresh(small_model(), 4);
    train(c, d.base, short_run(3));
    CHECK_FALSE(same_params(a, c));
  }

  SUBCASE("resume equals an uninterrupted run") {
    ModelState whole = ModelState::fresh(small_model(), 5);
    const auto all = train(whole, d.base, short_run(4));
    ModelState part = ModelState::fresh(small_model(), 5);
    TrainConfig half = short_run(4);
    half.epochs = 2;
    const auto first = train(part, d.base, half);
    const auto rest = train(part, d.base, short_run(4));
    CHECK(first.size() == 2);
    REQUIRE(rest.size() == 2);
    CHECK(rest[0].epoch == 3);
    CHECK(rest[1].total_loss == all[3].total_loss);
    CHECK(same_params(part, whole));
  }

  SUBCASE("epoch callback and logged learning rate") {
    ModelState s = ModelState::fresh(small_model(), 6);
    std::vector<std::size_t> seen;
    const auto logs = train(s, d.base, short_run(3), [&](const EpochLog& log, const ModelState& st) {
      seen.push_back(log.epoch);
      CHECK(st.epoch == log.epoch);
    });
    CHECK(seen == std::vector<std::size_t>{1, 2, 3});
    CHECK(logs[0].lr == doctest::Approx(1e-2));
    for (const EpochLog& log : logs)
      CHECK(log.total_loss == doctest::Approx(log.cm_loss + log.query_loss));
  }

  SUBCASE("non-finite parameters are reported with the episode seed") {
    ModelState s = ModelState::fresh(small_model(), 7);
    std::vector<double> v = s.params.joint.a_visual.to_vector();
    v[0] = std::numeric_limits<double>::quiet_NaN();
    s.params.joint.a_visual = Tensor(s.params.joint.a_visual.shape(), v);
    CHECK_THROWS_WITH_AS(train(s, d.base, short_run(2)), doctest::Contains("numeric-failure"),
                         Error);
    try {
      train(s, d.base, short_run(2));
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
      CHECK(std::string(e.what()).find(std::to_string(train_episode_seed(1, 0, 0))) !=
            std::string::npos);
    }
  }

  SUBCASE("dimension mismatch") {
    ModelConfig wrong = small_model();
    wrong.channels = 5;
    ModelState s = ModelState::fresh(wrong, 1);
    CHECK_THROWS_WITH_AS(train(s, d.base, short_run(1)), doctest::Contains("shape-mismatch"),
                         Error);
  }

  CHECK(file_bytes(d.paths.manifest) == manifest_before);
  CHECK(file_bytes(d.base.manifest[0].features) == feature_before);
  fs::remove_all(dir);
}

TEST_CASE("training log CSV round trip") {
  const fs::path dir = scratch_dir("trainlog");
  fs::create_directories(dir);
  std::vector<EpochLog> logs = {{1, 2.5, 1.25, 3.75, 1e-3 / 3}, {2, 0.1, 0.2, 0.30000000000000004, 1e-3}};
  write_training_log(dir / "log.csv", logs);
  CHECK(file_bytes(dir / "log.csv").rfind("epoch,cm_loss,query_loss,total_loss,lr\n", 0) == 0);
  const std::vector<EpochLog> back = read_training_log(dir / "log.csv");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].epoch == logs[i].epoch);
    CHECK(back[i].cm_loss == logs[i].cm_loss);
    CHECK(back[i].query_loss == logs[i].query_loss);
    CHECK(back[i].total_loss == logs[i].total_loss);
    CHECK(back[i].lr == logs[i].lr);
  }
  fs::remove_all(dir);
}

TEST_CASE("desk training lowers the smoothed loss over the first ten epochs") {
  const fs::path dir = scratch_dir("desk_train");
  const SyntheticDataset ds = make_synthetic(SyntheticConfig{}, dir);
  const SplitData base = load_split({ds.manifest, ds.splits, ds.embeddings}, "base");
  ModelState s = ModelState::fresh(ModelConfig{}, 1);
  TrainConfig c;
  c.epochs = 10;
  const std::vector<EpochLog> logs = train(s, base, c);
  REQUIRE(logs.size() == 10);
  std::vector<double> smooth;
  for (std::size_t e = 1; e + 1 < logs.size(); ++e)
    smooth.push_back((logs[e - 1].total_loss + logs[e].total_loss + logs[e + 1].total_loss) / 3.0);
  for (std::size_t i = 1; i < smooth.size(); ++i) {
    CAPTURE(i);
    CHECK(smooth[i] < smooth[i - 1]);
  }
  fs::remove_all(dir);
}
