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

#include "mlfsc/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mlfsc/error.hpp"

namespace mlfsc {

void TrainConfig::validate() const {
  check(gamma >= 0.0, "invalid-config", "gamma must be non-negative");
  check(learning_rate > 0.0, "invalid-config", "learning rate must be positive");
  check(warmup_epochs == 0 || warmup_epochs < epochs, "invalid-config",
        "warm-up epochs must be fewer than the total epochs");
  check(k_shot >= 1, "invalid-config", "k_shot must be at least 1");
  check(episodes_per_epoch >= 1, "invalid-config", "episodes_per_epoch must be at least 1");
  check(prototypes != PrototypeMode::kZeroShot, "invalid-config",
        "zero-shot prototypes have nothing to train beyond the joint space");
}

ModelState ModelState::fresh(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "init"));
  ModelState s;
  s.config = config;
  s.params = ModelParams::init(config, rng);
  return s;
}

double learning_rate_at(const TrainConfig& config, std::size_t epoch) {
  if (epoch < config.warmup_epochs)
    return config.learning_rate * static_cast<double>(epoch + 1) /
           static_cast<double>(config.warmup_epochs);
  return config.learning_rate;
}

std::uint64_t train_episode_seed(std::uint64_t seed, std::size_t epoch, std::size_t index) {
  return derive_seed(derive_seed(derive_seed(seed, "train"), epoch), index);
}

std::vector<EpochLog> train(ModelState& state, const SplitData& data, const TrainConfig& config,
                            const EpochCallback& on_epoch) {
  config.validate();
  state.config.validate();
  check(data.channels() == state.config.channels &&
            data.embedding_dim() == state.config.embedding_dim,
        "shape-mismatch", "dataset dimensions do not match the model configuration");
  std::vector<EpochLog> logs;
  for (std::size_t epoch = state.epoch; epoch < config.epochs; ++epoch) {
    const double lr = learning_rate_at(config, epoch);
    EpochLog log{epoch + 1, 0.0, 0.0, 0.0, lr};
    for (std::size_t i = 0; i < config.episodes_per_epoch; ++i) {
      const std::uint64_t seed = train_episode_seed(config.seed, epoch, i);
      const Episode episode =
          sample_episode_with_retry(data.manifest, data.labels, config.k_shot, seed);
      const EpisodeData inputs = make_episode_data(episode, data.maps, data.label_embeddings);

      const std::string where =
          "epoch " + std::to_string(epoch + 1) + ", episode seed " + std::to_string(seed);
      state.params.visit([&](const std::string& name, Tensor& param) {
        check(param.all_finite(), "numeric-failure",
              "parameter " + name + " is non-finite at " + where);
      });

      ad::Tape tape;
      const ModelVars vars = bind(tape, state.params, true);
      ForwardOptions options;
      options.prototypes = config.prototypes;
      options.train = true;
      options.dropout_seed = derive_seed(seed, "dropout");
      const EpisodeOutput out = forward_episode(tape, vars, inputs, options);
      const ad::Var total = total_loss(out.cm_loss, out.query_loss, config.gamma);
      const double value = total.value().item();
      check(std::isfinite(value), "numeric-failure", "non-finite loss at " + where);

      const ad::Gradients grads = tape.backward(total);
      const std::vector<ad::Var> leaves = parameter_leaves(vars);
      ++state.step;
      std::size_t k = 0;
      state.params.visit([&](const std::string& name, Tensor& param) {
        param = adam_step(param, grads[leaves.at(k++)], state.moments[name], lr, state.step);
        check(param.all_finite(), "numeric-failure",
              "parameter " + name + " became non-finite at " + where);
      });
      check(k == leaves.size(), "internal", "parameter walk out of sync with bound variables");

      log.cm_loss += out.cm_loss.value().item();
      log.query_loss += out.query_loss.value().item();
      log.total_loss += value;
    }
    const double n = static_cast<double>(config.episodes_per_epoch);
    log.cm_loss /= n;
    log.query_loss /= n;
    log.total_loss /= n;
    state.epoch = epoch + 1;
    logs.push_back(log);
    if (on_epoch) on_epoch(log, state);
  }
  return logs;
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& logs) {
  std::ofstream out(path);
  check(out.good(), "io-error", "cannot write " + path.string());
  out << "epoch,cm_loss,query_loss,total_loss,lr\n";
  char buf[160];
  for (const EpochLog& l : logs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", l.epoch, l.cm_loss,
                  l.query_loss, l.total_loss, l.lr);
    out << buf;
  }
  check(out.good(), "io-error", "failed writing " + path.string());
}

std::vector<EpochLog> read_training_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  check(in.good(), "io-error", "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  check(line == "epoch,cm_loss,query_loss,total_loss,lr", "invalid-log",
        path.string() + " does not start with the training-log header");
  std::vector<EpochLog> logs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochLog l;
    char comma = 0;
    std::istringstream row(line);
    row >> l.epoch >> comma >> l.cm_loss >> comma >> l.query_loss >> comma >> l.total_loss >>
        comma >> l.lr;
    check(!row.fail(), "invalid-log", "malformed row '" + line + "' in " + path.string());
    logs.push_back(l);
  }
  return logs;
}

}  // namespace mlfsc
