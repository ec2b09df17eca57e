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

#include "mlfsc/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <type_traits>
#include <fstream>
#include <sstream>
#include <variant>

#include "mlfsc/error.hpp"

namespace mlfsc {
namespace {

// size_t and uint64_t may be the same type, so seeds get a wrapper.
struct SeedSlot {
  std::uint64_t* value;
};

using Slot = std::variant<std::size_t*, SeedSlot, double*, std::string*, std::filesystem::path*>;

struct Field {
  const char* key;
  Slot slot;
};

// The single source of truth for key names and their order in to_text().
std::vector<Field> fields(RunConfig& c) {
  return {
      {"d_j", &c.d_j},
      {"n_heads", &c.n_heads},
      {"d_c", &c.d_c},
      {"n_d", &c.n_d},
      {"lambda", &c.lambda},
      {"gamma", &c.gamma},
      {"theta", &c.theta},
      {"lr", &c.lr},
      {"lcm_lr", &c.lcm_lr},
      {"epochs", &c.epochs},
      {"warmup_epochs", &c.warmup_epochs},
      {"lcm_epochs", &c.lcm_epochs},
      {"episodes_per_epoch", &c.episodes_per_epoch},
      {"eval_episodes", &c.eval_episodes},
      {"k_shot", &c.k_shot},
      {"seed", SeedSlot{&c.seed}},
      {"dropout", &c.dropout},
      {"threads", &c.threads},
      {"prototype", &c.prototype},
      {"dataset_seed", SeedSlot{&c.dataset_seed}},
      {"manifest", &c.manifest},
      {"embeddings", &c.embeddings},
      {"splits", &c.splits},
      {"checkpoint", &c.checkpoint},
      {"output", &c.output},
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  check(ec == std::errc() && ptr == end && !text.empty(), "invalid-config",
        "cannot parse '" + text + "' as a value for " + key);
  return value;
}

template <typename T>
std::string format_number(T value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    RunConfig c;
    std::vector<std::string> out;
    for (const Field& f : fields(c)) out.emplace_back(f.key);
    return out;
  }();
  return names;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const Field& f : fields(*this)) {
    if (key != f.key) continue;
    std::visit(
        [&](auto slot) {
          if constexpr (std::is_same_v<decltype(slot), SeedSlot>) {
            *slot.value = parse_number<std::uint64_t>(key, value);
          } else {
            using T = std::remove_pointer_t<decltype(slot)>;
            if constexpr (std::is_same_v<T, std::string>) *slot = value;
            else if constexpr (std::is_same_v<T, std::filesystem::path>) *slot = value;
            else *slot = parse_number<T>(key, value);
          }
        },
        f.slot);
    return;
  }
  throw Error("invalid-config", "unknown key '" + key + "'");
}

void RunConfig::merge_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    check(eq != std::string::npos, "invalid-config",
          "line " + std::to_string(number) + ": expected 'key = value'");
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error("invalid-config", "line " + std::to_string(number) + ": " + e.what());
    }
  }
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  c.merge_text(text);
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  check(static_cast<bool>(in), "invalid-config", "cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

std::string RunConfig::to_text() const {
  RunConfig copy = *this;
  std::string out;
  for (const Field& f : fields(copy)) {
    out += f.key;
    out += " = ";
    std::visit(
        [&](auto slot) {
          if constexpr (std::is_same_v<decltype(slot), SeedSlot>) {
            out += format_number(*slot.value);
          } else {
            using T = std::remove_pointer_t<decltype(slot)>;
            if constexpr (std::is_same_v<T, std::string>) out += *slot;
            else if constexpr (std::is_same_v<T, std::filesystem::path>) out += slot->string();
            else out += format_number(*slot);
          }
        },
        f.slot);
    out += '\n';
  }
  return out;
}

void RunConfig::validate() const {
  check(n_heads > 0 && d_j % n_heads == 0, "invalid-config",
        "n_heads (" + std::to_string(n_heads) + ") must divide d_j (" + std::to_string(d_j) +
            ")");
  check(theta >= 0.5 && theta < 1.0, "invalid-config", "theta must lie in [0.5, 1)");
  check(k_shot >= 1, "invalid-config", "k_shot must be at least 1");
  check(eval_episodes >= 1, "invalid-config", "eval_episodes must be at least 1");
  check(threads >= 1, "invalid-config", "threads must be at least 1");
  check(lcm_lr > 0.0, "invalid-config", "lcm_lr must be positive");
  check(lcm_epochs >= 1, "invalid-config", "lcm_epochs must be at least 1");
  try {
    parse_prototype_mode(prototype);
  } catch (const Error&) {
    throw Error("invalid-config", "unknown prototype mode '" + prototype + "'");
  }
  model_config(1, 1).validate();
  train_config().validate();
  eval_config(EvalMode::kLcm).lcm.validate();
}

ModelConfig RunConfig::model_config(std::size_t channels, std::size_t embedding_dim) const {
  ModelConfig m;
  m.channels = channels;
  m.embedding_dim = embedding_dim;
  m.joint_dim = d_j;
  m.heads = n_heads;
  m.inner_dim = d_c;
  m.top_features = n_d;
  m.lambda = lambda;
  m.dropout = dropout;
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.gamma = gamma;
  t.learning_rate = lr;
  t.epochs = epochs;
  t.warmup_epochs = warmup_epochs;
  t.k_shot = k_shot;
  t.episodes_per_epoch = episodes_per_epoch;
  t.seed = seed;
  t.prototypes = parse_prototype_mode(prototype);
  return t;
}

EvalConfig RunConfig::eval_config(EvalMode mode) const {
  EvalConfig e;
  e.mode = mode;
  e.episodes = eval_episodes;
  e.k_shot = k_shot;
  e.seed = seed;
  e.threads = threads;
  e.lcm.theta = theta;
  e.lcm.epochs = lcm_epochs;
  e.lcm.learning_rate = lcm_lr;
  return e;
}

DataPaths RunConfig::data_paths() const { return DataPaths{manifest, splits, embeddings}; }

std::string run_id(const RunConfig& config, const std::string& context) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  feed(config.to_text());
  feed("\n");
  feed(context);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 12);
}

}  // namespace mlfsc
