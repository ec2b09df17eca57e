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

// mlfsc: dataset synthesis, training, evaluation, LCM inspection and the
// gradient-check suite behind one binary.
//
// Every subcommand reads an optional --config file of `key = value` lines and
// then applies --<key> flags on top. Outputs land under the configured output
// directory together with run_manifest.json.
//
// Exit status: 0 success, 1 usage or config error, 2 data error, 3 numeric
// failure (non-finite values or a failing gradient check).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlfsc/checkpoint.hpp"
#include "mlfsc/data.hpp"
#include "mlfsc/error.hpp"
#include "mlfsc/evaluate.hpp"
#include "mlfsc/gradcheck_suite.hpp"
#include "mlfsc/lcm.hpp"
#include "mlfsc/logging.hpp"
#include "mlfsc/run_config.hpp"
#include "mlfsc/synthetic.hpp"
#include "mlfsc/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mlfsc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

int exit_code_for(const std::string& code) {
  if (code == "invalid-config" || code == "invalid-argument" || code == "invalid-theta")
    return kExitUsage;
  if (code == "numeric-failure" || code == "non-finite" || code == "degenerate-vector" ||
      code == "domain")
    return kExitNumeric;
  return kExitData;
}

struct Options {
  std::string config_file;
  std::map<std::string, std::string> overrides;
  bool quiet = false;
};

void add_config_options(CLI::App* cmd, Options& opts) {
  cmd->add_option("--config", opts.config_file, "key = value config file");
  cmd->add_flag("-q,--quiet", opts.quiet, "suppress warnings and progress");
  for (const std::string& key : RunConfig::keys())
    cmd->add_option("--" + key, opts.overrides[key], "override config key " + key)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

RunConfig effective_config(const Options& opts) {
  RunConfig c = opts.config_file.empty() ? RunConfig{} : RunConfig::load(opts.config_file);
  for (const auto& [key, value] : opts.overrides)
    if (!value.empty()) c.set(key, value);
  c.validate();
  return c;
}

json config_json(const RunConfig& c) {
  json j = json::object();
  const std::string text = c.to_text();
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    const std::string line = text.substr(start, end - start);
    const std::size_t eq = line.find(" = ");
    j[line.substr(0, eq)] = line.substr(eq + 3);
    start = end + 1;
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  check(out.good(), "io-error", "cannot write " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  check(!ec && fs::is_directory(dir), "io-error", "cannot create directory " + dir.string());
}

void write_run_manifest(const RunConfig& c, const std::string& command,
                        const std::string& id, const std::vector<fs::path>& outputs) {
  json j;
  j["command"] = command;
  j["run_id"] = id;
  j["config"] = config_json(c);
  json files = json::array();
  for (const fs::path& p : outputs) files.push_back(p.string());
  j["outputs"] = files;
  write_text(c.output / "run_manifest.json", j.dump(2) + "\n");
}

int cmd_synth(const RunConfig& c) {
  SyntheticConfig sc;
  sc.seed = c.dataset_seed;
  const fs::path dir = c.manifest.parent_path().empty() ? fs::path(".") : c.manifest.parent_path();
  ensure_dir(dir);
  const SyntheticDataset ds = make_synthetic(sc, dir);
  if (ds.manifest != c.manifest || ds.embeddings != c.embeddings || ds.splits != c.splits)
    log_warning("dataset written to " + dir.string() +
                " with fixed file names; point manifest, embeddings and splits at them");
  std::printf("%s\n", describe(sc).c_str());
  std::printf("labels %zu, images %zu\nmanifest %s\nembeddings %s\nsplits %s\nplanted %s\n",
              ds.labels.size(), ds.images.size(), ds.manifest.string().c_str(),
              ds.embeddings.string().c_str(), ds.splits.string().c_str(),
              ds.planted.string().c_str());
  ensure_dir(c.output);
  write_run_manifest(c, "synth", run_id(c, "synth"),
                     {ds.manifest, ds.embeddings, ds.splits, ds.planted});
  return kExitOk;
}

ModelState resume_or_fresh(const RunConfig& c, const SplitData& data, bool resume) {
  const ModelConfig want = c.model_config(data.channels(), data.embedding_dim());
  if (!resume || !fs::exists(c.checkpoint)) return ModelState::fresh(want, c.seed);
  ModelState s = load_checkpoint(c.checkpoint).state;
  const ModelConfig& got = s.config;
  check(got.channels == want.channels && got.embedding_dim == want.embedding_dim &&
            got.joint_dim == want.joint_dim && got.heads == want.heads &&
            got.inner_dim == want.inner_dim && got.top_features == want.top_features,
        "invalid-config", "checkpoint " + c.checkpoint.string() +
                              " was trained with different model dimensions");
  return s;
}

int cmd_train(const RunConfig& c, bool resume) {
  const TrainConfig tc = c.train_config();
  const SplitData base = load_split(c.data_paths(), "base");
  ModelState state = resume_or_fresh(c, base, resume);
  ensure_dir(c.output);
  if (!c.checkpoint.parent_path().empty()) ensure_dir(c.checkpoint.parent_path());
  const fs::path log_path = c.output / "train_log.csv";

  std::vector<EpochLog> logs;
  if (state.epoch > 0 && fs::exists(log_path)) {
    logs = read_training_log(log_path);
    std::erase_if(logs, [&](const EpochLog& l) { return l.epoch > state.epoch; });
  }
  const std::string config_text = c.to_text();
  train(state, base, tc, [&](const EpochLog& l, const ModelState& s) {
    logs.push_back(l);
    save_checkpoint(c.checkpoint, s, config_text);
    write_training_log(log_path, logs);
    log_info("epoch " + std::to_string(l.epoch) + " cm " + std::to_string(l.cm_loss) +
             " query " + std::to_string(l.query_loss) + " total " +
             std::to_string(l.total_loss));
  });
  if (state.epoch == 0 || !fs::exists(c.checkpoint)) save_checkpoint(c.checkpoint, state, config_text);
  write_training_log(log_path, logs);
  std::printf("trained to epoch %zu (%zu steps)\ncheckpoint %s\nlog %s\n", state.epoch,
              state.step, c.checkpoint.string().c_str(), log_path.string().c_str());
  write_run_manifest(c, "train", run_id(c, "train"), {c.checkpoint, log_path});
  return kExitOk;
}

void write_episode_csv(const fs::path& path, const std::vector<EpisodeMetrics>& episodes) {
  std::string text = "episode,mi_ap,ma_ap,mi_f1,ma_f1\n";
  char line[160];
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const EpisodeMetrics& m = episodes[i];
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g\n", i, m.mi_ap, m.ma_ap,
                  m.mi_f1, m.ma_f1);
    text += line;
  }
  write_text(path, text);
}

int cmd_eval(const RunConfig& c, const std::string& mode_name, const std::string& split) {
  const EvalMode mode = parse_eval_mode(mode_name);
  const Checkpoint ckpt = load_checkpoint(c.checkpoint);
  const SplitData data = load_split(c.data_paths(), split);
  const EvalResult result = evaluate(ckpt.state.params, data, c.eval_config(mode));

  const std::string id = run_id(c, "eval " + mode_name + " " + split);
  json report;
  report["run_id"] = id;
  report["mode"] = mode_name;
  report["split"] = split;
  report["metrics"] = to_json(result.report);
  report["config"] = config_json(c);
  const std::string text = report.dump(2) + "\n";
  ensure_dir(c.output);
  const fs::path report_path = c.output / "report.json";
  const fs::path csv_path = c.output / "episodes.csv";
  write_text(report_path, text);
  write_episode_csv(csv_path, result.episodes);
  std::fwrite(text.data(), 1, text.size(), stdout);
  write_run_manifest(c, "eval", id, {report_path, csv_path});
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& c, bool inject_fault) {
  GradCheckSuiteConfig gc;
  gc.inject_fault = inject_fault;
  const std::vector<GradCheckRow> rows = run_gradcheck_suite(gc);
  const std::string table = format_gradcheck_table(rows);
  std::fwrite(table.data(), 1, table.size(), stdout);
  ensure_dir(c.output);
  const fs::path path = c.output / "gradcheck.txt";
  write_text(path, table);
  write_run_manifest(c, "gradcheck", run_id(c, inject_fault ? "gradcheck fault" : "gradcheck"),
                     {path});
  return all_passed(rows) ? kExitOk : kExitNumeric;
}

int cmd_inspect_lcm(const RunConfig& c, const std::string& image) {
  const DatasetManifest full = load_manifest(c.manifest);
  const ImageRecord& record = full[full.index_of(image)];
  const LabelVocabulary vocab = parse_split_file(c.splits);
  const std::optional<std::string> split = vocab.split_of(record.labels.front());
  check(split.has_value(), "unknown-label", "image " + image + " has a label in no split");
  const Checkpoint ckpt = load_checkpoint(c.checkpoint);
  const SplitData data = load_split(c.data_paths(), *split);
  const LocalFeatureMap& map = data.maps[data.manifest.index_of(image)];

  std::vector<double> targets(data.labels.size(), 0.0);
  for (std::size_t l = 0; l < data.labels.size(); ++l)
    targets[l] = std::count(record.labels.begin(), record.labels.end(), data.labels[l]) ? 1.0 : 0.0;
  const LcmConfig lcm = c.eval_config(EvalMode::kLcm).lcm;
  const ImportanceObjective objective(ckpt.state.params.joint, map, data.label_embeddings,
                                      Tensor::vector(targets));
  const ImportanceMap state = fit_importance(objective, lcm);
  const SelectionMask mask = select_features(state, lcm.theta);

  ensure_dir(c.output);
  const fs::path scores_path = c.output / ("lcm_" + image + "_importance.txt");
  const fs::path mask_path = c.output / ("lcm_" + image + "_mask.txt");
  write_importance_text(scores_path, state);
  write_mask_text(mask_path, mask);
  std::printf("image %s (split %s), grid %zux%zu, theta %g: kept %zu of %zu cells\n",
              image.c_str(), split->c_str(), map.height(), map.width(), lcm.theta, mask.kept(),
              map.cells());
  if (!mask.any())
    std::printf("no cell reaches theta; evaluation falls back to keeping every cell\n");
  std::printf("importance %s\nmask %s\n", scores_path.string().c_str(),
              mask_path.string().c_str());
  write_run_manifest(c, "inspect-lcm", run_id(c, "inspect-lcm " + image),
                     {scores_path, mask_path});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-label few-shot image classification toolkit"};
  app.require_subcommand(1);

  Options synth_opts, train_opts, eval_opts, grad_opts, lcm_opts;
  CLI::App* synth = app.add_subcommand("synth", "write a synthetic dataset");
  add_config_options(synth, synth_opts);

  CLI::App* train_cmd = app.add_subcommand("train", "episodic training on the base split");
  add_config_options(train_cmd, train_opts);
  bool resume = false;
  train_cmd->add_flag("--resume", resume, "continue from the configured checkpoint if present");

  CLI::App* eval_cmd = app.add_subcommand("eval", "score test episodes");
  add_config_options(eval_cmd, eval_opts);
  std::string mode = "base";
  std::string split = "novel";
  eval_cmd->add_option("--mode", mode, "base, lcm, zeroshot or simple-attention")
      ->check(CLI::IsMember({"base", "lcm", "zeroshot", "simple-attention"}));
  eval_cmd->add_option("--split", split, "split to sample episodes from");

  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "run the gradient-check suite");
  add_config_options(grad_cmd, grad_opts);
  bool inject_fault = false;
  grad_cmd->add_flag("--inject-fault", inject_fault, "add a row with a corrupted backward rule");

  CLI::App* lcm_cmd = app.add_subcommand("inspect-lcm", "write one image's importance map");
  add_config_options(lcm_cmd, lcm_opts);
  std::string image;
  lcm_cmd->add_option("--image", image, "image id from the manifest")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? kExitOk : kExitUsage;
  }

  const auto run = [&](const Options& opts, auto&& body) -> int {
    try {
      const RunConfig c = effective_config(opts);
      set_log_level(opts.quiet ? LogLevel::kQuiet : LogLevel::kInfo);
      return body(c);
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return exit_code_for(e.code());
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitData;
    }
  };

  if (synth->parsed()) return run(synth_opts, [](const RunConfig& c) { return cmd_synth(c); });
  if (train_cmd->parsed())
    return run(train_opts, [&](const RunConfig& c) { return cmd_train(c, resume); });
  if (eval_cmd->parsed())
    return run(eval_opts, [&](const RunConfig& c) { return cmd_eval(c, mode, split); });
  if (grad_cmd->parsed())
    return run(grad_opts, [&](const RunConfig& c) { return cmd_gradcheck(c, inject_fault); });
  return run(lcm_opts, [&](const RunConfig& c) { return cmd_inspect_lcm(c, image); });
}
