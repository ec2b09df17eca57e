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

// Small on-disk synthetic datasets shared by the training-level tests.
#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "mlfsc/data.hpp"
#include "mlfsc/model.hpp"
#include "mlfsc/synthetic.hpp"

namespace mlfsc::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path p = std::filesystem::temp_directory_path() / ("mlfsc_" + name);
  std::filesystem::remove_all(p);
  return p;
}

inline std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline SyntheticConfig small_synthetic() {
  SyntheticConfig c;
  c.base_labels = 4;
  c.novel_labels = 3;
  c.images_per_label = 10;
  c.height = 3;
  c.width = 3;
  c.channels = 8;
  c.embedding_dim = 6;
  c.latent_dim = 4;
  return c;
}

inline ModelConfig small_model() {
  ModelConfig m;
  m.channels = 8;
  m.embedding_dim = 6;
  m.joint_dim = 8;
  m.heads = 2;
  m.inner_dim = 4;
  m.top_features = 3;
  return m;
}

struct SmallData {
  SyntheticDataset dataset;
  DataPaths paths;
  SplitData base;
  SplitData novel;
};

inline SmallData small_data(const std::filesystem::path& dir,
                            const SyntheticConfig& config = small_synthetic()) {
  SmallData d;
  d.dataset = make_synthetic(config, dir);
  d.paths = {d.dataset.manifest, d.dataset.splits, d.dataset.embeddings};
  d.base = load_split(d.paths, "base");
  d.novel = load_split(d.paths, "novel");
  return d;
}

}  // namespace mlfsc::testing
