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

// Loads one split of a dataset (manifest restricted to the split, feature
// maps in memory, label embeddings in split order).
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mlfsc/embeddings.hpp"
#include "mlfsc/episodes.hpp"
#include "mlfsc/features.hpp"

namespace mlfsc {

struct DataPaths {
  std::filesystem::path manifest;
  std::filesystem::path splits;
  std::filesystem::path embeddings;
};

struct SplitData {
  std::string split;
  DatasetManifest manifest;           // only records of this split
  std::vector<LocalFeatureMap> maps;  // parallel to manifest records
  std::vector<std::string> labels;
  Tensor label_embeddings;            // [labels, d_w]

  std::size_t channels() const { return maps.front().channels(); }
  std::size_t embedding_dim() const { return label_embeddings.dim(1); }
};

/// Error("unknown-split"), ("empty-split") or ("inconsistent-features") when
/// maps disagree in their channel count.
SplitData load_split(const DataPaths& paths, const std::string& split,
                     EmbedOptions options = {});

}  // namespace mlfsc
