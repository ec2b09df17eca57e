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

// Desk-scale stand-in for a multi-label image corpus. Every label owns a
// unit signature direction in feature space and a word vector; both are
// linear images of one latent code, so the text-to-visual relation learned
// on base labels carries over to novel ones.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mlfsc/tensor.hpp"

namespace mlfsc {

struct SyntheticConfig {
  std::size_t base_labels = 8;
  std::size_t val_labels = 0;
  std::size_t novel_labels = 4;
  std::size_t images_per_label = 40;
  std::size_t height = 6;
  std::size_t width = 6;
  std::size_t channels = 32;
  std::size_t embedding_dim = 24;
  std::size_t latent_dim = 8;
  double signal_fraction = 0.5;   // share of cells carrying a label signature
  double signal_amplitude = 1.5;
  double noise_std = 0.1;         // per-channel Gaussian noise on every cell
  double embedding_noise = 0.0;   // per-component noise on the word vectors
  double second_label_probability = 1.0;
  bool isometric = true;  // orthonormal latent-to-feature and latent-to-word maps
  std::uint64_t seed = 7;

  void validate() const;
};

/// Cells (row-major indices) holding each of an image's label signatures.
struct PlantedImage {
  std::string id;
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> cells;  // parallel to labels
};

struct SyntheticDataset {
  std::filesystem::path manifest;
  std::filesystem::path embeddings;
  std::filesystem::path splits;
  std::filesystem::path planted;
  std::vector<std::string> labels;  // base, then val, then novel
  Tensor signatures;                // [labels, channels], unit rows
  std::vector<PlantedImage> images;
};

/// Writes features/*.fmap, manifest.jsonl, embeddings.txt, splits.tsv and
/// planted.jsonl under dir. Output bytes depend only on the config.
SyntheticDataset make_synthetic(const SyntheticConfig& config, const std::filesystem::path& dir);

std::string describe(const SyntheticConfig& config);

std::vector<PlantedImage> load_planted_cells(const std::filesystem::path& path);

}  // namespace mlfsc
