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

// Dataset manifests and the multi-label episode sampler: for each label of
// the episode, K support images carrying it are drawn without repetition,
// then four query images per label, disjoint from the support set.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "mlfsc/embeddings.hpp"
#include "mlfsc/error.hpp"
#include "mlfsc/tensor.hpp"

namespace mlfsc {

inline constexpr std::size_t kQueryPerLabel = 4;
inline constexpr std::size_t kSamplerRetryCap = 20;

struct ImageRecord {
  std::string id;
  std::filesystem::path features;  // resolved against the manifest directory
  std::vector<std::string> labels;
};

class DatasetManifest {
 public:
  DatasetManifest() = default;
  explicit DatasetManifest(std::vector<ImageRecord> records);

  const std::vector<ImageRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  const ImageRecord& operator[](std::size_t i) const { return records_[i]; }
  /// Error("no-such-image") for an unknown id.
  std::size_t index_of(const std::string& id) const;
  /// Indices of records carrying the label, in manifest order.
  const std::vector<std::size_t>& images_with(const std::string& label) const;

  /// Keeps the records whose labels all lie in the given split and that carry
  /// at least one of them.
  DatasetManifest restricted_to(const LabelVocabulary& vocab,
                                const std::string& split) const;

  /// Every label must be in the vocabulary and every feature file must exist.
  void validate(const LabelVocabulary& vocab) const;

 private:
  std::vector<ImageRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_label_;
};

/// JSON lines with fields id, features, labels; blank lines and lines
/// starting with '#' are skipped. Feature paths are relative to base_dir.
DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir);
DatasetManifest load_manifest(const std::filesystem::path& path);
/// Writes paths relative to the manifest's directory.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest,
                    const std::string& comment = {});

struct EpisodeItem {
  std::size_t record = 0;
  std::vector<double> targets;  // multi-hot over the episode labels
};

struct Episode {
  std::vector<std::string> labels;
  std::size_t k_shot = 1;
  std::vector<EpisodeItem> support;
  std::vector<EpisodeItem> query;

  Tensor support_targets() const;  // [S, C]
  Tensor query_targets() const;    // [Q, C]
};

/// Raised when a label runs out of unused images carrying it.
class InsufficientImages : public Error {
 public:
  InsufficientImages(std::string label, std::size_t needed, std::size_t available);
  const std::string& label() const noexcept { return label_; }
  std::size_t needed() const noexcept { return needed_; }
  std::size_t available() const noexcept { return available_; }

 private:
  std::string label_;
  std::size_t needed_;
  std::size_t available_;
};

Episode sample_episode(const DatasetManifest& manifest,
                       const std::vector<std::string>& labels, std::size_t k_shot,
                       std::uint64_t seed);

/// Resamples with derived seeds after an InsufficientImages failure, up to
/// kSamplerRetryCap attempts. A label with no images at all fails at once.
Episode sample_episode_with_retry(const DatasetManifest& manifest,
                                  const std::vector<std::string>& labels,
                                  std::size_t k_shot, std::uint64_t seed);

/// Violations of the episode invariants, each prefixed by its category
/// ("support-size", "query-size", "coverage", "distinctness", "disjointness").
std::vector<std::string> validate_episode(const Episode& episode,
                                          const DatasetManifest& manifest);

}  // namespace mlfsc
