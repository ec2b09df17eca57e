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

#include "mlfsc/episodes.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "mlfsc/random.hpp"
#include "json.hpp"

namespace mlfsc {

using json = nlohmann::json;

DatasetManifest::DatasetManifest(std::vector<ImageRecord> records)
    : records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const ImageRecord& r = records_[i];
    check(!r.id.empty(), "invalid-manifest", "record " + std::to_string(i) + " has no id");
    check(!r.labels.empty(), "invalid-manifest", "image " + r.id + " has no labels");
    check(by_id_.emplace(r.id, i).second, "invalid-manifest", "duplicate image id " + r.id);
    std::set<std::string> seen;
    for (const std::string& label : r.labels) {
      check(seen.insert(label).second, "invalid-manifest",
            "image " + r.id + " lists label " + label + " twice");
      by_label_[label].push_back(i);
    }
  }
}

std::size_t DatasetManifest::index_of(const std::string& id) const {
  const auto it = by_id_.find(id);
  check(it != by_id_.end(), "no-such-image", "no image with id " + id);
  return it->second;
}

const std::vector<std::size_t>& DatasetManifest::images_with(const std::string& label) const {
  static const std::vector<std::size_t> kNone;
  const auto it = by_label_.find(label);
  return it == by_label_.end() ? kNone : it->second;
}

DatasetManifest DatasetManifest::restricted_to(const LabelVocabulary& vocab,
                                               const std::string& split) const {
  std::vector<ImageRecord> kept;
  for (const ImageRecord& r : records_) {
    const bool inside = std::all_of(r.labels.begin(), r.labels.end(), [&](const std::string& l) {
      const auto s = vocab.split_of(l);
      return s && *s == split;
    });
    if (inside) kept.push_back(r);
  }
  return DatasetManifest(std::move(kept));
}

void DatasetManifest::validate(const LabelVocabulary& vocab) const {
  for (const ImageRecord& r : records_) {
    for (const std::string& l : r.labels)
      check(vocab.split_of(l).has_value(), "unknown-label",
            "image " + r.id + " carries label '" + l + "' missing from the split file");
    check(std::filesystem::exists(r.features), "missing-features",
          "feature file " + r.features.string() + " for image " + r.id + " does not exist");
  }
}

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  std::vector<ImageRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::string where = "manifest line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("invalid-manifest", where + ": " + e.what());
    }
    check(j.is_object() && j.contains("id") && j["id"].is_string() &&
              j.contains("features") && j["features"].is_string() &&
              j.contains("labels") && j["labels"].is_array(),
          "invalid-manifest", where + ": expected id, features and labels fields");
    ImageRecord r;
    r.id = j["id"].get<std::string>();
    r.features = base_dir / j["features"].get<std::string>();
    for (const json& l : j["labels"]) {
      check(l.is_string(), "invalid-manifest", where + ": labels must be strings");
      r.labels.push_back(l.get<std::string>());
    }
    records.push_back(std::move(r));
  }
  return DatasetManifest(std::move(records));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  check(in.good(), "io-error", "cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path());
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest,
                    const std::string& comment) {
  std::ofstream out(path);
  check(out.good(), "io-error", "cannot write manifest " + path.string());
  if (!comment.empty()) out << "# " << comment << '\n';
  const std::filesystem::path base = path.parent_path();
  for (const ImageRecord& r : manifest.records()) {
    json j;
    j["id"] = r.id;
    j["features"] = r.features.lexically_relative(base).generic_string();
    j["labels"] = r.labels;
    out << j.dump() << '\n';
  }
  check(out.good(), "io-error", "failed writing " + path.string());
}

namespace {

Tensor stack_targets(const std::vector<EpisodeItem>& items, std::size_t labels) {
  check(!items.empty(), "empty-episode", "episode has no images");
  std::vector<double> v;
  v.reserve(items.size() * labels);
  for (const EpisodeItem& item : items) v.insert(v.end(), item.targets.begin(), item.targets.end());
  return Tensor({items.size(), labels}, std::move(v));
}

EpisodeItem make_item(const DatasetManifest& manifest, std::size_t record,
                      const std::vector<std::string>& labels) {
  EpisodeItem item{record, std::vector<double>(labels.size(), 0.0)};
  const auto& carried = manifest[record].labels;
  for (std::size_t c = 0; c < labels.size(); ++c)
    if (std::find(carried.begin(), carried.end(), labels[c]) != carried.end())
      item.targets[c] = 1.0;
  return item;
}

// Draws `count` images carrying the label that are not yet used; marks them.
void draw(const DatasetManifest& manifest, const std::string& label, std::size_t count,
          std::vector<bool>& used, Rng& rng, std::vector<std::size_t>& out) {
  std::vector<std::size_t> candidates;
  for (std::size_t i : manifest.images_with(label))
    if (!used[i]) candidates.push_back(i);
  if (candidates.size() < count) throw InsufficientImages(label, count, candidates.size());
  std::shuffle(candidates.begin(), candidates.end(), rng);
  for (std::size_t n = 0; n < count; ++n) {
    used[candidates[n]] = true;
    out.push_back(candidates[n]);
  }
}

}  // namespace

Tensor Episode::support_targets() const { return stack_targets(support, labels.size()); }
Tensor Episode::query_targets() const { return stack_targets(query, labels.size()); }

InsufficientImages::InsufficientImages(std::string label, std::size_t needed,
                                       std::size_t available)
    : Error("insufficient-images", "label '" + label + "' needs " + std::to_string(needed) +
                                       " unused images, " + std::to_string(available) +
                                       " available"),
      label_(std::move(label)),
      needed_(needed),
      available_(available) {}

Episode sample_episode(const DatasetManifest& manifest, const std::vector<std::string>& labels,
                       std::size_t k_shot, std::uint64_t seed) {
  check(k_shot >= 1, "invalid-config", "k_shot must be at least 1");
  check(!labels.empty(), "invalid-argument", "episode needs at least one label");
  Rng rng(derive_seed(seed, "sampler"));
  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> used(manifest.size(), false);
  std::vector<std::size_t> support, query;
  for (std::size_t c : order) draw(manifest, labels[c], k_shot, used, rng, support);
  for (std::size_t c : order) draw(manifest, labels[c], kQueryPerLabel, used, rng, query);

  Episode e;
  e.labels = labels;
  e.k_shot = k_shot;
  for (std::size_t r : support) e.support.push_back(make_item(manifest, r, labels));
  for (std::size_t r : query) e.query.push_back(make_item(manifest, r, labels));
  return e;
}

Episode sample_episode_with_retry(const DatasetManifest& manifest,
                                  const std::vector<std::string>& labels, std::size_t k_shot,
                                  std::uint64_t seed) {
  for (const std::string& label : labels)
    if (manifest.images_with(label).empty())
      throw InsufficientImages(label, k_shot + kQueryPerLabel, 0);
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      return sample_episode(manifest, labels, k_shot,
                            attempt == 0 ? seed : derive_seed(seed, attempt));
    } catch (const InsufficientImages&) {
      if (attempt + 1 >= kSamplerRetryCap) throw;
    }
  }
}

std::vector<std::string> validate_episode(const Episode& episode,
                                          const DatasetManifest& manifest) {
  std::vector<std::string> v;
  const std::size_t c = episode.labels.size();
  if (episode.support.size() != episode.k_shot * c)
    v.push_back("support-size: expected " + std::to_string(episode.k_shot * c) + ", got " +
                std::to_string(episode.support.size()));
  if (episode.query.size() != kQueryPerLabel * c)
    v.push_back("query-size: expected " + std::to_string(kQueryPerLabel * c) + ", got " +
                std::to_string(episode.query.size()));

  const auto check_set = [&](const std::vector<EpisodeItem>& items, const char* name,
                             std::size_t needed) {
    std::set<std::size_t> seen;
    std::vector<std::size_t> counts(c, 0);
    for (const EpisodeItem& item : items) {
      if (!seen.insert(item.record).second)
        v.push_back(std::string("distinctness: ") + name + " repeats image " +
                    manifest[item.record].id);
      const EpisodeItem truth = make_item(manifest, item.record, episode.labels);
      if (truth.targets != item.targets)
        v.push_back(std::string("targets: ") + name + " image " + manifest[item.record].id +
                    " has wrong multi-hot targets");
      for (std::size_t l = 0; l < c; ++l) counts[l] += truth.targets[l] > 0.5 ? 1 : 0;
    }
    for (std::size_t l = 0; l < c; ++l)
      if (counts[l] < needed)
        v.push_back(std::string("coverage: ") + name + " has " + std::to_string(counts[l]) +
                    " images with label " + episode.labels[l] + ", needs " +
                    std::to_string(needed));
    return seen;
  };
  const std::set<std::size_t> support = check_set(episode.support, "support", episode.k_shot);
  const std::set<std::size_t> query = check_set(episode.query, "query", kQueryPerLabel);
  for (std::size_t r : query)
    if (support.count(r))
      v.push_back("disjointness: image " + manifest[r].id + " is in support and query");
  return v;
}

}  // namespace mlfsc
