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

#include "mlfsc/data.hpp"

#include "mlfsc/error.hpp"

namespace mlfsc {

SplitData load_split(const DataPaths& paths, const std::string& split, EmbedOptions options) {
  const LabelVocabulary vocab = parse_split_file(paths.splits);
  const DatasetManifest full = load_manifest(paths.manifest);
  full.validate(vocab);
  SplitData d;
  d.split = split;
  d.labels = vocab.labels(split);
  d.manifest = full.restricted_to(vocab, split);
  check(d.manifest.size() > 0, "empty-split", "split '" + split + "' has no images");
  d.label_embeddings = embed_labels(parse_embedding_file(paths.embeddings), d.labels, options);
  d.maps.reserve(d.manifest.size());
  for (const ImageRecord& r : d.manifest.records()) {
    d.maps.push_back(load_feature_file(r.features));
    check(d.maps.back().channels() == d.maps.front().channels(), "inconsistent-features",
          "image " + r.id + " has " + std::to_string(d.maps.back().channels()) +
              " channels, expected " + std::to_string(d.maps.front().channels()));
  }
  return d;
}

}  // namespace mlfsc
