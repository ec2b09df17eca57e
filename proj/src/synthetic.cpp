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

#include "mlfsc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"
#include "mlfsc/embeddings.hpp"
#include "mlfsc/episodes.hpp"
#include "mlfsc/error.hpp"
#include "mlfsc/features.hpp"
#include "mlfsc/random.hpp"

namespace mlfsc {

using json = nlohmann::json;

void SyntheticConfig::validate() const {
  check(base_labels + val_labels + novel_labels > 0, "invalid-config", "no labels requested");
  check(images_per_label > 0 && height > 0 && width > 0 && channels > 0 && embedding_dim > 0 &&
            latent_dim > 0,
        "invalid-config", "synthetic dataset sizes must be positive");
  check(signal_fraction > 0.0 && signal_fraction <= 1.0, "invalid-config",
        "signal fraction must lie in (0, 1]");
  check(height * width >= 2, "invalid-config", "grids need at least two cells");
  check(noise_std >= 0.0 && embedding_noise >= 0.0 && signal_amplitude > 0.0, "invalid-config",
        "noise levels must be non-negative and the amplitude positive");
  check(!isometric || (latent_dim <= channels && latent_dim <= embedding_dim), "invalid-config",
        "isometric views need latent_dim <= channels and <= embedding_dim");
  check(second_label_probability >= 0.0 && second_label_probability <= 1.0, "invalid-config",
        "second-label probability must lie in [0, 1]");
}

namespace {

// Gram-Schmidt on the columns of a row-major [rows, cols] matrix.
void orthonormalize_columns(std::vector<double>& m, std::size_t rows, std::size_t cols) {
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t p = 0; p < j; ++p) {
      double dot = 0.0;
      for (std::size_t i = 0; i < rows; ++i) dot += m[i * cols + j] * m[i * cols + p];
      for (std::size_t i = 0; i < rows; ++i) m[i * cols + j] -= dot * m[i * cols + p];
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < rows; ++i) norm += m[i * cols + j] * m[i * cols + j];
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < rows; ++i) m[i * cols + j] /= norm;
  }
}

}  // namespace

std::string describe(const SyntheticConfig& c) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "synthetic dataset seed=%llu labels=%zu/%zu/%zu images_per_label=%zu grid=%zux%zu "
                "channels=%zu d_w=%zu latent=%zu signal=%.17g amplitude=%.17g noise=%.17g "
                "isometric=%d embedding_noise=%.17g second_label=%.17g",
                static_cast<unsigned long long>(c.seed), c.base_labels, c.val_labels,
                c.novel_labels, c.images_per_label, c.height, c.width, c.channels,
                c.embedding_dim, c.latent_dim, c.signal_fraction, c.signal_amplitude,
                c.noise_std, c.isometric ? 1 : 0, c.embedding_noise, c.second_label_probability);
  return buf;
}

namespace {

struct SplitSpec {
  const char* name;
  std::size_t count;
};

std::string label_name(const char* split, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%02zu", split, i);
  return buf;
}

}  // namespace

SyntheticDataset make_synthetic(const SyntheticConfig& config, const std::filesystem::path& dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir / "features", ec);
  check(!ec, "io-error", "cannot create " + (dir / "features").string() + ": " + ec.message());

  Rng rng(derive_seed(config.seed, "synthetic"));
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = config.channels, dw = config.embedding_dim, dz = config.latent_dim;
  std::vector<double> to_visual(n * dz), to_text(dw * dz);
  for (double& v : to_visual) v = normal(rng);
  for (double& v : to_text) v = normal(rng);
  if (config.isometric) {
    orthonormalize_columns(to_visual, n, dz);
    orthonormalize_columns(to_text, dw, dz);
  }

  const SplitSpec splits[] = {{"base", config.base_labels},
                              {"val", config.val_labels},
                              {"novel", config.novel_labels}};
  SyntheticDataset out;
  LabelVocabulary vocab;
  std::vector<std::vector<std::size_t>> split_members;
  for (const SplitSpec& s : splits) {
    split_members.emplace_back();
    for (std::size_t i = 0; i < s.count; ++i) {
      split_members.back().push_back(out.labels.size());
      out.labels.push_back(label_name(s.name, i));
      vocab.add(s.name, out.labels.back());
    }
  }

  const std::size_t num_labels = out.labels.size();
  std::vector<double> signatures(num_labels * n);
  EmbeddingTable table(dw);
  for (std::size_t c = 0; c < num_labels; ++c) {
    std::vector<double> z(dz);
    for (double& v : z) v = normal(rng);
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < dz; ++k) acc += to_visual[i * dz + k] * z[k];
      signatures[c * n + i] = acc;
      norm += acc * acc;
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) signatures[c * n + i] /= norm;
    std::vector<double> w(dw);
    for (std::size_t i = 0; i < dw; ++i) {
      for (std::size_t k = 0; k < dz; ++k) w[i] += to_text[i * dz + k] * z[k];
      w[i] += config.embedding_noise * normal(rng);
    }
    table.add(out.labels[c], std::move(w));
  }
  out.signatures = Tensor({num_labels, n}, signatures);

  const std::size_t cells = config.height * config.width;
  const std::size_t signal_cells = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::lround(config.signal_fraction * cells)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ImageRecord> records;
  std::size_t image_index = 0;
  for (const auto& members : split_members) {
    for (std::size_t primary : members) {
      for (std::size_t k = 0; k < config.images_per_label; ++k) {
        std::vector<std::size_t> labels = {primary};
        if (members.size() > 1 && unit(rng) < config.second_label_probability) {
          const std::size_t own = static_cast<std::size_t>(
              std::find(members.begin(), members.end(), primary) - members.begin());
          std::size_t pick =
              std::uniform_int_distribution<std::size_t>(0, members.size() - 2)(rng);
          if (pick >= own) ++pick;
          const std::size_t other = members[pick];
          labels.push_back(other);
        }
        std::vector<std::size_t> order(cells);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        PlantedImage planted;
        char id[32];
        std::snprintf(id, sizeof id, "img%05zu", image_index++);
        planted.id = id;
        std::vector<double> values(n * cells, 0.0);
        for (double& v : values) v = config.noise_std * normal(rng);
        for (std::size_t j = 0; j < labels.size(); ++j) {
          planted.labels.push_back(out.labels[labels[j]]);
          const std::size_t begin = j * signal_cells / labels.size();
          const std::size_t end = (j + 1) * signal_cells / labels.size();
          std::vector<std::size_t> mine(order.begin() + begin, order.begin() + end);
          std::sort(mine.begin(), mine.end());
          for (std::size_t cell : mine)
            for (std::size_t ch = 0; ch < n; ++ch)
              values[ch * cells + cell] +=
                  config.signal_amplitude * signatures[labels[j] * n + ch];
          planted.cells.push_back(std::move(mine));
        }
        const std::filesystem::path file = dir / "features" / (planted.id + ".fmap");
        write_feature_file(file,
                           LocalFeatureMap(Tensor({n, config.height, config.width}, values)));
        records.push_back({planted.id, file, planted.labels});
        out.images.push_back(std::move(planted));
      }
    }
  }

  const std::string header = describe(config);
  out.manifest = dir / "manifest.jsonl";
  out.embeddings = dir / "embeddings.txt";
  out.splits = dir / "splits.tsv";
  out.planted = dir / "planted.jsonl";
  write_manifest(out.manifest, DatasetManifest(std::move(records)), header);
  write_embedding_file(out.embeddings, table);
  write_split_file(out.splits, vocab, header);

  std::ofstream planted(out.planted);
  check(planted.good(), "io-error", "cannot write " + out.planted.string());
  for (const PlantedImage& p : out.images) {
    json j;
    j["id"] = p.id;
    j["labels"] = p.labels;
    j["cells"] = p.cells;
    planted << j.dump() << '\n';
  }
  check(planted.good(), "io-error", "failed writing " + out.planted.string());
  return out;
}

std::vector<PlantedImage> load_planted_cells(const std::filesystem::path& path) {
  std::ifstream in(path);
  check(in.good(), "io-error", "cannot open " + path.string());
  std::vector<PlantedImage> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("id").get<std::string>(),
                     j.at("labels").get<std::vector<std::string>>(),
                     j.at("cells").get<std::vector<std::vector<std::size_t>>>()});
    } catch (const json::exception& e) {
      throw Error("invalid-planted-file", path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mlfsc
