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

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mlfsc/tensor.hpp"

namespace mlfsc {

/// Word vectors keyed by token, all of one dimension.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dimension);

  /// Throws Error("duplicate-token") or Error("inconsistent-arity").
  void add(std::string token, std::vector<double> vec);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(std::string_view token) const;
  const std::vector<double>* find(std::string_view token) const;
  /// Tokens in insertion (file) order.
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::size_t dimension_ = 0;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::vector<double>> entries_;
};

/// Text format: one "token v1 ... vd" per line, single-space separated,
/// dimension inferred from the first line.
EmbeddingTable parse_embedding_text(std::istream& in);
EmbeddingTable parse_embedding_file(const std::filesystem::path& path);
void write_embedding_text(std::ostream& out, const EmbeddingTable& table);
void write_embedding_file(const std::filesystem::path& path,
                          const EmbeddingTable& table);

struct EmbedOptions {
  bool l2_normalize = false;
};

/// Lowercases the label, splits it on whitespace and underscores and returns
/// the mean of the token vectors. Missing tokens raise
/// Error("missing-token") naming every absent token.
Tensor embed_label(const EmbeddingTable& table, std::string_view label,
                   EmbedOptions options = {});
std::vector<std::string> label_tokens(std::string_view label);

/// Rows of embed_label() for each label, as a [labels, d_w] matrix.
Tensor embed_labels(const EmbeddingTable& table,
                    const std::vector<std::string>& labels,
                    EmbedOptions options = {});

/// Ordered label lists per split ("base", "val", "novel", ...). Splits are
/// pairwise disjoint.
class LabelVocabulary {
 public:
  void add(const std::string& split, const std::string& label);

  const std::vector<std::string>& labels(std::string_view split) const;
  std::optional<std::string> split_of(std::string_view label) const;
  const std::vector<std::string>& split_names() const noexcept {
    return split_names_;
  }
  bool has_split(std::string_view split) const;

 private:
  std::vector<std::string> split_names_;
  std::unordered_map<std::string, std::vector<std::string>> labels_;
  std::unordered_map<std::string, std::string> owner_;
};

/// "split<TAB>label" per line; blank lines and lines starting with '#' are
/// skipped.
LabelVocabulary parse_split_text(std::istream& in);
LabelVocabulary parse_split_file(const std::filesystem::path& path);
void write_split_file(const std::filesystem::path& path,
                      const LabelVocabulary& vocab, std::string_view comment = {});

}  // namespace mlfsc
