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

#include "mlfsc/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mlfsc/error.hpp"

namespace mlfsc {

EmbeddingTable::EmbeddingTable(std::size_t dimension) : dimension_(dimension) {
  check(dimension > 0, "invalid-argument", "embedding dimension must be positive");
}

void EmbeddingTable::add(std::string token, std::vector<double> vec) {
  check(!token.empty(), "invalid-token", "empty token");
  check(std::none_of(token.begin(), token.end(),
                     [](unsigned char c) { return std::isspace(c); }),
        "invalid-token", "token contains whitespace: '" + token + "'");
  if (dimension_ == 0) dimension_ = vec.size();
  check(vec.size() == dimension_ && dimension_ > 0, "inconsistent-arity",
        "token '" + token + "' has " + std::to_string(vec.size()) +
            " values, expected " + std::to_string(dimension_));
  check(!entries_.contains(token), "duplicate-token",
        "token '" + token + "' appears twice");
  tokens_.push_back(token);
  entries_.emplace(std::move(token), std::move(vec));
}

bool EmbeddingTable::contains(std::string_view token) const {
  return entries_.contains(std::string(token));
}

const std::vector<double>* EmbeddingTable::find(std::string_view token) const {
  auto it = entries_.find(std::string(token));
  return it == entries_.end() ? nullptr : &it->second;
}

EmbeddingTable parse_embedding_text(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);

    std::size_t pos = line.find(' ');
    check(pos != std::string::npos && pos > 0, "inconsistent-arity",
          where + ": expected a token followed by values");
    std::string token = line.substr(0, pos);
    std::vector<double> vec;
    while (pos < line.size()) {
      const std::size_t start = pos + 1;
      std::size_t end = line.find(' ', start);
      if (end == std::string::npos) end = line.size();
      double v = 0.0;
      const char* first = line.data() + start;
      const char* last = line.data() + end;
      auto [ptr, ec] = std::from_chars(first, last, v);
      check(end > start && ec == std::errc() && ptr == last && std::isfinite(v),
            "non-numeric",
            where + ": field '" + std::string(first, last) + "' is not a number");
      vec.push_back(v);
      pos = end;
    }
    if (table.size() > 0 && vec.size() != table.dimension()) {
      throw Error("inconsistent-arity",
                  where + ": " + std::to_string(vec.size()) +
                      " values, expected " + std::to_string(table.dimension()));
    }
    check(!table.contains(token), "duplicate-token",
          where + ": token '" + token + "' appears twice");
    table.add(std::move(token), std::move(vec));
  }
  check(table.size() > 0, "empty-embedding-file", "no embedding entries");
  return table;
}

EmbeddingTable parse_embedding_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  check(in.good(), "io-error", "cannot open " + path.string());
  return parse_embedding_text(in);
}

void write_embedding_text(std::ostream& out, const EmbeddingTable& table) {
  char buf[32];
  for (const std::string& token : table.tokens()) {
    out << token;
    for (double v : *table.find(token)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

void write_embedding_file(const std::filesystem::path& path,
                          const EmbeddingTable& table) {
  std::ofstream out(path);
  check(out.good(), "io-error", "cannot write " + path.string());
  write_embedding_text(out, table);
  check(out.good(), "io-error", "failed writing " + path.string());
}

std::vector<std::string> label_tokens(std::string_view label) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : label) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || c == '_') {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Tensor embed_label(const EmbeddingTable& table, std::string_view label,
                   EmbedOptions options) {
  const std::vector<std::string> tokens = label_tokens(label);
  check(!tokens.empty(), "empty-label", "label has no tokens");
  std::vector<double> acc(table.dimension(), 0.0);
  std::string missing;
  for (const std::string& t : tokens) {
    const std::vector<double>* vec = table.find(t);
    if (vec == nullptr) {
      if (!missing.empty()) missing += ", ";
      missing += t;
      continue;
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += (*vec)[i];
  }
  if (!missing.empty()) throw Error("missing-token", missing);
  for (double& v : acc) v /= static_cast<double>(tokens.size());
  if (options.l2_normalize) {
    double n2 = 0.0;
    for (double v : acc) n2 += v * v;
    check(n2 > 0.0, "degenerate-vector",
          "cannot normalize zero embedding of '" + std::string(label) + "'");
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : acc) v *= inv;
  }
  return Tensor::vector(std::move(acc));
}

Tensor embed_labels(const EmbeddingTable& table,
                    const std::vector<std::string>& labels,
                    EmbedOptions options) {
  check(!labels.empty(), "invalid-argument", "no labels to embed");
  std::vector<double> rows;
  rows.reserve(labels.size() * table.dimension());
  for (const std::string& label : labels) {
    const Tensor v = embed_label(table, label, options);
    rows.insert(rows.end(), v.values().begin(), v.values().end());
  }
  return Tensor::matrix(labels.size(), table.dimension(), std::move(rows));
}

void LabelVocabulary::add(const std::string& split, const std::string& label) {
  check(!split.empty() && !label.empty(), "invalid-argument",
        "split and label names must be non-empty");
  if (auto it = owner_.find(label); it != owner_.end()) {
    check(it->second == split, "overlapping-splits",
          "label '" + label + "' is in both '" + it->second + "' and '" +
              split + "'");
    throw Error("duplicate-label", "label '" + label + "' listed twice");
  }
  if (!labels_.contains(split)) split_names_.push_back(split);
  labels_[split].push_back(label);
  owner_.emplace(label, split);
}

const std::vector<std::string>& LabelVocabulary::labels(
    std::string_view split) const {
  auto it = labels_.find(std::string(split));
  check(it != labels_.end(), "unknown-split",
        "no split named '" + std::string(split) + "'");
  return it->second;
}

std::optional<std::string> LabelVocabulary::split_of(
    std::string_view label) const {
  auto it = owner_.find(std::string(label));
  if (it == owner_.end()) return std::nullopt;
  return it->second;
}

bool LabelVocabulary::has_split(std::string_view split) const {
  return labels_.contains(std::string(split));
}

LabelVocabulary parse_split_text(std::istream& in) {
  LabelVocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    check(tab != std::string::npos, "bad-split-line",
          "line " + std::to_string(line_no) + ": expected split<TAB>label");
    vocab.add(line.substr(0, tab), line.substr(tab + 1));
  }
  return vocab;
}

LabelVocabulary parse_split_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  check(in.good(), "io-error", "cannot open " + path.string());
  return parse_split_text(in);
}

void write_split_file(const std::filesystem::path& path,
                      const LabelVocabulary& vocab, std::string_view comment) {
  std::ofstream out(path);
  check(out.good(), "io-error", "cannot write " + path.string());
  if (!comment.empty()) out << "# " << comment << '\n';
  for (const std::string& split : vocab.split_names())
    for (const std::string& label : vocab.labels(split))
      out << split << '\t' << label << '\n';
  check(out.good(), "io-error", "failed writing " + path.string());
}

}  // namespace mlfsc
