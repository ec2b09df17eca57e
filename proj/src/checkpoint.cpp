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

#include "mlfsc/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "mlfsc/error.hpp"

namespace mlfsc {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[5] = {'M', 'M', 'C', 'I', '1'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  out.insert(out.end(), p, p + sizeof v);
}

void put_text(std::vector<unsigned char>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

void put_tensor(std::vector<unsigned char>& out, const std::string& name, const Tensor& t) {
  put_text(out, name);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  const auto* p = reinterpret_cast<const unsigned char*>(t.values().data());
  out.insert(out.end(), p, p + t.size() * sizeof(double));
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    check(bytes_.size() - pos_ >= n, "truncated",
          std::string("checkpoint ends inside ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::string text(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Tensor tensor(const std::string& name) {
    const std::uint32_t rank = u32("tensor rank");
    check(rank <= 8, "invalid-checkpoint", "tensor " + name + " has rank " + std::to_string(rank));
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(u32("tensor dims"));
      check(shape.back() > 0, "invalid-checkpoint", "tensor " + name + " has a zero extent");
    }
    const std::size_t count = shape_size(shape);
    check(count <= (bytes_.size() - pos_) / sizeof(double), "truncated",
          "checkpoint ends inside tensor " + name);
    std::vector<double> v(count);
    std::memcpy(v.data(), bytes_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
    return Tensor(std::move(shape), std::move(v));
  }
  void magic() {
    need(sizeof kMagic, "magic");
    check(std::memcmp(bytes_.data(), kMagic, sizeof kMagic) == 0, "bad-magic",
          "not an MMCI1 checkpoint");
    pos_ += sizeof kMagic;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

std::string metadata(const ModelState& s) {
  std::ostringstream out;
  char buf[64];
  const auto real = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "epoch = " << s.epoch << '\n'
      << "step = " << s.step << '\n'
      << "channels = " << s.config.channels << '\n'
      << "embedding_dim = " << s.config.embedding_dim << '\n'
      << "d_j = " << s.config.joint_dim << '\n'
      << "n_heads = " << s.config.heads << '\n'
      << "d_c = " << s.config.inner_dim << '\n'
      << "n_d = " << s.config.top_features << '\n'
      << "lambda = " << real(s.config.lambda) << '\n'
      << "dropout = " << real(s.config.dropout) << '\n';
  return out.str();
}

std::map<std::string, std::string> parse_metadata(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    check(eq != std::string::npos, "invalid-checkpoint", "bad metadata line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return kv;
}

std::size_t meta_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  check(it != kv.end(), "invalid-checkpoint", "metadata lacks " + key);
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  check(ec == std::errc() && p == it->second.data() + it->second.size(), "invalid-checkpoint",
        "metadata " + key + " is not an integer");
  return v;
}

double meta_real(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  check(it != kv.end(), "invalid-checkpoint", "metadata lacks " + key);
  double v = 0;
  const auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  check(ec == std::errc() && p == it->second.data() + it->second.size(), "invalid-checkpoint",
        "metadata " + key + " is not a number");
  return v;
}

}  // namespace

std::vector<unsigned char> checkpoint_bytes(const ModelState& state, const std::string& run_config) {
  ModelState copy = state;
  std::vector<std::pair<std::string, Tensor>> tensors;
  copy.params.visit([&](const std::string& name, Tensor& t) { tensors.emplace_back(name, t); });
  copy.params.visit([&](const std::string& name, Tensor&) {
    const auto it = state.moments.find(name);
    if (it == state.moments.end() || !it->second.initialized) return;
    tensors.emplace_back("adam.m." + name, it->second.first);
    tensors.emplace_back("adam.v." + name, it->second.second);
  });
  std::vector<unsigned char> out(kMagic, kMagic + sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) put_tensor(out, name, t);
  put_text(out, metadata(state));
  put_text(out, run_config);
  return out;
}

std::vector<std::pair<std::string, Tensor>> checkpoint_tensors(
    std::span<const unsigned char> bytes) {
  Reader r(bytes);
  r.magic();
  const std::uint32_t count = r.u32("tensor count");
  std::vector<std::pair<std::string, Tensor>> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.text("tensor name");
    Tensor t = r.tensor(name);
    tensors.emplace_back(std::move(name), std::move(t));
  }
  return tensors;
}

Checkpoint parse_checkpoint(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  r.magic();
  const std::uint32_t count = r.u32("tensor count");
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.text("tensor name");
    Tensor t = r.tensor(name);
    check(tensors.emplace(name, std::move(t)).second, "invalid-checkpoint",
          "tensor " + name + " appears twice");
  }
  const auto meta = parse_metadata(r.text("metadata"));
  Checkpoint c;
  c.run_config = r.text("run configuration");
  check(r.done(), "trailing-data", "bytes after the run configuration block");

  ModelConfig cfg;
  cfg.channels = meta_size(meta, "channels");
  cfg.embedding_dim = meta_size(meta, "embedding_dim");
  cfg.joint_dim = meta_size(meta, "d_j");
  cfg.heads = meta_size(meta, "n_heads");
  cfg.inner_dim = meta_size(meta, "d_c");
  cfg.top_features = meta_size(meta, "n_d");
  cfg.lambda = meta_real(meta, "lambda");
  cfg.dropout = meta_real(meta, "dropout");
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error("invalid-checkpoint", e.what());
  }
  ModelState& s = c.state;
  s = ModelState::fresh(cfg, 0);
  s.epoch = meta_size(meta, "epoch");
  s.step = meta_size(meta, "step");
  std::size_t used = 0;
  const auto take = [&](const std::string& name, const Shape& shape) -> const Tensor* {
    const auto it = tensors.find(name);
    if (it == tensors.end()) return nullptr;
    check(it->second.shape() == shape, "invalid-checkpoint",
          "tensor " + name + " has shape " + shape_string(it->second.shape()) + ", expected " +
              shape_string(shape));
    ++used;
    return &it->second;
  };
  s.params.visit([&](const std::string& name, Tensor& t) {
    const Tensor* stored = take(name, t.shape());
    check(stored != nullptr, "invalid-checkpoint", "missing tensor " + name);
    t = *stored;
    const Tensor* m = take("adam.m." + name, t.shape());
    const Tensor* v = take("adam.v." + name, t.shape());
    check((m == nullptr) == (v == nullptr), "invalid-checkpoint",
          "incomplete optimizer moments for " + name);
    if (m != nullptr) s.moments[name] = AdamMoments{*m, *v, true};
  });
  check(used == tensors.size(), "invalid-checkpoint", "checkpoint holds unknown tensors");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const ModelState& state,
                     const std::string& run_config) {
  const std::vector<unsigned char> bytes = checkpoint_bytes(state, run_config);
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "io-error", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  check(out.good(), "io-error", "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  check(std::filesystem::exists(path), "no-checkpoint", "no checkpoint at " + path.string());
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "io-error", "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace mlfsc
