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

// MMCI1 checkpoints: magic "MMCI1", u32 tensor count, then per tensor a u32
// name length, the UTF-8 name, u32 rank, u32 dims and little-endian f64
// values; then two u32-length text blocks, the model metadata (key = value)
// and the run configuration echo.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mlfsc/tensor.hpp"
#include "mlfsc/trainer.hpp"

namespace mlfsc {

struct Checkpoint {
  ModelState state;
  std::string run_config;
};

std::vector<unsigned char> checkpoint_bytes(const ModelState& state,
                                            const std::string& run_config = {});
/// Errors: "bad-magic", "truncated", "trailing-data", "invalid-checkpoint".
Checkpoint parse_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelState& state,
                     const std::string& run_config = {});
/// Error("no-checkpoint") when the file does not exist.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Named tensors in file order, without interpreting them.
std::vector<std::pair<std::string, Tensor>> checkpoint_tensors(
    std::span<const unsigned char> bytes);

}  // namespace mlfsc
