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
#include <cstdint>
#include <string>
#include <vector>

namespace mlfsc {

struct GradCheckRow {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t points = 0;
  bool passed() const { return max_rel_error <= tolerance; }
};

struct GradCheckSuiteConfig {
  std::size_t points = 20;  // random evaluation points per op row
  std::uint64_t seed = 20240601;
  // Adds a row whose backward rule is deliberately wrong; the suite must fail.
  bool inject_fault = false;
};

/// Runs every differentiable op at op tolerance (1e-5) and the composite
/// losses, including the full episode objective on a d_j = 8 toy model at
/// 1e-4. Rows appear in a fixed order.
std::vector<GradCheckRow> run_gradcheck_suite(const GradCheckSuiteConfig& config = {});

bool all_passed(const std::vector<GradCheckRow>& rows);

/// Fixed-width table, one row per check plus a summary line.
std::string format_gradcheck_table(const std::vector<GradCheckRow>& rows);

}  // namespace mlfsc
