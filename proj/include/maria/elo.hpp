// Copyright 2026 The MARIA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include "maria/errors.hpp"

namespace maria {

/// One pairwise comparison. outcome is from A's perspective.
struct ComparisonRecord {
  std::string item;
  std::string a;
  std::string b;
  enum class Outcome { a_wins, b_wins, tie };
  Outcome outcome = Outcome::tie;
};

/// Parses JSONL records: {"item": s, "a": s, "b": s, "outcome": "a"|"b"|"tie"}.
std::vector<ComparisonRecord> read_comparison_jsonl(const std::string& path);
ComparisonRecord parse_comparison_json(const std::string& line);

struct EloTable {
  std::vector<std::string> models;  // sorted
  std::vector<double> ratings;
  bool connected = true;
  int iterations = 0;
  double grad_norm = 0.0;

  double rating(const std::string& model) const;
};

/// Batch maximum-likelihood Bradley-Terry fit:
///   P(A beats B) = 1 / (1 + base^((r_B - r_A) / scale))
/// Ties count as half a win for each side. Records are aggregated into a win
/// matrix first, so the result is independent of record order; the mean
/// rating is anchored to `init` (the model's gauge freedom). A disconnected
/// comparison graph is flagged: ratings are then identified only within
/// components.
EloTable bradley_terry(const std::vector<ComparisonRecord>& records, double scale = 400.0,
                       double base = 10.0, double init = 1000.0, double l2 = 1e-4);

}  // namespace maria
