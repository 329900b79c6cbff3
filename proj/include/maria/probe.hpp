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

#include <cstdint>
#include <string>
#include <vector>

#include "maria/model.hpp"

namespace maria {

/// Token sequence with one class label per token.
struct TaggedExample {
  std::vector<int> tokens;
  std::vector<int> labels;
};

enum class ProbeSource { mlm_only, concat };

struct ProbeReport {
  std::string source;
  double accuracy = 0.0;
  double stderr_ = 0.0;  // binomial standard error on the test split
  int64_t train_tokens = 0;
  int64_t test_tokens = 0;
  int classes = 0;
};

/// Trains a linear classifier on raw feature rows (no hidden states); the
/// building block behind probe_tagging and its control experiments.
ProbeReport probe_linear(const std::vector<std::vector<float>>& train_x,
                         const std::vector<int>& train_y,
                         const std::vector<std::vector<float>>& test_x,
                         const std::vector<int>& test_y, int classes, int epochs,
                         double lr, uint64_t seed);

/// Linear probe on frozen hidden states. mlm_only uses the MLM state at each
/// token of the clean sequence; concat prepends the AR model's predictive
/// state (BOS shift), the same pairing the fusion decoder consumes. The data
/// is split 80/20 into train/test by example.
ProbeReport probe_tagging(const TransformerModel* ar_model, const TransformerModel& mlm_model,
                          const std::vector<TaggedExample>& data, ProbeSource source,
                          int classes, int epochs = 10, double lr = 1e-4,
                          uint64_t seed = 0);

}  // namespace maria
