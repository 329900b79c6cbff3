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
#include <optional>
#include <string>
#include <vector>

#include "maria/adam.hpp"
#include "maria/corpus.hpp"
#include "maria/fusion.hpp"
#include "maria/masking.hpp"
#include "maria/model.hpp"

namespace maria {

struct TrainConfig {
  int64_t steps = 2000;
  int batch_size = 32;   // sequences per optimizer step, via gradient accumulation
  int micro_batch = 8;   // sequences per accumulation slice
  double lr = 5e-5;      // cosine-decayed to zero over `steps`
  uint64_t seed = 0;
  MaskRateSpec mask_rate_spec;  // MLM / fusion training only
  MaskMode mask_mode = MaskMode::bernoulli;
  int64_t eval_every = 200;
  int holdout_sequences = 100;  // capped by the corpus holdout split

  void validate() const;
};

struct TrainLogEntry {
  int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::optional<double> holdout;
  double wall_ms = 0.0;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  std::string init_kind;          // fusion runs record product|random
  int64_t skipped_empty_masks = 0;

  double final_holdout() const;
  double first_holdout() const;
  /// JSON-lines, one {"step":..,"loss":..,"lr":..[,"holdout":..]} per entry.
  void write_jsonl(const std::string& path) const;
};

struct TrainResult {
  TransformerModel model;
  TrainLog log;
};

struct FusionTrainResult {
  FusionHead head;
  TrainLog log;
};

/// Next-token cross-entropy over all positions of each window (inputs are
/// BOS-shifted).
TrainResult train_ar(const CorpusShards& corpus, const ModelConfig& model_config,
                     const TrainConfig& config);

/// Masked-position cross-entropy; per-sequence mask rates drawn from
/// config.mask_rate_spec. Sequences whose sampled mask is empty contribute
/// zero loss and are counted in skipped_empty_masks.
TrainResult train_mlm(const CorpusShards& corpus, const ModelConfig& model_config,
                      const TrainConfig& config);

enum class FusionInit { product, random };

/// Trains only the fusion decoder; both base models must be frozen and share
/// a vocabulary. Holdout masks are fixed by seed so the product/random curves
/// are directly comparable.
FusionTrainResult train_fusion(const TransformerModel& ar_model,
                               const TransformerModel& mlm_model,
                               const CorpusShards& corpus, const TrainConfig& config,
                               FusionInit init);

/// Mean loss over the corpus holdout split; deterministic given seed.
double eval_holdout_ar(const TransformerModel& model, const CorpusShards& corpus,
                       int max_sequences);
double eval_holdout_mlm(const TransformerModel& model, const CorpusShards& corpus,
                        const MaskRateSpec& rate_spec, uint64_t seed, int max_sequences);
double eval_holdout_fusion(const TransformerModel& ar_model,
                           const TransformerModel& mlm_model, const FusionHead& head,
                           const CorpusShards& corpus, const MaskRateSpec& rate_spec,
                           uint64_t seed, int max_sequences);

}  // namespace maria
