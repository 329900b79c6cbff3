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

#include "maria/corpus.hpp"
#include "maria/fusion.hpp"
#include "maria/inference.hpp"
#include "maria/model.hpp"

namespace maria {

/// One (method, mask rate) cell of a perplexity report.
struct PplEntry {
  std::string method;
  double rate = 0.0;
  double ppl = 0.0;
  double total_nll = 0.0;
  int64_t masked_tokens = 0;
  /// Fewer masked tokens than the floor count; the number is noise.
  bool insufficient = false;
};

using TokenSequences = std::vector<std::vector<int>>;

TokenSequences eval_sequences(const CorpusShards& corpus, int max_sequences,
                              bool holdout_only);

/// Exact teacher-forced MARIA likelihood: for each masked i the AR side is
/// conditioned on the true clean prefix, the MLM side on the masked input.
PplEntry masked_ppl_maria(const TransformerModel& ar_model, const TransformerModel& mlm_model,
                          const FusionHead& head, const TokenSequences& seqs, double rate,
                          uint64_t seed, int64_t min_masked_tokens = 50);

/// NLL of masked tokens under the AR model alone (true prefix, future context
/// ignored). Same seed => same masks as masked_ppl_maria.
PplEntry masked_ppl_ar(const TransformerModel& ar_model, const TokenSequences& seqs,
                       double rate, uint64_t seed, int64_t min_masked_tokens = 50);

/// Chain-rule MLM likelihood, left to right: each masked position is scored
/// with a full bidirectional forward on the current buffer, then revealed
/// with its ground-truth token. |mask| forwards per sequence.
PplEntry masked_ppl_mlm_ardecode(const TransformerModel& mlm_model, const TokenSequences& seqs,
                                 double rate, uint64_t seed,
                                 int64_t min_masked_tokens = 50);

/// Fixed-window perplexity over a long stream: consecutive windows (the tail
/// partial window included), NLL summed across partitions and normalized by
/// total tokens.
PplEntry rolling_ppl(const TransformerModel& ar_model, const std::vector<int>& stream,
                     int window);

// ---------------------------------------------------------------------------
// Throughput
// ---------------------------------------------------------------------------

struct ThroughputCell {
  std::string method;
  int length = 0;
  int masked = 0;
  double mean_s = 0.0;
  double stddev_s = 0.0;
  double tokens_per_s = 0.0;
  std::vector<double> run_s;
  bool unstable = false;  // stddev > 30% of mean
};

struct MethodFit {
  std::string method;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

struct ThroughputReport {
  std::vector<ThroughputCell> cells;
  std::vector<MethodFit> fits;
  std::vector<int> lengths;
  double mask_rate = 0.5;
  int runs = 10;
  int warmups = 2;
};

/// Times end-to-end greedy infilling per (method, length) on fixed random
/// inputs: `warmups` untimed runs, then `runs` timed ones; fits
/// log(mean time) vs log(length) per method by least squares.
/// methods may contain: maria_cached, maria_uncached, mlm_ardecode.
ThroughputReport throughput_bench(const TransformerModel& ar_model,
                                  const TransformerModel& mlm_model, const FusionHead& head,
                                  const std::vector<std::string>& methods,
                                  const std::vector<int>& lengths, double mask_rate = 0.5,
                                  int runs = 10, int warmups = 2, uint64_t seed = 0);

/// Mean over samples of exp(mean token NLL) under the scorer.
double generative_ppl(const TransformerModel& scorer, const TokenSequences& samples);

/// Per-sequence scorer NLL-based perplexity (one value per sample).
std::vector<double> generative_ppl_per_sample(const TransformerModel& scorer,
                                              const TokenSequences& samples);

}  // namespace maria
