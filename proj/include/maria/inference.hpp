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

#include <span>
#include <string>
#include <vector>

#include "maria/fusion.hpp"
#include "maria/masking.hpp"
#include "maria/model.hpp"
#include "maria/rng.hpp"

namespace maria {

/// Token sampling policy. greedy ignores temperature and nucleus_p; nucleus
/// renormalizes the smallest sorted-probability prefix with mass >= p.
struct SamplerSpec {
  enum class Kind { greedy, temperature, nucleus };
  Kind kind = Kind::greedy;
  double temperature = 1.0;
  double nucleus_p = 1.0;

  void validate() const;
  static SamplerSpec greedy_spec() { return SamplerSpec{}; }
  static SamplerSpec temperature_spec(double t);
  static SamplerSpec nucleus_spec(double p, double t = 1.0);
};

/// Draws one token. Greedy ties break toward the lowest id. Stochastic kinds
/// consume exactly one uniform draw, so two samplers sharing a stream stay in
/// lockstep. Temperature 0 is expressed as greedy, not division by zero.
int sample_token(std::span<const float> logits, const SamplerSpec& sampler, Rng& rng);

/// Forward-pass accounting for the infilling paths.
struct InfillStats {
  int ar_forward_calls = 0;
  int64_t ar_tokens_processed = 0;
  int mlm_forward_calls = 0;
  double wall_ms = 0.0;
};

/// KV-cached infilling: one MLM pass over the masked input, then one
/// left-to-right sweep of the AR model across the buffer, decoding each
/// masked position from [ar_hidden(curr-1, BOS-shifted); mlm_hidden(curr)]
/// through the fusion head. Output never contains MASK.
std::vector<int> infill_cached(const TransformerModel& ar_model,
                               const TransformerModel& mlm_model, const FusionHead& head,
                               std::span<const int> masked_tokens, const MaskSet& mask,
                               const SamplerSpec& sampler, Rng& rng,
                               InfillStats* stats = nullptr);

/// Equivalence oracle for the cached path: identical contract, but the AR
/// side recomputes a full forward over the current buffer for every masked
/// index. Cost reference for the no-cache regime.
std::vector<int> infill_uncached(const TransformerModel& ar_model,
                                 const TransformerModel& mlm_model, const FusionHead& head,
                                 std::span<const int> masked_tokens, const MaskSet& mask,
                                 const SamplerSpec& sampler, Rng& rng,
                                 InfillStats* stats = nullptr);

/// Left-to-right MLM baseline: one full bidirectional forward per masked
/// index, decoding with the MLM's own head.
std::vector<int> mlm_iterative_decode(const TransformerModel& mlm_model,
                                      std::span<const int> masked_tokens, const MaskSet& mask,
                                      const SamplerSpec& sampler, Rng& rng,
                                      InfillStats* stats = nullptr);

/// KV-cached ancestral sampling from BOS.
std::vector<int> generate_unconditional(const TransformerModel& ar_model, int length,
                                        const SamplerSpec& sampler, Rng& rng);

/// Iteration count, remask fraction and the linear 1 -> 0 temperature trace.
struct AnnealSchedule {
  int iterations = 8;
  double remask_fraction = 0.3;

  void validate() const;
  /// t_1 = 1 down to t_N = 0 (a single iteration runs greedy).
  std::vector<double> temperatures() const;
};

struct AnnealResult {
  std::vector<int> tokens;
  /// trace[0] is the initial AR sample; trace[i] the sequence after
  /// iteration i. Size == iterations + 1.
  std::vector<std::vector<int>> trace;
};

/// Sample at temperature 1 from the AR model, then repeatedly remask a
/// random fraction and re-infill through the fusion head at a decreasing
/// temperature.
AnnealResult simulated_anneal(const TransformerModel& ar_model,
                              const TransformerModel& mlm_model, const FusionHead& head,
                              int length, const AnnealSchedule& schedule, Rng& rng);

}  // namespace maria
