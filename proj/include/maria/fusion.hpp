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
#include <span>
#include <string>
#include <vector>

#include "maria/masking.hpp"
#include "maria/model.hpp"
#include "maria/tensor.hpp"

namespace maria {

/// Linear decoder over concatenated hidden states: w3 maps [h1; h2] of width
/// d1 + d2 to vocab logits. The optional bias (off by default, ablation only)
/// starts at zero.
struct FusionHead {
  TensorRef w3;    // [(d1 + d2) x v]
  TensorRef bias;  // [v], only when has_bias
  bool has_bias = false;
  int d1 = 0;
  int d2 = 0;
  int vocab = 0;
  std::string init_kind = "random";
  int64_t train_steps = 0;

  std::vector<TensorRef> parameters() const;
  void set_requires_grad(bool value);
};

/// Product initialization: w3 = [w1/2 ; w2/2], so that
/// w3 . [h1; h2] = (w1.h1 + w2.h2) / 2 for every pair of hidden states.
FusionHead init_product(const TransformerModel& ar_model, const TransformerModel& mlm_model,
                        bool with_bias = false);

/// Zero-mean entries with variance 2 / (d1 + d2 + v).
FusionHead init_random(int d1, int d2, int vocab, uint64_t seed, bool with_bias = false);

/// w3 . concat(h1, h2) (+ bias). h1 from the AR model, h2 from the MLM.
TensorRef fusion_logits(Tape* tape, const FusionHead& head, const TensorRef& h1,
                        const TensorRef& h2);

/// Fused logits for a single pair of hidden-state rows.
std::vector<float> fusion_logits_row(const FusionHead& head, const float* h1,
                                     const float* h2);

/// Row-aligned training batch: ar_hidden[i] conditions on tokens < i (BOS
/// shift), mlm_hidden[i] is the masked-input state at position i, targets are
/// the clean tokens, loss_mask marks the masked positions.
struct AlignedBatch {
  TensorRef ar_hidden;   // [n x d1]
  TensorRef mlm_hidden;  // [n x d2]
  std::vector<int> targets;
  std::vector<float> loss_mask;
};

/// Runs the AR model on [BOS] + clean[0..n-1) and the MLM on the masked
/// tokens; both frozen, no gradients flow into them.
AlignedBatch align_hidden(std::span<const int> clean_tokens,
                          std::span<const int> masked_tokens,
                          const TransformerModel& ar_model,
                          const TransformerModel& mlm_model);

/// Mean over masked positions of -log softmax(fusion logits)[target].
TensorRef maria_loss(Tape* tape, const FusionHead& head, const AlignedBatch& aligned,
                     CrossEntropyInfo* info = nullptr);

}  // namespace maria
