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

#include "maria/fusion.hpp"

#include <cmath>
#include <cstring>

namespace maria {

std::vector<TensorRef> FusionHead::parameters() const {
  std::vector<TensorRef> out{w3};
  if (has_bias) out.push_back(bias);
  return out;
}

void FusionHead::set_requires_grad(bool value) {
  for (auto& p : parameters()) p->requires_grad = value;
}

FusionHead init_product(const TransformerModel& ar_model, const TransformerModel& mlm_model,
                        bool with_bias) {
  const auto& w1 = ar_model.w_head;
  const auto& w2 = mlm_model.w_head;
  if (w1->cols() != w2->cols()) {
    throw ContractError("init_product: vocab mismatch: AR head " + w1->shape_str() +
                        " vs MLM head " + w2->shape_str());
  }
  FusionHead head;
  head.d1 = w1->rows();
  head.d2 = w2->rows();
  head.vocab = w1->cols();
  head.init_kind = "product";
  head.w3 = Tensor::create({head.d1 + head.d2, head.vocab}, /*requires_grad=*/true);
  // Halving is exact in binary floating point, so the stacked head reproduces
  // the average of the base logits to rounding of the final dot product.
  for (int r = 0; r < head.d1; ++r) {
    const float* src = w1->row_ptr(r);
    float* dst = head.w3->row_ptr(r);
    for (int c = 0; c < head.vocab; ++c) dst[c] = src[c] * 0.5f;
  }
  for (int r = 0; r < head.d2; ++r) {
    const float* src = w2->row_ptr(r);
    float* dst = head.w3->row_ptr(head.d1 + r);
    for (int c = 0; c < head.vocab; ++c) dst[c] = src[c] * 0.5f;
  }
  if (with_bias) {
    head.has_bias = true;
    head.bias = Tensor::zeros({head.vocab}, /*requires_grad=*/true);
  }
  return head;
}

FusionHead init_random(int d1, int d2, int vocab, uint64_t seed, bool with_bias) {
  if (d1 < 1 || d2 < 1 || vocab < 4) {
    throw ContractError("init_random: invalid fusion dimensions");
  }
  FusionHead head;
  head.d1 = d1;
  head.d2 = d2;
  head.vocab = vocab;
  head.init_kind = "random";
  Rng rng = Rng::fork(seed, 0xf051);
  const double stddev = std::sqrt(2.0 / static_cast<double>(d1 + d2 + vocab));
  head.w3 = Tensor::randn({d1 + d2, vocab}, rng, stddev, /*requires_grad=*/true);
  if (with_bias) {
    head.has_bias = true;
    head.bias = Tensor::zeros({vocab}, /*requires_grad=*/true);
  }
  return head;
}

TensorRef fusion_logits(Tape* tape, const FusionHead& head, const TensorRef& h1,
                        const TensorRef& h2) {
  if (h1->ndim() != 2 || h1->cols() != head.d1) {
    throw ContractError("fusion_logits: AR hidden width " +
                        std::to_string(h1->ndim() == 2 ? h1->cols() : -1) +
                        " does not match head d1 " + std::to_string(head.d1));
  }
  if (h2->ndim() != 2 || h2->cols() != head.d2) {
    throw ContractError("fusion_logits: MLM hidden width " +
                        std::to_string(h2->ndim() == 2 ? h2->cols() : -1) +
                        " does not match head d2 " + std::to_string(head.d2));
  }
  auto cat = concat_cols(tape, h1, h2);
  auto logits = matmul(tape, cat, head.w3);
  if (head.has_bias) logits = add_bias(tape, logits, head.bias);
  return logits;
}

std::vector<float> fusion_logits_row(const FusionHead& head, const float* h1,
                                     const float* h2) {
  std::vector<float> cat(static_cast<size_t>(head.d1 + head.d2));
  std::memcpy(cat.data(), h1, sizeof(float) * static_cast<size_t>(head.d1));
  std::memcpy(cat.data() + head.d1, h2, sizeof(float) * static_cast<size_t>(head.d2));
  std::vector<float> logits(static_cast<size_t>(head.vocab));
  for (int j = 0; j < head.vocab; ++j) {
    double z = detail::dot_strided(cat.data(), 1, head.w3->data.data() + j, head.vocab,
                                   head.d1 + head.d2);
    if (head.has_bias) z += static_cast<double>(head.bias->data[static_cast<size_t>(j)]);
    logits[static_cast<size_t>(j)] = static_cast<float>(z);
  }
  return logits;
}

AlignedBatch align_hidden(std::span<const int> clean_tokens,
                          std::span<const int> masked_tokens,
                          const TransformerModel& ar_model,
                          const TransformerModel& mlm_model) {
  const int n = static_cast<int>(clean_tokens.size());
  if (n != static_cast<int>(masked_tokens.size())) {
    throw ContractError("align_hidden: clean/masked length mismatch: " + std::to_string(n) +
                        " vs " + std::to_string(masked_tokens.size()));
  }
  if (n < 1) throw ContractError("align_hidden: empty sequence");
  if (ar_model.config.attention_mode != AttentionMode::causal) {
    throw ModeError("align_hidden: AR model must be causal");
  }
  if (mlm_model.config.attention_mode != AttentionMode::bidirectional) {
    throw ModeError("align_hidden: MLM model must be bidirectional");
  }
  // AR input: BOS then the first n-1 clean tokens. Row i then conditions on
  // BOS and tokens < i, exactly the state that predicts token i. The final
  // position (which would predict token n) is never computed.
  std::vector<int> ar_input(static_cast<size_t>(n));
  ar_input[0] = ByteTokenizer::kBos;
  for (int i = 1; i < n; ++i) ar_input[static_cast<size_t>(i)] = clean_tokens[static_cast<size_t>(i - 1)];

  AlignedBatch out;
  out.ar_hidden = forward_hidden(ar_model, ar_input);
  out.mlm_hidden = forward_hidden(mlm_model, masked_tokens);
  out.targets.assign(clean_tokens.begin(), clean_tokens.end());
  out.loss_mask.assign(static_cast<size_t>(n), 0.0f);
  for (int i = 0; i < n; ++i) {
    if (masked_tokens[static_cast<size_t>(i)] == ByteTokenizer::kMask) {
      out.loss_mask[static_cast<size_t>(i)] = 1.0f;
    }
  }
  return out;
}

TensorRef maria_loss(Tape* tape, const FusionHead& head, const AlignedBatch& aligned,
                     CrossEntropyInfo* info) {
  auto logits = fusion_logits(tape, head, aligned.ar_hidden, aligned.mlm_hidden);
  return cross_entropy(tape, logits, aligned.targets, aligned.loss_mask, info);
}

}  // namespace maria
