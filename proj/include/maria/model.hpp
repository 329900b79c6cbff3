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

#include "maria/tensor.hpp"
#include "maria/tokenizer.hpp"

namespace maria {

enum class AttentionMode { causal, bidirectional };

std::string attention_mode_name(AttentionMode mode);
AttentionMode attention_mode_from_name(const std::string& name);

struct ModelConfig {
  int vocab_size = ByteTokenizer::kVocabSize;
  int d_model = 128;
  int n_layers = 4;
  int n_heads = 4;
  int max_seq_len = 256;
  int ffn_mult = 4;
  AttentionMode attention_mode = AttentionMode::causal;

  void validate() const;
  int head_dim() const { return d_model / n_heads; }
  /// Position rows: max_seq_len content positions plus one slot so a BOS
  /// prefix can ride along with a full-length sequence.
  int max_positions() const { return max_seq_len + 1; }
};

struct LayerWeights {
  TensorRef ln1_g, ln1_b;
  TensorRef wq, bq, wk, bk, wv, bv, wo, bo;
  TensorRef ln2_g, ln2_b;
  TensorRef w_in, b_in, w_out, b_out;
};

/// Per-layer append-only key/value history for incremental causal decoding.
/// One cache belongs to exactly one inference session.
class KVCache {
 public:
  KVCache() = default;
  KVCache(int n_layers, int d_model, int capacity);

  int cached_len() const { return cached_len_; }
  int capacity() const { return capacity_; }
  int n_layers() const { return static_cast<int>(k_.size()); }

  const float* k_data(int layer) const { return k_[static_cast<size_t>(layer)].data(); }
  const float* v_data(int layer) const { return v_[static_cast<size_t>(layer)].data(); }
  float* k_append_ptr(int layer) {
    return k_[static_cast<size_t>(layer)].data() + static_cast<size_t>(cached_len_) * d_model_;
  }
  float* v_append_ptr(int layer) {
    return v_[static_cast<size_t>(layer)].data() + static_cast<size_t>(cached_len_) * d_model_;
  }
  /// Bumps the shared length after all layers appended `k` rows.
  void advance(int k);

 private:
  int d_model_ = 0;
  int capacity_ = 0;
  int cached_len_ = 0;
  std::vector<std::vector<float>> k_;
  std::vector<std::vector<float>> v_;
};

/// Transformer language model: learned token + position embeddings, pre-norm
/// blocks with GELU FFN, final layer norm, untied output head.
struct TransformerModel {
  ModelConfig config;
  TensorRef tok_emb;  // [v x d]
  TensorRef pos_emb;  // [max_positions x d]
  std::vector<LayerWeights> layers;
  TensorRef lnf_g, lnf_b;
  TensorRef w_head;  // [d x v]
  bool frozen = false;

  std::vector<TensorRef> parameters() const;
  void set_requires_grad(bool value);
  /// Marks the model immutable for training: no gradient ever accumulates.
  void freeze();
  /// FNV-1a over all weight bytes; used to verify frozen models stay put.
  uint64_t weight_checksum() const;
};

TransformerModel init_model(const ModelConfig& config, uint64_t seed);
/// All-zero weights; logits are exactly zero, i.e. a uniform predictor.
TransformerModel uniform_stub_model(const ModelConfig& config);

/// Final-layer hidden states for a full sequence. Rows are positions
/// pos_offset .. pos_offset+n. Causal mode masks attention to j <= i.
TensorRef forward_hidden(const TransformerModel& model, std::span<const int> tokens,
                         Tape* tape = nullptr, int pos_offset = 0);

/// hidden * w_head; softmax of a row is the model's next-token/fill
/// distribution.
TensorRef forward_logits(const TransformerModel& model, std::span<const int> tokens,
                         Tape* tape = nullptr);

/// Incremental causal forward: processes `new_tokens` against the cache and
/// extends it. Returned rows equal rows [cached_len, cached_len+k) of a full
/// forward over the concatenation — bit-identically, as both paths share the
/// same kernels. Bidirectional models cannot cache.
TensorRef forward_cached(const TransformerModel& model, std::span<const int> new_tokens,
                         KVCache& cache);

KVCache make_cache(const TransformerModel& model);

}  // namespace maria
