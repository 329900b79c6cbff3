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

#include "maria/model.hpp"

#include <cstring>
#include <numeric>

namespace maria {

std::string attention_mode_name(AttentionMode mode) {
  return mode == AttentionMode::causal ? "causal" : "bidirectional";
}

AttentionMode attention_mode_from_name(const std::string& name) {
  if (name == "causal") return AttentionMode::causal;
  if (name == "bidirectional") return AttentionMode::bidirectional;
  throw ConfigError("unknown attention mode: " + name);
}

void ModelConfig::validate() const {
  if (vocab_size < 4) throw ConfigError("vocab_size must be >= 4");
  if (d_model < 1 || n_layers < 1 || n_heads < 1 || ffn_mult < 1) {
    throw ConfigError("d_model, n_layers, n_heads, ffn_mult must be >= 1");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (max_seq_len < 2) throw ConfigError("max_seq_len must be >= 2");
}

KVCache::KVCache(int n_layers, int d_model, int capacity)
    : d_model_(d_model), capacity_(capacity) {
  k_.assign(static_cast<size_t>(n_layers),
            std::vector<float>(static_cast<size_t>(capacity) * d_model, 0.0f));
  v_ = k_;
}

void KVCache::advance(int k) {
  if (k < 0 || cached_len_ + k > capacity_) {
    throw LengthError("KVCache: advance past capacity " + std::to_string(capacity_));
  }
  cached_len_ += k;
}

namespace {

TensorRef make_param(std::vector<int> shape, Rng& rng, double stddev) {
  return Tensor::randn(std::move(shape), rng, stddev, /*requires_grad=*/true);
}

}  // namespace

std::vector<TensorRef> TransformerModel::parameters() const {
  std::vector<TensorRef> out{tok_emb, pos_emb};
  for (const auto& l : layers) {
    out.insert(out.end(), {l.ln1_g, l.ln1_b, l.wq, l.bq, l.wk, l.bk, l.wv, l.bv, l.wo,
                           l.bo, l.ln2_g, l.ln2_b, l.w_in, l.b_in, l.w_out, l.b_out});
  }
  out.insert(out.end(), {lnf_g, lnf_b, w_head});
  return out;
}

void TransformerModel::set_requires_grad(bool value) {
  for (auto& p : parameters()) p->requires_grad = value;
}

void TransformerModel::freeze() {
  set_requires_grad(false);
  frozen = true;
}

uint64_t TransformerModel::weight_checksum() const {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const auto& p : parameters()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->data.data());
    const size_t n = p->data.size() * sizeof(float);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

TransformerModel init_model(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Rng rng = Rng::fork(seed, 0x90de1);
  const double std = 0.02;
  TransformerModel m;
  m.config = config;
  const int d = config.d_model;
  const int ffn = config.ffn_mult * d;
  m.tok_emb = make_param({config.vocab_size, d}, rng, std);
  m.pos_emb = make_param({config.max_positions(), d}, rng, std);
  for (int l = 0; l < config.n_layers; ++l) {
    LayerWeights w;
    w.ln1_g = Tensor::full({d}, 1.0f, true);
    w.ln1_b = Tensor::zeros({d}, true);
    w.wq = make_param({d, d}, rng, std);
    w.bq = Tensor::zeros({d}, true);
    w.wk = make_param({d, d}, rng, std);
    w.bk = Tensor::zeros({d}, true);
    w.wv = make_param({d, d}, rng, std);
    w.bv = Tensor::zeros({d}, true);
    w.wo = make_param({d, d}, rng, std);
    w.bo = Tensor::zeros({d}, true);
    w.ln2_g = Tensor::full({d}, 1.0f, true);
    w.ln2_b = Tensor::zeros({d}, true);
    w.w_in = make_param({d, ffn}, rng, std);
    w.b_in = Tensor::zeros({ffn}, true);
    w.w_out = make_param({ffn, d}, rng, std);
    w.b_out = Tensor::zeros({d}, true);
    m.layers.push_back(std::move(w));
  }
  m.lnf_g = Tensor::full({d}, 1.0f, true);
  m.lnf_b = Tensor::zeros({d}, true);
  m.w_head = make_param({d, config.vocab_size}, rng, std);
  return m;
}

TransformerModel uniform_stub_model(const ModelConfig& config) {
  TransformerModel m = init_model(config, 0);
  for (auto& p : m.parameters()) std::fill(p->data.begin(), p->data.end(), 0.0f);
  m.freeze();
  return m;
}

namespace {

std::vector<int> position_ids(int pos_offset, int n) {
  std::vector<int> ids(static_cast<size_t>(n));
  std::iota(ids.begin(), ids.end(), pos_offset);
  return ids;
}

TensorRef block_ffn(const TransformerModel& model, const LayerWeights& w, Tape* tape,
                    const TensorRef& x) {
  auto f = layer_norm(tape, x, w.ln2_g, w.ln2_b);
  f = add_bias(tape, matmul(tape, f, w.w_in), w.b_in);
  f = gelu(tape, f);
  f = add_bias(tape, matmul(tape, f, w.w_out), w.b_out);
  return add(tape, x, f);
}

}  // namespace

TensorRef forward_hidden(const TransformerModel& model, std::span<const int> tokens,
                         Tape* tape, int pos_offset) {
  const int n = static_cast<int>(tokens.size());
  if (n > model.config.max_seq_len + 1) {
    throw LengthError("forward_hidden: sequence of " + std::to_string(n) +
                      " tokens exceeds max_seq_len " +
                      std::to_string(model.config.max_seq_len));
  }
  if (pos_offset < 0 || pos_offset + n > model.config.max_positions()) {
    throw LengthError("forward_hidden: position range out of bounds");
  }
  const bool causal = model.config.attention_mode == AttentionMode::causal;
  auto pos_ids = position_ids(pos_offset, n);
  auto x = add(tape, embedding_lookup(tape, model.tok_emb, tokens),
               embedding_lookup(tape, model.pos_emb, pos_ids));
  for (const auto& w : model.layers) {
    auto a = layer_norm(tape, x, w.ln1_g, w.ln1_b);
    auto q = add_bias(tape, matmul(tape, a, w.wq), w.bq);
    auto k = add_bias(tape, matmul(tape, a, w.wk), w.bk);
    auto v = add_bias(tape, matmul(tape, a, w.wv), w.bv);
    auto att = multihead_attention(tape, q, k, v, model.config.n_heads, causal);
    auto o = add_bias(tape, matmul(tape, att, w.wo), w.bo);
    x = add(tape, x, o);
    x = block_ffn(model, w, tape, x);
  }
  return layer_norm(tape, x, model.lnf_g, model.lnf_b);
}

TensorRef forward_logits(const TransformerModel& model, std::span<const int> tokens,
                         Tape* tape) {
  auto h = forward_hidden(model, tokens, tape);
  return matmul(tape, h, model.w_head);
}

KVCache make_cache(const TransformerModel& model) {
  return KVCache(model.config.n_layers, model.config.d_model, model.config.max_positions());
}

TensorRef forward_cached(const TransformerModel& model, std::span<const int> new_tokens,
                         KVCache& cache) {
  if (model.config.attention_mode != AttentionMode::causal) {
    throw ModeError("MLM cannot KV cache: bidirectional attention invalidates history");
  }
  const int k_new = static_cast<int>(new_tokens.size());
  const int base = cache.cached_len();
  if (base + k_new > cache.capacity()) {
    throw LengthError("forward_cached: cache would exceed capacity " +
                      std::to_string(cache.capacity()));
  }
  const int d = model.config.d_model;
  auto pos_ids = position_ids(base, k_new);
  auto x = add(nullptr, embedding_lookup(nullptr, model.tok_emb, new_tokens),
               embedding_lookup(nullptr, model.pos_emb, pos_ids));
  for (int li = 0; li < model.config.n_layers; ++li) {
    const auto& w = model.layers[static_cast<size_t>(li)];
    auto a = layer_norm(nullptr, x, w.ln1_g, w.ln1_b);
    auto q = add_bias(nullptr, matmul(nullptr, a, w.wq), w.bq);
    auto k = add_bias(nullptr, matmul(nullptr, a, w.wk), w.bk);
    auto v = add_bias(nullptr, matmul(nullptr, a, w.wv), w.bv);
    if (k_new > 0) {
      std::memcpy(cache.k_append_ptr(li), k->data.data(),
                  sizeof(float) * static_cast<size_t>(k_new) * d);
      std::memcpy(cache.v_append_ptr(li), v->data.data(),
                  sizeof(float) * static_cast<size_t>(k_new) * d);
    }
    auto att = Tensor::create({k_new, d});
    for (int i = 0; i < k_new; ++i) {
      detail::attention_row(q->row_ptr(i), cache.k_data(li), cache.v_data(li),
                            base + i + 1, d, model.config.n_heads, att->row_ptr(i),
                            nullptr);
    }
    auto o = add_bias(nullptr, matmul(nullptr, att, w.wo), w.bo);
    x = add(nullptr, x, o);
    x = block_ffn(model, w, nullptr, x);
  }
  cache.advance(k_new);
  return layer_norm(nullptr, x, model.lnf_g, model.lnf_b);
}

}  // namespace maria
