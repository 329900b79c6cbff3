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

#include <cmath>

#include "doctest.h"
#include "maria/model.hpp"

using namespace maria;

namespace {

ModelConfig tiny_config(AttentionMode mode) {
  ModelConfig c;
  c.d_model = 32;
  c.n_layers = 2;
  c.n_heads = 4;
  c.max_seq_len = 64;
  c.attention_mode = mode;
  return c;
}

std::vector<int> random_tokens(Rng& rng, int n) {
  std::vector<int> out(static_cast<size_t>(n));
  for (int& t : out) t = rng.uniform_int(256);
  return out;
}

double max_abs_row_diff(const TensorRef& a, int arow, const TensorRef& b, int brow) {
  double m = 0.0;
  for (int c = 0; c < a->cols(); ++c) {
    m = std::max(m, std::abs(static_cast<double>(a->at(arow, c)) - b->at(brow, c)));
  }
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("transformer");

TEST_CASE("config validation") {
  ModelConfig c = tiny_config(AttentionMode::causal);
  c.d_model = 30;  // not divisible by 4 heads
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config(AttentionMode::causal);
  c.vocab_size = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config(AttentionMode::causal);
  c.max_seq_len = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("causal prefix independence") {
  auto model = init_model(tiny_config(AttentionMode::causal), 3);
  Rng rng(17);
  auto tokens = random_tokens(rng, 12);
  auto full = forward_hidden(model, tokens);
  for (int i = 0; i < 12; ++i) {
    std::vector<int> prefix(tokens.begin(), tokens.begin() + i + 1);
    auto part = forward_hidden(model, prefix);
    CHECK(max_abs_row_diff(full, i, part, i) <= 1e-5);
  }
}

TEST_CASE("bidirectional sensitivity witness") {
  auto model = init_model(tiny_config(AttentionMode::bidirectional), 3);
  Rng rng(18);
  auto tokens = random_tokens(rng, 12);
  auto base = forward_hidden(model, tokens);
  auto perturbed_tokens = tokens;
  perturbed_tokens.back() = (perturbed_tokens.back() + 17) % 256;
  auto perturbed = forward_hidden(model, perturbed_tokens);
  CHECK(max_abs_row_diff(base, 0, perturbed, 0) > 1e-7);
}

TEST_CASE("forward is deterministic") {
  auto model = init_model(tiny_config(AttentionMode::causal), 9);
  Rng rng(19);
  auto tokens = random_tokens(rng, 20);
  auto a = forward_hidden(model, tokens);
  auto b = forward_hidden(model, tokens);
  CHECK(a->data == b->data);
}

TEST_CASE("overlong input raises a length error") {
  auto model = init_model(tiny_config(AttentionMode::causal), 1);
  Rng rng(20);
  auto tokens = random_tokens(rng, model.config.max_seq_len + 2);
  CHECK_THROWS_AS(forward_hidden(model, tokens), LengthError);
}

TEST_CASE("softmax of logits rows are distributions") {
  auto model = init_model(tiny_config(AttentionMode::causal), 4);
  Rng rng(21);
  auto tokens = random_tokens(rng, 10);
  auto logits = forward_logits(model, tokens);
  auto probs = softmax(nullptr, logits);
  for (int r = 0; r < probs->rows(); ++r) {
    double sum = 0.0;
    for (int c = 0; c < probs->cols(); ++c) sum += probs->at(r, c);
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("untrained model is near uniform entropy") {
  auto model = init_model(tiny_config(AttentionMode::causal), 5);
  Rng rng(22);
  auto tokens = random_tokens(rng, 16);
  auto probs = softmax(nullptr, forward_logits(model, tokens));
  const double ln_v = std::log(static_cast<double>(model.config.vocab_size));
  for (int r = 0; r < probs->rows(); ++r) {
    double entropy = 0.0;
    for (int c = 0; c < probs->cols(); ++c) {
      const double p = probs->at(r, c);
      if (p > 0) entropy -= p * std::log(p);
    }
    CHECK(entropy >= 0.9 * ln_v);
    CHECK(entropy <= 1.1 * ln_v);
  }
}

TEST_CASE("argmax invariant to constant logit shift") {
  auto model = init_model(tiny_config(AttentionMode::causal), 6);
  Rng rng(23);
  auto tokens = random_tokens(rng, 8);
  auto logits = forward_logits(model, tokens);
  for (int r = 0; r < logits->rows(); ++r) {
    int arg = 0;
    int arg_shifted = 0;
    for (int c = 1; c < logits->cols(); ++c) {
      if (logits->at(r, c) > logits->at(r, arg)) arg = c;
      if (logits->at(r, c) + 3.25f > logits->at(r, arg_shifted) + 3.25f) arg_shifted = c;
    }
    CHECK(arg == arg_shifted);
  }
}

TEST_CASE("cached forward equals full forward") {
  auto model = init_model(tiny_config(AttentionMode::causal), 7);
  Rng rng(24);

  SUBCASE("empty cache + full sequence is exact") {
    auto tokens = random_tokens(rng, 24);
    auto full = forward_hidden(model, tokens);
    KVCache cache = make_cache(model);
    auto cached = forward_cached(model, tokens, cache);
    CHECK(cache.cached_len() == 24);
    CHECK(full->data == cached->data);  // bit-identical kernels
  }

  SUBCASE("one token at a time") {
    auto tokens = random_tokens(rng, 10);
    auto full = forward_hidden(model, tokens);
    KVCache cache = make_cache(model);
    for (int i = 0; i < 10; ++i) {
      std::vector<int> one{tokens[static_cast<size_t>(i)]};
      auto h = forward_cached(model, one, cache);
      CHECK(max_abs_row_diff(full, i, h, 0) <= 1e-4);
    }
  }

  SUBCASE("k=0 is identity on the cache") {
    KVCache cache = make_cache(model);
    std::vector<int> prefix{1, 2, 3};
    forward_cached(model, prefix, cache);
    auto empty = forward_cached(model, std::vector<int>{}, cache);
    CHECK(cache.cached_len() == 3);
    CHECK(empty->rows() == 0);
  }

  SUBCASE("100 random prefix/continuation splits stay within 1e-4") {
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + rng.uniform_int(30);
      const int split = rng.uniform_int(n + 1);
      auto tokens = random_tokens(rng, n);
      auto full = forward_hidden(model, tokens);
      KVCache cache = make_cache(model);
      std::vector<int> prefix(tokens.begin(), tokens.begin() + split);
      std::vector<int> rest(tokens.begin() + split, tokens.end());
      forward_cached(model, prefix, cache);
      auto h = forward_cached(model, rest, cache);
      for (int i = split; i < n; ++i) {
        CHECK(max_abs_row_diff(full, i, h, i - split) <= 1e-4);
      }
    }
  }
}

TEST_CASE("bidirectional model cannot cache") {
  auto model = init_model(tiny_config(AttentionMode::bidirectional), 8);
  KVCache cache(model.config.n_layers, model.config.d_model, model.config.max_positions());
  std::vector<int> tokens{1, 2, 3};
  CHECK_THROWS_WITH_AS(forward_cached(model, tokens, cache),
                       doctest::Contains("MLM cannot KV cache"), ModeError);
}

TEST_CASE("cache capacity is enforced") {
  auto model = init_model(tiny_config(AttentionMode::causal), 10);
  KVCache cache = make_cache(model);
  Rng rng(30);
  auto tokens = random_tokens(rng, model.config.max_positions());
  forward_cached(model, tokens, cache);
  std::vector<int> one{5};
  CHECK_THROWS_AS(forward_cached(model, one, cache), LengthError);
}

TEST_CASE("frozen model checksum is stable") {
  auto model = init_model(tiny_config(AttentionMode::causal), 11);
  model.freeze();
  const uint64_t before = model.weight_checksum();
  Rng rng(31);
  auto tokens = random_tokens(rng, 8);
  Tape tape;
  forward_hidden(model, tokens, &tape);
  CHECK(tape.empty());  // frozen params record nothing
  CHECK(model.weight_checksum() == before);
}

TEST_CASE("uniform stub produces exactly zero logits") {
  auto stub = uniform_stub_model(tiny_config(AttentionMode::causal));
  std::vector<int> tokens{10, 20, 30};
  auto logits = forward_logits(stub, tokens);
  for (float z : logits->data) CHECK(z == 0.0f);
}

TEST_SUITE_END();
