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
#include "maria/inference.hpp"

using namespace maria;

namespace {

struct Rig {
  TransformerModel ar;
  TransformerModel mlm;
  FusionHead head;
};

Rig make_rig(uint64_t seed, int d1 = 24, int d2 = 16) {
  ModelConfig ac;
  ac.d_model = d1;
  ac.n_layers = 2;
  ac.n_heads = 2;
  ac.max_seq_len = 64;
  ac.attention_mode = AttentionMode::causal;
  ModelConfig mc = ac;
  mc.d_model = d2;
  mc.attention_mode = AttentionMode::bidirectional;
  Rig rig{init_model(ac, seed), init_model(mc, seed + 1), {}};
  rig.ar.freeze();
  rig.mlm.freeze();
  rig.head = init_product(rig.ar, rig.mlm);
  return rig;
}

std::vector<int> random_tokens(Rng& rng, int n) {
  std::vector<int> out(static_cast<size_t>(n));
  for (int& t : out) t = rng.uniform_int(256);
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("inference");

TEST_CASE("sample_token greedy picks lowest argmax") {
  Rng rng(1);
  std::vector<float> logits{9, 1, 1};
  CHECK(sample_token(logits, SamplerSpec::greedy_spec(), rng) == 0);
  std::vector<float> tie{3, 7, 7};
  CHECK(sample_token(tie, SamplerSpec::greedy_spec(), rng) == 1);  // lowest id wins
}

TEST_CASE("temperature limit agrees with greedy") {
  Rng rng(2);
  Rng logits_rng(3);
  const auto tiny_t = SamplerSpec::temperature_spec(1e-6);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<float> logits(32);
    for (float& z : logits) z = static_cast<float>(logits_rng.normal() * 3.0);
    const int greedy = sample_token(logits, SamplerSpec::greedy_spec(), rng);
    const int cooled = sample_token(logits, tiny_t, rng);
    CHECK(greedy == cooled);
  }
}

TEST_CASE("temperature zero is expressed as greedy, not division") {
  CHECK(SamplerSpec::temperature_spec(0.0).kind == SamplerSpec::Kind::greedy);
  SamplerSpec bad;
  bad.kind = SamplerSpec::Kind::temperature;
  bad.temperature = 0.0;
  Rng rng(4);
  std::vector<float> logits{1, 2};
  CHECK_THROWS_AS(sample_token(logits, bad, rng), ContractError);
}

TEST_CASE("nucleus p=1 equals plain temperature sampling on a shared stream") {
  Rng rng_a(5);
  Rng rng_b(5);
  Rng logits_rng(6);
  const auto temp = SamplerSpec::temperature_spec(0.9);
  const auto nuc = SamplerSpec::nucleus_spec(1.0, 0.9);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<float> logits(64);
    for (float& z : logits) z = static_cast<float>(logits_rng.normal() * 2.0);
    CHECK(sample_token(logits, temp, rng_a) == sample_token(logits, nuc, rng_b));
  }
}

TEST_CASE("nucleus truncation keeps only the top mass") {
  Rng rng(7);
  std::vector<float> logits{10.0f, 9.5f, -20.0f, -20.0f};
  const auto nuc = SamplerSpec::nucleus_spec(0.9, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int tok = sample_token(logits, nuc, rng);
    CHECK((tok == 0 || tok == 1));
  }
}

TEST_CASE("infill with empty mask returns input with zero forwards") {
  auto rig = make_rig(10);
  Rng rng(11);
  auto tokens = random_tokens(rng, 16);
  MaskSet empty;
  empty.seq_len = 16;
  InfillStats stats;
  auto out = infill_cached(rig.ar, rig.mlm, rig.head, tokens, empty,
                           SamplerSpec::greedy_spec(), rng, &stats);
  CHECK(out == tokens);
  CHECK(stats.ar_forward_calls == 0);
  CHECK(stats.mlm_forward_calls == 0);
}

TEST_CASE("infill input-consistency errors") {
  auto rig = make_rig(12);
  Rng rng(13);
  auto tokens = random_tokens(rng, 8);
  tokens[3] = ByteTokenizer::kMask;  // stray MASK not in the set
  MaskSet empty;
  empty.seq_len = 8;
  CHECK_THROWS_AS(infill_cached(rig.ar, rig.mlm, rig.head, tokens, empty,
                                SamplerSpec::greedy_spec(), rng),
                  ContractError);
  MaskSet m;
  m.seq_len = 8;
  m.indices = {2};
  auto clean = random_tokens(rng, 8);  // position 2 not masked
  CHECK_THROWS_AS(infill_cached(rig.ar, rig.mlm, rig.head, clean, m,
                                SamplerSpec::greedy_spec(), rng),
                  ContractError);
}

TEST_CASE("greedy cached equals greedy uncached on 100 random cases") {
  auto rig = make_rig(14);
  Rng rng(15);
  for (double rate : {0.1, 0.5, 0.9}) {
    for (int trial = 0; trial < 34; ++trial) {
      const int n = 4 + rng.uniform_int(40);
      auto clean = random_tokens(rng, n);
      auto mask = sample_mask(n, rate, rng, MaskMode::exact_count);
      if (mask.empty()) continue;
      auto masked = apply_mask(clean, mask);
      Rng r1(0), r2(0);
      auto cached = infill_cached(rig.ar, rig.mlm, rig.head, masked.tokens, mask,
                                  SamplerSpec::greedy_spec(), r1);
      auto uncached = infill_uncached(rig.ar, rig.mlm, rig.head, masked.tokens, mask,
                                      SamplerSpec::greedy_spec(), r2);
      CHECK(cached == uncached);
    }
  }
}

TEST_CASE("stochastic samplers agree across paths on a shared stream") {
  auto rig = make_rig(16);
  Rng rng(17);
  for (const auto& sampler :
       {SamplerSpec::temperature_spec(1.0), SamplerSpec::nucleus_spec(0.8, 0.9)}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 8 + rng.uniform_int(24);
      auto clean = random_tokens(rng, n);
      auto mask = sample_mask(n, 0.5, rng, MaskMode::exact_count);
      auto masked = apply_mask(clean, mask);
      Rng r1(99 + trial), r2(99 + trial);
      auto cached =
          infill_cached(rig.ar, rig.mlm, rig.head, masked.tokens, mask, sampler, r1);
      auto uncached =
          infill_uncached(rig.ar, rig.mlm, rig.head, masked.tokens, mask, sampler, r2);
      CHECK(cached == uncached);
    }
  }
}

TEST_CASE("all-masked input decodes position 0 from the BOS state") {
  auto rig = make_rig(18);
  Rng rng(19);
  const int n = 6;
  std::vector<int> all_mask(n, ByteTokenizer::kMask);
  MaskSet mask;
  mask.seq_len = n;
  for (int i = 0; i < n; ++i) mask.indices.push_back(i);
  InfillStats stats;
  auto out = infill_cached(rig.ar, rig.mlm, rig.head, all_mask, mask,
                           SamplerSpec::greedy_spec(), rng, &stats);
  for (int t : out) CHECK(t != ByteTokenizer::kMask);

  // Manual first step: BOS-position AR state + mlm_hidden[0] through w3.
  auto mlm_h = forward_hidden(rig.mlm, all_mask);
  std::vector<int> bos{ByteTokenizer::kBos};
  auto ar_h = forward_hidden(rig.ar, bos);
  auto logits = fusion_logits_row(rig.head, ar_h->row_ptr(0), mlm_h->row_ptr(0));
  Rng r2(1);
  CHECK(out[0] == sample_token(logits, SamplerSpec::greedy_spec(), r2));
}

TEST_CASE("infill preserves unmasked tokens and accounts forwards") {
  auto rig = make_rig(20);
  Rng rng(21);
  const int n = 32;
  auto clean = random_tokens(rng, n);
  auto mask = sample_mask(n, 0.4, rng, MaskMode::exact_count);
  auto masked = apply_mask(clean, mask);
  InfillStats stats;
  auto out = infill_cached(rig.ar, rig.mlm, rig.head, masked.tokens, mask,
                           SamplerSpec::greedy_spec(), rng, &stats);
  for (int i = 0; i < n; ++i) {
    if (!mask.contains(i)) CHECK(out[static_cast<size_t>(i)] == clean[static_cast<size_t>(i)]);
    CHECK(out[static_cast<size_t>(i)] != ByteTokenizer::kMask);
  }
  // One MLM pass; one cache-advancing AR call per masked index; every
  // position up to the last mask (plus BOS) enters the cache exactly once.
  CHECK(stats.mlm_forward_calls == 1);
  CHECK(stats.ar_forward_calls == static_cast<int>(mask.size()));
  CHECK(stats.ar_tokens_processed == mask.indices.back() + 1);
}

TEST_CASE("mlm_iterative_decode basics") {
  auto rig = make_rig(22);
  Rng rng(23);

  SUBCASE("empty mask is identity") {
    auto tokens = random_tokens(rng, 10);
    MaskSet empty;
    empty.seq_len = 10;
    InfillStats stats;
    auto out = mlm_iterative_decode(rig.mlm, tokens, empty, SamplerSpec::greedy_spec(), rng,
                                    &stats);
    CHECK(out == tokens);
    CHECK(stats.mlm_forward_calls == 0);
  }

  SUBCASE("single masked position equals one forward argmax") {
    auto clean = random_tokens(rng, 12);
    MaskSet m;
    m.seq_len = 12;
    m.indices = {5};
    auto masked = apply_mask(clean, m);
    InfillStats stats;
    auto out = mlm_iterative_decode(rig.mlm, masked.tokens, m, SamplerSpec::greedy_spec(),
                                    rng, &stats);
    CHECK(stats.mlm_forward_calls == 1);

    auto hidden = forward_hidden(rig.mlm, masked.tokens);
    const int v = rig.mlm.config.vocab_size;
    std::vector<float> logits(static_cast<size_t>(v));
    for (int j = 0; j < v; ++j) {
      logits[static_cast<size_t>(j)] = static_cast<float>(detail::dot_strided(
          hidden->row_ptr(5), 1, rig.mlm.w_head->data.data() + j, v, rig.mlm.config.d_model));
    }
    Rng r(0);
    CHECK(out[5] == sample_token(logits, SamplerSpec::greedy_spec(), r));
  }

  SUBCASE("forward count equals mask size") {
    auto clean = random_tokens(rng, 24);
    auto mask = sample_mask(24, 0.5, rng, MaskMode::exact_count);
    auto masked = apply_mask(clean, mask);
    InfillStats stats;
    mlm_iterative_decode(rig.mlm, masked.tokens, mask, SamplerSpec::greedy_spec(), rng,
                         &stats);
    CHECK(stats.mlm_forward_calls == static_cast<int>(mask.size()));
  }
}

TEST_CASE("generate_unconditional basics") {
  auto rig = make_rig(24);
  SUBCASE("greedy generation is deterministic") {
    Rng r1(1), r2(2);  // greedy consumes no draws, seeds must not matter
    auto a = generate_unconditional(rig.ar, 20, SamplerSpec::greedy_spec(), r1);
    auto b = generate_unconditional(rig.ar, 20, SamplerSpec::greedy_spec(), r2);
    CHECK(a == b);
    CHECK(a.size() == 20);
  }
  SUBCASE("length zero is empty") {
    Rng rng(3);
    CHECK(generate_unconditional(rig.ar, 0, SamplerSpec::greedy_spec(), rng).empty());
  }
  SUBCASE("overlong request is rejected") {
    Rng rng(4);
    CHECK_THROWS_AS(generate_unconditional(rig.ar, rig.ar.config.max_seq_len + 1,
                                           SamplerSpec::greedy_spec(), rng),
                    LengthError);
  }
}

TEST_CASE("anneal schedule endpoints and trace length") {
  AnnealSchedule s;
  s.iterations = 5;
  auto t = s.temperatures();
  CHECK(t.size() == 5);
  CHECK(t.front() == doctest::Approx(1.0));
  CHECK(t.back() == doctest::Approx(0.0));
  for (size_t i = 1; i < t.size(); ++i) CHECK(t[i] <= t[i - 1]);

  auto rig = make_rig(25);
  SUBCASE("zero iterations equals the initial AR sample") {
    AnnealSchedule s0;
    s0.iterations = 0;
    Rng r1(7);
    auto result = simulated_anneal(rig.ar, rig.mlm, rig.head, 16, s0, r1);
    Rng r2(7);
    auto direct = generate_unconditional(rig.ar, 16, SamplerSpec::temperature_spec(1.0), r2);
    CHECK(result.tokens == direct);
    CHECK(result.trace.size() == 1);
  }
  SUBCASE("trace length is iterations + 1 and final output has no masks") {
    AnnealSchedule s3;
    s3.iterations = 3;
    Rng rng(8);
    auto result = simulated_anneal(rig.ar, rig.mlm, rig.head, 20, s3, rng);
    CHECK(result.trace.size() == 4);
    for (int tok : result.tokens) CHECK(tok != ByteTokenizer::kMask);
    CHECK(result.trace.back() == result.tokens);
  }
}

TEST_CASE("mlm hidden staleness is by design") {
  // The MLM pass happens once: filling earlier masks must not change the MLM
  // features used for later masks; instrumentation already counts 1 forward.
  auto rig = make_rig(26);
  Rng rng(27);
  auto clean = random_tokens(rng, 20);
  auto mask = sample_mask(20, 0.5, rng, MaskMode::exact_count);
  auto masked = apply_mask(clean, mask);
  InfillStats stats;
  infill_cached(rig.ar, rig.mlm, rig.head, masked.tokens, mask, SamplerSpec::greedy_spec(),
                rng, &stats);
  CHECK(stats.mlm_forward_calls == 1);
}

TEST_SUITE_END();
