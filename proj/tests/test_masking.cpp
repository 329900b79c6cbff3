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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "maria/masking.hpp"
#include "maria/tokenizer.hpp"
#include "oracles.hpp"

using namespace maria;
namespace mt = maria::testing;

TEST_SUITE_BEGIN("masking");

TEST_CASE("fixed rate sampling") {
  Rng rng(1);
  auto spec = MaskRateSpec::fixed(0.3);
  CHECK(sample_mask_rate(spec, rng) == 0.3);
}

TEST_CASE("beta(2.5, 2.5) moments over 100k draws") {
  Rng rng(2);
  MaskRateSpec spec;  // beta default
  double sum = 0.0, sumsq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double r = sample_mask_rate(spec, rng);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    sum += r;
    sumsq += r * r;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(mean >= 0.495);
  CHECK(mean <= 0.505);
  // alpha*beta / ((alpha+beta)^2 (alpha+beta+1)) = 6.25 / (25 * 6) = 0.0416667
  CHECK(std::abs(var - 0.0416667) <= 0.002);
}

TEST_CASE("beta sampler passes a KS test against the quadrature CDF") {
  // CDF oracle: Simpson integration of the Beta(2.5, 2.5) density.
  const double alpha = 2.5, beta_p = 2.5;
  // log Beta(2.5, 2.5) via lgamma.
  const double log_norm = std::lgamma(alpha) + std::lgamma(beta_p) - std::lgamma(alpha + beta_p);
  auto pdf = [&](double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return std::exp((alpha - 1) * std::log(x) + (beta_p - 1) * std::log(1 - x) - log_norm);
  };
  auto cdf = [&](double x) { return mt::simpson(pdf, 0.0, x, 400); };

  Rng rng(3);
  const int n = 10000;
  std::vector<double> samples(n);
  MaskRateSpec spec;
  for (double& s : samples) s = sample_mask_rate(spec, rng);
  std::sort(samples.begin(), samples.end());
  double d_stat = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = cdf(samples[static_cast<size_t>(i)]);
    d_stat = std::max(d_stat, std::abs(f - static_cast<double>(i + 1) / n));
    d_stat = std::max(d_stat, std::abs(f - static_cast<double>(i) / n));
  }
  // Asymptotic critical value at significance 0.01: 1.628 / sqrt(n).
  CHECK(d_stat < 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("sample_mask edge rates") {
  Rng rng(4);
  CHECK(sample_mask(50, 0.0, rng).empty());
  auto all = sample_mask(50, 1.0, rng);
  CHECK(static_cast<int>(all.size()) == 50);
  for (int i = 0; i < 50; ++i) CHECK(all.indices[static_cast<size_t>(i)] == i);
}

TEST_CASE("exact-count mode always hits the count") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = sample_mask(100, 0.5, rng, MaskMode::exact_count);
    CHECK(m.size() == 50);
    m.validate();
  }
}

TEST_CASE("bernoulli mode has the right mean") {
  Rng rng(6);
  int64_t total = 0;
  for (int trial = 0; trial < 500; ++trial) {
    total += static_cast<int64_t>(sample_mask(100, 0.3, rng, MaskMode::bernoulli).size());
  }
  CHECK(std::abs(static_cast<double>(total) / 500.0 - 30.0) < 2.0);
}

TEST_CASE("apply_mask basics and round trip") {
  std::vector<int> tokens{10, 20, 30, 40, 50};

  MaskSet empty;
  empty.seq_len = 5;
  auto same = apply_mask(tokens, empty);
  CHECK(same.tokens == tokens);

  MaskSet full;
  full.seq_len = 5;
  full.indices = {0, 1, 2, 3, 4};
  auto all = apply_mask(tokens, full);
  for (int t : all.tokens) CHECK(t == ByteTokenizer::kMask);

  MaskSet some;
  some.seq_len = 5;
  some.indices = {1, 3};
  auto masked = apply_mask(tokens, some);
  CHECK(masked.tokens == std::vector<int>{10, ByteTokenizer::kMask, 30, ByteTokenizer::kMask, 50});
  CHECK(restore_mask(masked, tokens) == tokens);

  MaskSet bad;
  bad.seq_len = 5;
  bad.indices = {5};
  CHECK_THROWS_AS(apply_mask(tokens, bad), ContractError);
}

TEST_CASE("mask invariant: MASK exactly at masked indices") {
  Rng rng(7);
  std::vector<int> tokens(64);
  for (int& t : tokens) t = rng.uniform_int(256);
  auto m = sample_mask(64, 0.4, rng);
  auto masked = apply_mask(tokens, m);
  for (int i = 0; i < 64; ++i) {
    CHECK((masked.tokens[static_cast<size_t>(i)] == ByteTokenizer::kMask) == m.contains(i));
  }
}

TEST_CASE("mask_words fraction and span coverage") {
  SUBCASE("half of four words") {
    Rng rng(8);
    auto r = mask_words("a b c d", 0.5, rng);
    CHECK(r.word_count == 4);
    // exactly 2 single-letter words => 2 masked byte positions
    CHECK(r.mask.size() == 2);
  }
  SUBCASE("fraction zero") {
    Rng rng(9);
    auto r = mask_words("alpha beta", 0.0, rng);
    CHECK(r.mask.empty());
    CHECK_FALSE(r.no_words);
  }
  SUBCASE("no words warns") {
    Rng rng(10);
    auto r = mask_words(" .,;! ", 0.5, rng);
    CHECK(r.no_words);
    CHECK(r.mask.empty());
  }
  SUBCASE("masked positions exactly cover selected words") {
    // Oracle: re-scan the text for word spans and check every masked index
    // falls in a span that is fully masked, and no span is partially masked.
    const std::string text = "the quick brown fox jumps over 42 lazy dogs";
    Rng rng(11);
    auto r = mask_words(text, 0.5, rng);
    std::vector<std::pair<int, int>> spans;
    int b = -1;
    for (int i = 0; i <= static_cast<int>(text.size()); ++i) {
      const bool alnum = i < static_cast<int>(text.size()) &&
                         std::isalnum(static_cast<unsigned char>(text[static_cast<size_t>(i)]));
      if (alnum && b < 0) b = i;
      if (!alnum && b >= 0) {
        spans.emplace_back(b, i);
        b = -1;
      }
    }
    CHECK(r.word_count == static_cast<int>(spans.size()));
    int fully_masked_words = 0;
    for (const auto& [begin, end] : spans) {
      int masked_count = 0;
      for (int i = begin; i < end; ++i) masked_count += r.mask.contains(i) ? 1 : 0;
      CHECK((masked_count == 0 || masked_count == end - begin));  // no partial words
      if (masked_count == end - begin) ++fully_masked_words;
    }
    CHECK(fully_masked_words == static_cast<int>(std::floor(0.5 * spans.size())));
    // Nothing outside word spans is masked.
    for (int i : r.mask.indices) {
      bool in_span = false;
      for (const auto& [begin, end] : spans) in_span |= (i >= begin && i < end);
      CHECK(in_span);
    }
  }
}

TEST_CASE("context_set definition") {
  MaskSet m;
  m.seq_len = 5;
  m.indices = {2};
  CHECK(context_set(2, m) == std::vector<int>{0, 1, 3, 4});

  m.indices = {1, 3};
  CHECK(context_set(1, m) == std::vector<int>{0, 2, 4});

  m.indices = {0, 1, 2, 3, 4};
  CHECK(context_set(0, m).empty());

  m.indices = {1, 3};
  CHECK_THROWS_AS(context_set(2, m), ContractError);
}

TEST_CASE("context_set properties") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + rng.uniform_int(30);
    auto m = sample_mask(n, 0.3 + 0.4 * rng.uniform(), rng);
    if (m.empty()) continue;
    for (int i : m.indices) {
      auto ctx = context_set(i, m);
      CHECK(!std::binary_search(ctx.begin(), ctx.end(), i));
      for (int j = 0; j < i; ++j) CHECK(std::binary_search(ctx.begin(), ctx.end(), j));
      for (int j : m.indices) {
        if (j > i) CHECK(!std::binary_search(ctx.begin(), ctx.end(), j));
      }
    }
    // Monotone information growth: for i < j in m, c(j) restricted to < j
    // contains c(i) restricted to < j plus i itself.
    for (size_t a = 0; a + 1 < m.indices.size(); ++a) {
      const int i = m.indices[a];
      const int j = m.indices[a + 1];
      auto ci = context_set(i, m);
      auto cj = context_set(j, m);
      for (int p : ci) {
        if (p < j) CHECK(std::binary_search(cj.begin(), cj.end(), p));
      }
      CHECK(std::binary_search(cj.begin(), cj.end(), i));
    }
  }
}

TEST_CASE("mask set json round trip") {
  MaskSet m;
  m.seq_len = 10;
  m.indices = {1, 4, 7};
  auto parsed = MaskSet::from_json(m.to_json());
  CHECK(parsed.indices == m.indices);
  CHECK(parsed.seq_len == m.seq_len);
}

TEST_SUITE_END();
