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

#include "maria/masking.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "maria/tokenizer.hpp"

namespace maria {

void MaskSet::validate() const {
  int prev = -1;
  for (int i : indices) {
    if (i < 0 || i >= seq_len) {
      throw ContractError("MaskSet: index " + std::to_string(i) + " out of range [0, " +
                          std::to_string(seq_len) + ")");
    }
    if (i <= prev) throw ContractError("MaskSet: indices must be strictly increasing");
    prev = i;
  }
}

bool MaskSet::contains(int i) const {
  return std::binary_search(indices.begin(), indices.end(), i);
}

std::string MaskSet::to_json() const {
  nlohmann::json j;
  j["indices"] = indices;
  j["seq_len"] = seq_len;
  return j.dump();
}

MaskSet MaskSet::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  MaskSet m;
  m.indices = j.at("indices").get<std::vector<int>>();
  m.seq_len = j.at("seq_len").get<int>();
  m.validate();
  return m;
}

void MaskRateSpec::validate() const {
  if (kind == Kind::beta) {
    if (alpha <= 0.0 || beta <= 0.0) throw ConfigError("Beta parameters must be positive");
  } else if (fixed_rate < 0.0 || fixed_rate > 1.0) {
    throw ConfigError("fixed mask rate must be in [0, 1]");
  }
}

MaskRateSpec MaskRateSpec::fixed(double rate) {
  MaskRateSpec s;
  s.kind = Kind::fixed;
  s.fixed_rate = rate;
  s.validate();
  return s;
}

double sample_mask_rate(const MaskRateSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.kind == MaskRateSpec::Kind::fixed) return spec.fixed_rate;
  return rng.beta(spec.alpha, spec.beta);
}

MaskSet sample_mask(int seq_len, double rate, Rng& rng, MaskMode mode) {
  if (seq_len < 1) throw ContractError("sample_mask: seq_len must be >= 1");
  if (rate < 0.0 || rate > 1.0) throw ContractError("sample_mask: rate must be in [0, 1]");
  MaskSet m;
  m.seq_len = seq_len;
  if (mode == MaskMode::bernoulli) {
    for (int i = 0; i < seq_len; ++i) {
      if (rng.uniform() < rate) m.indices.push_back(i);
    }
    return m;
  }
  const int count = static_cast<int>(std::lround(rate * seq_len));
  if (count == 0) return m;
  // Partial Fisher-Yates over the index range.
  std::vector<int> pool(static_cast<size_t>(seq_len));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < count; ++i) {
    int j = i + rng.uniform_int(seq_len - i);
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
  }
  m.indices.assign(pool.begin(), pool.begin() + count);
  std::sort(m.indices.begin(), m.indices.end());
  return m;
}

MaskedSequence apply_mask(std::span<const int> tokens, const MaskSet& mask) {
  if (mask.seq_len != static_cast<int>(tokens.size())) {
    throw ContractError("apply_mask: mask seq_len " + std::to_string(mask.seq_len) +
                        " does not match " + std::to_string(tokens.size()) + " tokens");
  }
  mask.validate();
  MaskedSequence out;
  out.tokens.assign(tokens.begin(), tokens.end());
  out.original_len = static_cast<int>(tokens.size());
  out.mask = mask;
  for (int i : mask.indices) out.tokens[static_cast<size_t>(i)] = ByteTokenizer::kMask;
  return out;
}

std::vector<int> restore_mask(const MaskedSequence& masked, std::span<const int> originals) {
  if (static_cast<int>(originals.size()) != masked.original_len) {
    throw ContractError("restore_mask: originals length mismatch");
  }
  std::vector<int> out = masked.tokens;
  for (int i : masked.mask.indices) out[static_cast<size_t>(i)] = originals[static_cast<size_t>(i)];
  return out;
}

WordMaskResult mask_words(std::string_view text, double fraction, Rng& rng) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw ContractError("mask_words: fraction must be in [0, 1]");
  }
  ByteTokenizer tok;
  WordMaskResult out;
  out.tokens = tok.encode(text);
  out.mask.seq_len = static_cast<int>(out.tokens.size());

  // Word spans as [begin, end) byte ranges of maximal alphanumeric runs.
  std::vector<std::pair<int, int>> words;
  int begin = -1;
  for (int i = 0; i <= static_cast<int>(text.size()); ++i) {
    const bool alnum =
        i < static_cast<int>(text.size()) &&
        std::isalnum(static_cast<unsigned char>(text[static_cast<size_t>(i)])) != 0;
    if (alnum && begin < 0) begin = i;
    if (!alnum && begin >= 0) {
      words.emplace_back(begin, i);
      begin = -1;
    }
  }
  out.word_count = static_cast<int>(words.size());
  if (words.empty()) {
    out.no_words = true;
    return out;
  }
  const int count = static_cast<int>(std::floor(fraction * static_cast<double>(words.size())));
  std::vector<int> order(words.size());
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < count; ++i) {
    int j = i + rng.uniform_int(static_cast<int>(words.size()) - i);
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  for (int wi = 0; wi < count; ++wi) {
    const auto [b, e] = words[static_cast<size_t>(order[static_cast<size_t>(wi)])];
    for (int i = b; i < e; ++i) out.mask.indices.push_back(i);
  }
  std::sort(out.mask.indices.begin(), out.mask.indices.end());
  for (int i : out.mask.indices) out.tokens[static_cast<size_t>(i)] = ByteTokenizer::kMask;
  return out;
}

std::vector<int> context_set(int i, const MaskSet& mask) {
  mask.validate();
  if (!mask.contains(i)) {
    throw ContractError("context_set: index " + std::to_string(i) + " is not masked");
  }
  std::vector<int> ctx;
  ctx.reserve(static_cast<size_t>(mask.seq_len));
  for (int j = 0; j < i; ++j) ctx.push_back(j);
  for (int j = i + 1; j < mask.seq_len; ++j) {
    if (!mask.contains(j)) ctx.push_back(j);
  }
  return ctx;
}

}  // namespace maria
