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
#include <string_view>
#include <vector>

#include "maria/errors.hpp"
#include "maria/rng.hpp"

namespace maria {

/// Sorted, unique masked indices over a sequence of seq_len tokens.
struct MaskSet {
  std::vector<int> indices;
  int seq_len = 0;

  void validate() const;
  bool contains(int i) const;
  size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }

  std::string to_json() const;
  static MaskSet from_json(const std::string& text);
};

/// How per-sequence masking rates are drawn.
struct MaskRateSpec {
  enum class Kind { beta, fixed };
  Kind kind = Kind::beta;
  double alpha = 2.5;
  double beta = 2.5;
  double fixed_rate = 0.3;

  void validate() const;
  static MaskRateSpec fixed(double rate);
  static MaskRateSpec beta_default() { return MaskRateSpec{}; }
};

double sample_mask_rate(const MaskRateSpec& spec, Rng& rng);

/// exact_count picks round(rate * seq_len) positions without replacement
/// (reproducible evaluation); bernoulli includes each position independently
/// with probability rate (training diversity).
enum class MaskMode { exact_count, bernoulli };

MaskSet sample_mask(int seq_len, double rate, Rng& rng,
                    MaskMode mode = MaskMode::exact_count);

/// Token sequence with MASK substituted at the masked indices.
struct MaskedSequence {
  std::vector<int> tokens;
  int original_len = 0;
  MaskSet mask;
};

MaskedSequence apply_mask(std::span<const int> tokens, const MaskSet& mask);

/// Restores the original tokens at the masked positions.
std::vector<int> restore_mask(const MaskedSequence& masked, std::span<const int> originals);

/// Word-level masking: words are maximal alphanumeric runs; floor(fraction *
/// word_count) words are chosen uniformly and every byte-token of each chosen
/// word becomes MASK. Texts with no words yield an empty mask and set the
/// warning flag.
struct WordMaskResult {
  std::vector<int> tokens;
  MaskSet mask;
  int word_count = 0;
  bool no_words = false;
};

WordMaskResult mask_words(std::string_view text, double fraction, Rng& rng);

/// The conditioning set c(i, m) = {0..i-1} union {j > i : j not in m}.
/// i must be a masked index.
std::vector<int> context_set(int i, const MaskSet& mask);

}  // namespace maria
