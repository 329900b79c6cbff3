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
#include <string>
#include <vector>

#include "maria/probe.hpp"

namespace maria {

// Deterministic English-like text from a small probabilistic grammar.
// Sentences follow determiner/adjective/noun/verb templates over a closed
// word list with a skewed word distribution, so desk-scale models pick up
// real structure within a few thousand steps. Every byte also carries the
// grammatical role of the word it belongs to, which doubles as the token
// tagging task.

/// Byte classes for the tagging task.
enum SynthTag : int {
  kTagOther = 0,  // spaces, punctuation
  kTagDeterminer = 1,
  kTagAdjective = 2,
  kTagNoun = 3,
  kTagVerb = 4,
  kTagAdverb = 5,
  kTagNumber = 6,
};
inline constexpr int kSynthNumClasses = 7;

/// At least `min_bytes` of text (whole sentences).
std::string synth_corpus(size_t min_bytes, uint64_t seed);

/// Sentences with per-byte role labels.
std::vector<TaggedExample> synth_tagged(int n_sentences, uint64_t seed);

/// One sentence (used by both generators).
std::string synth_sentence(Rng& rng, std::vector<int>* labels = nullptr);

}  // namespace maria
