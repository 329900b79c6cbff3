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

#include "maria/synth.hpp"

#include <array>

#include "maria/tokenizer.hpp"

namespace maria {

namespace {

constexpr std::array<const char*, 6> kDeterminers = {"the", "a",   "one",
                                                     "his", "her", "its"};
constexpr std::array<const char*, 10> kAdjectives = {"red",  "blue", "tiny", "vast", "old",
                                                     "new",  "dark", "cold", "quiet",
                                                     "bright"};
constexpr std::array<const char*, 12> kNouns = {"fox",   "tree",  "ship",  "stone",
                                                "river", "cloud", "wolf",  "tower",
                                                "lamp",  "road",  "storm", "garden"};
constexpr std::array<const char*, 10> kVerbs = {"sees",  "finds", "holds", "makes", "lifts",
                                                "keeps", "gives", "takes", "moves", "marks"};
constexpr std::array<const char*, 6> kAdverbs = {"slowly", "gently", "boldly",
                                                 "calmly", "often",  "rarely"};

/// Zipf-ish pick: heavier mass on the first entries.
template <size_t N>
const char* pick(const std::array<const char*, N>& words, Rng& rng) {
  // P(i) proportional to 1/(i+1); sampled by inverse CDF over precomputed mass.
  double total = 0.0;
  for (size_t i = 0; i < N; ++i) total += 1.0 / static_cast<double>(i + 1);
  double u = rng.uniform() * total;
  for (size_t i = 0; i < N; ++i) {
    u -= 1.0 / static_cast<double>(i + 1);
    if (u <= 0.0) return words[i];
  }
  return words[N - 1];
}

void emit(std::string& text, std::vector<int>* labels, const std::string& word, int tag) {
  text += word;
  if (labels != nullptr) labels->insert(labels->end(), word.size(), tag);
}

void emit_space(std::string& text, std::vector<int>* labels) {
  emit(text, labels, " ", kTagOther);
}

}  // namespace

std::string synth_sentence(Rng& rng, std::vector<int>* labels) {
  std::string text;
  // Template: DET [ADJ] NOUN VERB DET [ADJ] NOUN [ADV] [NUM] '.'
  emit(text, labels, pick(kDeterminers, rng), kTagDeterminer);
  emit_space(text, labels);
  if (rng.uniform() < 0.6) {
    emit(text, labels, pick(kAdjectives, rng), kTagAdjective);
    emit_space(text, labels);
  }
  emit(text, labels, pick(kNouns, rng), kTagNoun);
  emit_space(text, labels);
  emit(text, labels, pick(kVerbs, rng), kTagVerb);
  emit_space(text, labels);
  emit(text, labels, pick(kDeterminers, rng), kTagDeterminer);
  emit_space(text, labels);
  if (rng.uniform() < 0.4) {
    emit(text, labels, pick(kAdjectives, rng), kTagAdjective);
    emit_space(text, labels);
  }
  emit(text, labels, pick(kNouns, rng), kTagNoun);
  if (rng.uniform() < 0.35) {
    emit_space(text, labels);
    emit(text, labels, pick(kAdverbs, rng), kTagAdverb);
  }
  if (rng.uniform() < 0.15) {
    emit_space(text, labels);
    std::string number = std::to_string(1 + rng.uniform_int(99));
    emit(text, labels, number, kTagNumber);
  }
  emit(text, labels, ".", kTagOther);
  return text;
}

std::string synth_corpus(size_t min_bytes, uint64_t seed) {
  Rng rng = Rng::fork(seed, 0x5e27);
  std::string text;
  text.reserve(min_bytes + 64);
  while (text.size() < min_bytes) {
    text += synth_sentence(rng);
    text += ' ';
  }
  return text;
}

std::vector<TaggedExample> synth_tagged(int n_sentences, uint64_t seed) {
  Rng rng = Rng::fork(seed, 0x7a66);
  ByteTokenizer tok;
  std::vector<TaggedExample> out;
  out.reserve(static_cast<size_t>(n_sentences));
  for (int i = 0; i < n_sentences; ++i) {
    TaggedExample ex;
    std::vector<int> labels;
    const std::string text = synth_sentence(rng, &labels);
    ex.tokens = tok.encode(text);
    ex.labels = std::move(labels);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace maria
