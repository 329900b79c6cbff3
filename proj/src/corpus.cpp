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

#include "maria/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "maria/rng.hpp"

namespace maria {

std::vector<const Shard*> CorpusShards::train() const {
  std::vector<const Shard*> out;
  for (const auto& s : shards) {
    if (!s.holdout) out.push_back(&s);
  }
  return out;
}

std::vector<const Shard*> CorpusShards::holdout() const {
  std::vector<const Shard*> out;
  for (const auto& s : shards) {
    if (s.holdout) out.push_back(&s);
  }
  return out;
}

namespace {

void append_windows(CorpusShards& out, const std::string& text, int window,
                    const std::string& provenance) {
  ByteTokenizer tok;
  std::vector<int> ids = tok.encode(text);
  out.total_tokens += static_cast<int64_t>(ids.size());
  const int64_t count = static_cast<int64_t>(ids.size()) / window;
  for (int64_t w = 0; w < count; ++w) {
    Shard s;
    s.tokens.assign(ids.begin() + w * window, ids.begin() + (w + 1) * window);
    s.file = provenance;
    s.offset = w * window;
    out.shards.push_back(std::move(s));
  }
}

void assign_holdout(CorpusShards& corpus, double holdout_frac, uint64_t seed) {
  if (holdout_frac < 0.0 || holdout_frac > 1.0) {
    throw ConfigError("holdout_frac must be in [0, 1]");
  }
  const int64_t n = static_cast<int64_t>(corpus.shards.size());
  const int64_t k = static_cast<int64_t>(std::ceil(holdout_frac * static_cast<double>(n)));
  if (k == 0) return;
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::fork(seed, 0x401d);
  for (int64_t i = n - 1; i > 0; --i) {
    int64_t j = rng.uniform_int(static_cast<int>(i + 1));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  for (int64_t i = 0; i < k; ++i) corpus.shards[static_cast<size_t>(order[static_cast<size_t>(i)])].holdout = true;
}

}  // namespace

CorpusShards load_corpus(const std::vector<std::string>& paths, int max_seq_len,
                         double holdout_frac, uint64_t seed) {
  if (max_seq_len < 2) throw ConfigError("load_corpus: max_seq_len must be >= 2");
  CorpusShards corpus;
  corpus.window = max_seq_len;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_corpus: cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    append_windows(corpus, text, max_seq_len, path);
  }
  if (corpus.shards.empty()) {
    throw DataError("load_corpus: corpus too small, no full window of " +
                    std::to_string(max_seq_len) + " tokens");
  }
  assign_holdout(corpus, holdout_frac, seed);
  return corpus;
}

CorpusShards shard_text(const std::string& text, int max_seq_len, double holdout_frac,
                        uint64_t seed, const std::string& provenance) {
  if (max_seq_len < 2) throw ConfigError("shard_text: max_seq_len must be >= 2");
  CorpusShards corpus;
  corpus.window = max_seq_len;
  append_windows(corpus, text, max_seq_len, provenance);
  if (corpus.shards.empty()) {
    throw DataError("shard_text: corpus too small, no full window of " +
                    std::to_string(max_seq_len) + " tokens");
  }
  assign_holdout(corpus, holdout_frac, seed);
  return corpus;
}

}  // namespace maria
