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

#include "maria/errors.hpp"
#include "maria/tokenizer.hpp"

namespace maria {

/// One fixed-length token window cut from a source file.
struct Shard {
  std::vector<int> tokens;
  std::string file;
  int64_t offset = 0;  // byte offset of the window start within the file
  bool holdout = false;
};

/// Corpus split into non-overlapping max_seq_len windows with a deterministic
/// train/holdout assignment. holdout and train never share a window.
struct CorpusShards {
  std::vector<Shard> shards;
  int window = 0;
  int64_t total_tokens = 0;

  std::vector<const Shard*> train() const;
  std::vector<const Shard*> holdout() const;
};

/// Reads and tokenizes files, chunks into windows of max_seq_len (tail
/// remainder dropped), and assigns ceil(holdout_frac * count) windows to the
/// holdout split with an rng seeded by `seed`.
CorpusShards load_corpus(const std::vector<std::string>& paths, int max_seq_len,
                         double holdout_frac, uint64_t seed);

/// Same, over an in-memory text blob (used by tests and the python module).
CorpusShards shard_text(const std::string& text, int max_seq_len, double holdout_frac,
                        uint64_t seed, const std::string& provenance = "<memory>");

}  // namespace maria
