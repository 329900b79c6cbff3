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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maria/errors.hpp"

namespace maria {

/// Byte-level tokenizer: ids 0..255 are raw bytes, followed by the special
/// tokens. encode() never emits specials, so encode/decode round-trips any
/// byte string exactly and |encode(s)| equals the byte length of s.
class ByteTokenizer {
 public:
  static constexpr int kMask = 256;
  static constexpr int kBos = 257;
  static constexpr int kPad = 258;
  static constexpr int kEos = 259;
  static constexpr int kVocabSize = 260;

  static bool is_special(int id) { return id >= 256 && id < kVocabSize; }

  std::vector<int> encode(std::string_view text) const;

  /// Strict mode rejects special ids; with lossy=true they render as
  /// "[MASK]", "[BOS]", "[PAD]", "[EOS]".
  std::string decode(std::span<const int> ids, bool lossy = false) const;
};

}  // namespace maria
