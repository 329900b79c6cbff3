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

#include "maria/tokenizer.hpp"

namespace maria {

std::vector<int> ByteTokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(static_cast<int>(c));
  return ids;
}

std::string ByteTokenizer::decode(std::span<const int> ids, bool lossy) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id >= 0 && id < 256) {
      out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
      continue;
    }
    if (!is_special(id)) {
      throw IndexError("decode: token id " + std::to_string(id) + " out of range");
    }
    if (!lossy) {
      throw ContractError("decode: special token id " + std::to_string(id) +
                          " in strict mode (pass lossy=true to render it)");
    }
    switch (id) {
      case kMask: out += "[MASK]"; break;
      case kBos: out += "[BOS]"; break;
      case kPad: out += "[PAD]"; break;
      default: out += "[EOS]"; break;
    }
  }
  return out;
}

}  // namespace maria
