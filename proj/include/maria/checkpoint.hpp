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

#include <string>
#include <vector>

#include "maria/fusion.hpp"
#include "maria/model.hpp"

namespace maria {

// Checkpoint layout, bit-exact:
//   [8-byte magic "MARIACKP"][u32 version][u32 header_len][JSON header]
//   [tensor blobs, little-endian f32, in header order][SHA-256 of all
//   preceding bytes]
// The JSON header carries the model kind, config, and named tensor shapes.

inline constexpr char kCheckpointMagic[8] = {'M', 'A', 'R', 'I', 'A', 'C', 'K', 'P'};
inline constexpr uint32_t kCheckpointVersion = 1;

enum class CheckpointKind { ar, mlm, fusion };

std::string checkpoint_kind_name(CheckpointKind kind);

/// Peeks at the header of a checkpoint file without loading tensors.
CheckpointKind checkpoint_kind(const std::string& path);

void save_checkpoint(const std::string& path, const TransformerModel& model,
                     CheckpointKind kind);
void save_checkpoint(const std::string& path, const FusionHead& head);

/// Kind mismatch raises ContractError; corrupt/truncated files raise
/// IntegrityError.
TransformerModel load_model_checkpoint(const std::string& path, CheckpointKind expected);
FusionHead load_fusion_checkpoint(const std::string& path);

/// Loads a fusion head and validates it against the two base models.
FusionHead load_fusion_checkpoint(const std::string& path, const TransformerModel& ar_model,
                                  const TransformerModel& mlm_model);

/// SHA-256 of a byte buffer, raw 32 bytes.
std::vector<unsigned char> sha256_bytes(const unsigned char* data, size_t len);
/// SHA-256 of a file, lowercase hex.
std::string sha256_file_hex(const std::string& path);

}  // namespace maria
