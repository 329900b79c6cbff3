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

#include "maria/checkpoint.hpp"

#include <openssl/evp.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace maria {

using nlohmann::json;

std::vector<unsigned char> sha256_bytes(const unsigned char* data, size_t len) {
  std::vector<unsigned char> digest(32);
  unsigned int out_len = 0;
  if (EVP_Digest(data, len, digest.data(), &out_len, EVP_sha256(), nullptr) != 1 ||
      out_len != 32) {
    throw IntegrityError("sha256: digest computation failed");
  }
  return digest;
}

std::string sha256_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("sha256_file_hex: cannot read " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  auto digest = sha256_bytes(bytes.data(), bytes.size());
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (unsigned char b : digest) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xf]);
  }
  return out;
}

std::string checkpoint_kind_name(CheckpointKind kind) {
  switch (kind) {
    case CheckpointKind::ar: return "ar";
    case CheckpointKind::mlm: return "mlm";
    default: return "fusion";
  }
}

namespace {

CheckpointKind kind_from_name(const std::string& name) {
  if (name == "ar") return CheckpointKind::ar;
  if (name == "mlm") return CheckpointKind::mlm;
  if (name == "fusion") return CheckpointKind::fusion;
  throw IntegrityError("checkpoint: unknown kind '" + name + "'");
}

void append_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t read_u32(const std::string& buf, size_t off) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[off + static_cast<size_t>(i)]))
         << (8 * i);
  }
  return v;
}

void append_tensor_blob(std::string& buf, const Tensor& t) {
  // f32 little-endian. On the platforms this builds for, memcpy is LE
  // already; keep the explicit byte order anyway.
  for (float f : t.data) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    append_u32(buf, bits);
  }
}

void read_tensor_blob(const std::string& buf, size_t& off, Tensor& t) {
  for (float& f : t.data) {
    uint32_t bits = read_u32(buf, off);
    off += 4;
    std::memcpy(&f, &bits, 4);
  }
}

struct NamedTensor {
  std::string name;
  TensorRef tensor;
};

std::vector<NamedTensor> model_tensors(const TransformerModel& m) {
  std::vector<NamedTensor> out;
  out.push_back({"tok_emb", m.tok_emb});
  out.push_back({"pos_emb", m.pos_emb});
  for (size_t l = 0; l < m.layers.size(); ++l) {
    const auto& w = m.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    out.push_back({p + "ln1_g", w.ln1_g});
    out.push_back({p + "ln1_b", w.ln1_b});
    out.push_back({p + "wq", w.wq});
    out.push_back({p + "bq", w.bq});
    out.push_back({p + "wk", w.wk});
    out.push_back({p + "bk", w.bk});
    out.push_back({p + "wv", w.wv});
    out.push_back({p + "bv", w.bv});
    out.push_back({p + "wo", w.wo});
    out.push_back({p + "bo", w.bo});
    out.push_back({p + "ln2_g", w.ln2_g});
    out.push_back({p + "ln2_b", w.ln2_b});
    out.push_back({p + "w_in", w.w_in});
    out.push_back({p + "b_in", w.b_in});
    out.push_back({p + "w_out", w.w_out});
    out.push_back({p + "b_out", w.b_out});
  }
  out.push_back({"lnf_g", m.lnf_g});
  out.push_back({"lnf_b", m.lnf_b});
  out.push_back({"w_head", m.w_head});
  return out;
}

std::string assemble(const json& header, const std::vector<NamedTensor>& tensors) {
  std::string buf(kCheckpointMagic, sizeof(kCheckpointMagic));
  append_u32(buf, kCheckpointVersion);
  const std::string header_str = header.dump();
  append_u32(buf, static_cast<uint32_t>(header_str.size()));
  buf += header_str;
  for (const auto& nt : tensors) {
    nt.tensor->check_finite("checkpoint tensor " + nt.name);
    append_tensor_blob(buf, *nt.tensor);
  }
  auto digest = sha256_bytes(reinterpret_cast<const unsigned char*>(buf.data()), buf.size());
  buf.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  return buf;
}

void write_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("checkpoint: cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("checkpoint: short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw DataError("checkpoint: rename to " + path + " failed");
  }
}

struct ParsedCheckpoint {
  json header;
  std::string bytes;
  size_t blob_offset = 0;
};

ParsedCheckpoint parse_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot read " + path);
  ParsedCheckpoint pc;
  pc.bytes.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (pc.bytes.size() < sizeof(kCheckpointMagic) + 8 + 32) {
    throw IntegrityError("checkpoint: file truncated: " + path);
  }
  if (std::memcmp(pc.bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw IntegrityError("checkpoint: bad magic in " + path);
  }
  const uint32_t version = read_u32(pc.bytes, 8);
  if (version > kCheckpointVersion) {
    throw IntegrityError("checkpoint: format version " + std::to_string(version) +
                         " is newer than supported " + std::to_string(kCheckpointVersion));
  }
  const size_t payload = pc.bytes.size() - 32;
  auto digest = sha256_bytes(reinterpret_cast<const unsigned char*>(pc.bytes.data()), payload);
  if (std::memcmp(digest.data(), pc.bytes.data() + payload, 32) != 0) {
    throw IntegrityError("checkpoint: checksum mismatch in " + path);
  }
  const uint32_t header_len = read_u32(pc.bytes, 12);
  if (16 + static_cast<size_t>(header_len) > payload) {
    throw IntegrityError("checkpoint: header overruns file: " + path);
  }
  pc.header = json::parse(pc.bytes.substr(16, header_len));
  pc.blob_offset = 16 + header_len;
  return pc;
}

json tensor_manifest(const std::vector<NamedTensor>& tensors) {
  json arr = json::array();
  for (const auto& nt : tensors) {
    arr.push_back({{"name", nt.name}, {"shape", nt.tensor->shape}});
  }
  return arr;
}

void read_blobs(const ParsedCheckpoint& pc, const std::vector<NamedTensor>& tensors) {
  size_t off = pc.blob_offset;
  const json& manifest = pc.header.at("tensors");
  if (manifest.size() != tensors.size()) {
    throw IntegrityError("checkpoint: tensor count mismatch");
  }
  for (size_t i = 0; i < tensors.size(); ++i) {
    const auto expect_shape = manifest[i].at("shape").get<std::vector<int>>();
    if (manifest[i].at("name").get<std::string>() != tensors[i].name ||
        expect_shape != tensors[i].tensor->shape) {
      throw IntegrityError("checkpoint: tensor layout mismatch at " + tensors[i].name);
    }
    if (off + tensors[i].tensor->data.size() * 4 > pc.bytes.size() - 32) {
      throw IntegrityError("checkpoint: blob overruns file");
    }
    read_tensor_blob(pc.bytes, off, *tensors[i].tensor);
  }
}

}  // namespace

CheckpointKind checkpoint_kind(const std::string& path) {
  auto pc = parse_checkpoint(path);
  return kind_from_name(pc.header.at("kind").get<std::string>());
}

void save_checkpoint(const std::string& path, const TransformerModel& model,
                     CheckpointKind kind) {
  if (kind == CheckpointKind::fusion) {
    throw ContractError("save_checkpoint: a model cannot be saved as kind 'fusion'");
  }
  json header;
  header["kind"] = checkpoint_kind_name(kind);
  header["config"] = {{"vocab_size", model.config.vocab_size},
                      {"d_model", model.config.d_model},
                      {"n_layers", model.config.n_layers},
                      {"n_heads", model.config.n_heads},
                      {"max_seq_len", model.config.max_seq_len},
                      {"ffn_mult", model.config.ffn_mult},
                      {"attention_mode", attention_mode_name(model.config.attention_mode)}};
  const auto tensors = model_tensors(model);
  header["tensors"] = tensor_manifest(tensors);
  write_atomic(path, assemble(header, tensors));
}

void save_checkpoint(const std::string& path, const FusionHead& head) {
  json header;
  header["kind"] = "fusion";
  header["config"] = {{"d1", head.d1},
                      {"d2", head.d2},
                      {"vocab_size", head.vocab},
                      {"init_kind", head.init_kind},
                      {"train_steps", head.train_steps},
                      {"has_bias", head.has_bias}};
  std::vector<NamedTensor> tensors{{"w3", head.w3}};
  if (head.has_bias) tensors.push_back({"bias", head.bias});
  header["tensors"] = tensor_manifest(tensors);
  write_atomic(path, assemble(header, tensors));
}

TransformerModel load_model_checkpoint(const std::string& path, CheckpointKind expected) {
  auto pc = parse_checkpoint(path);
  const auto kind = kind_from_name(pc.header.at("kind").get<std::string>());
  if (kind != expected) {
    throw ContractError("checkpoint kind mismatch: expected '" +
                        checkpoint_kind_name(expected) + "', file " + path + " holds '" +
                        checkpoint_kind_name(kind) + "'");
  }
  const json& c = pc.header.at("config");
  ModelConfig config;
  config.vocab_size = c.at("vocab_size").get<int>();
  config.d_model = c.at("d_model").get<int>();
  config.n_layers = c.at("n_layers").get<int>();
  config.n_heads = c.at("n_heads").get<int>();
  config.max_seq_len = c.at("max_seq_len").get<int>();
  config.ffn_mult = c.at("ffn_mult").get<int>();
  config.attention_mode = attention_mode_from_name(c.at("attention_mode").get<std::string>());
  TransformerModel model = init_model(config, 0);
  read_blobs(pc, model_tensors(model));
  for (const auto& p : model.parameters()) p->check_finite("checkpoint " + path);
  return model;
}

FusionHead load_fusion_checkpoint(const std::string& path) {
  auto pc = parse_checkpoint(path);
  const auto kind = kind_from_name(pc.header.at("kind").get<std::string>());
  if (kind != CheckpointKind::fusion) {
    throw ContractError("checkpoint kind mismatch: expected 'fusion', file " + path +
                        " holds '" + checkpoint_kind_name(kind) + "'");
  }
  const json& c = pc.header.at("config");
  FusionHead head;
  head.d1 = c.at("d1").get<int>();
  head.d2 = c.at("d2").get<int>();
  head.vocab = c.at("vocab_size").get<int>();
  head.init_kind = c.at("init_kind").get<std::string>();
  head.train_steps = c.at("train_steps").get<int64_t>();
  head.has_bias = c.at("has_bias").get<bool>();
  head.w3 = Tensor::create({head.d1 + head.d2, head.vocab}, /*requires_grad=*/true);
  std::vector<NamedTensor> tensors{{"w3", head.w3}};
  if (head.has_bias) {
    head.bias = Tensor::create({head.vocab}, /*requires_grad=*/true);
    tensors.push_back({"bias", head.bias});
  }
  read_blobs(pc, tensors);
  return head;
}

FusionHead load_fusion_checkpoint(const std::string& path, const TransformerModel& ar_model,
                                  const TransformerModel& mlm_model) {
  FusionHead head = load_fusion_checkpoint(path);
  if (head.d1 != ar_model.config.d_model) {
    throw ContractError("fusion checkpoint d1 mismatch: expected " +
                        std::to_string(ar_model.config.d_model) + ", got " +
                        std::to_string(head.d1));
  }
  if (head.d2 != mlm_model.config.d_model) {
    throw ContractError("fusion checkpoint d2 mismatch: expected " +
                        std::to_string(mlm_model.config.d_model) + ", got " +
                        std::to_string(head.d2));
  }
  if (head.vocab != ar_model.config.vocab_size || head.vocab != mlm_model.config.vocab_size) {
    throw ContractError("fusion checkpoint vocab mismatch: expected " +
                        std::to_string(ar_model.config.vocab_size) + ", got " +
                        std::to_string(head.vocab));
  }
  return head;
}

}  // namespace maria
