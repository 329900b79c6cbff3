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

#include "maria/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace maria {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<int> bos_shifted_input(std::span<const int> tokens) {
  std::vector<int> input(tokens.size());
  input[0] = ByteTokenizer::kBos;
  for (size_t i = 1; i < tokens.size(); ++i) input[i] = tokens[i - 1];
  return input;
}

double sequence_ar_loss(const TransformerModel& model, std::span<const int> tokens,
                        Tape* tape, float loss_scale) {
  auto input = bos_shifted_input(tokens);
  auto logits = forward_logits(model, input, tape);
  std::vector<float> weights(tokens.size(), 1.0f);
  CrossEntropyInfo info;
  auto loss = cross_entropy(tape, logits, tokens, weights, &info);
  if (tape != nullptr && loss->requires_grad) {
    auto scaled = scale(tape, loss, loss_scale);
    tape->backward(scaled);
  }
  return info.loss;
}

struct MaskedLoss {
  double loss = 0.0;
  bool empty_mask = false;
};

MaskedLoss sequence_mlm_loss(const TransformerModel& model, std::span<const int> tokens,
                             const MaskSet& mask, Tape* tape, float loss_scale) {
  MaskedLoss out;
  if (mask.empty()) {
    out.empty_mask = true;
    return out;
  }
  MaskedSequence masked = apply_mask(tokens, mask);
  auto logits = forward_logits(model, masked.tokens, tape);
  std::vector<float> weights(tokens.size(), 0.0f);
  for (int i : mask.indices) weights[static_cast<size_t>(i)] = 1.0f;
  CrossEntropyInfo info;
  auto loss = cross_entropy(tape, logits, tokens, weights, &info);
  if (tape != nullptr && loss->requires_grad) {
    auto scaled = scale(tape, loss, loss_scale);
    tape->backward(scaled);
  }
  out.loss = info.loss;
  return out;
}

MaskedLoss sequence_fusion_loss(const TransformerModel& ar_model,
                                const TransformerModel& mlm_model, const FusionHead& head,
                                std::span<const int> tokens, const MaskSet& mask,
                                Tape* tape, float loss_scale) {
  MaskedLoss out;
  if (mask.empty()) {
    out.empty_mask = true;
    return out;
  }
  MaskedSequence masked = apply_mask(tokens, mask);
  AlignedBatch aligned = align_hidden(tokens, masked.tokens, ar_model, mlm_model);
  CrossEntropyInfo info;
  auto loss = maria_loss(tape, head, aligned, &info);
  if (tape != nullptr && loss->requires_grad) {
    auto scaled = scale(tape, loss, loss_scale);
    tape->backward(scaled);
  }
  out.loss = info.loss;
  return out;
}

std::vector<const Shard*> holdout_subset(const CorpusShards& corpus, int max_sequences) {
  auto holdout = corpus.holdout();
  if (static_cast<int>(holdout.size()) > max_sequences) {
    holdout.resize(static_cast<size_t>(max_sequences));
  }
  return holdout;
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("TrainConfig: steps must be >= 1");
  if (batch_size < 1 || micro_batch < 1) {
    throw ConfigError("TrainConfig: batch_size and micro_batch must be >= 1");
  }
  if (batch_size % micro_batch != 0) {
    throw ConfigError("TrainConfig: batch_size must be divisible by micro_batch");
  }
  if (lr <= 0.0) throw ConfigError("TrainConfig: lr must be positive");
  mask_rate_spec.validate();
}

double TrainLog::final_holdout() const {
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    if (it->holdout.has_value()) return *it->holdout;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double TrainLog::first_holdout() const {
  for (const auto& e : entries) {
    if (e.holdout.has_value()) return *e.holdout;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void TrainLog::write_jsonl(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("TrainLog: cannot write " + path);
  for (const auto& e : entries) {
    nlohmann::json j{{"step", e.step}, {"loss", e.loss}, {"lr", e.lr}, {"wall_ms", e.wall_ms}};
    if (e.holdout.has_value()) j["holdout"] = *e.holdout;
    out << j.dump() << "\n";
  }
}

double eval_holdout_ar(const TransformerModel& model, const CorpusShards& corpus,
                       int max_sequences) {
  auto holdout = holdout_subset(corpus, max_sequences);
  if (holdout.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const Shard* s : holdout) total += sequence_ar_loss(model, s->tokens, nullptr, 1.0f);
  return total / static_cast<double>(holdout.size());
}

double eval_holdout_mlm(const TransformerModel& model, const CorpusShards& corpus,
                        const MaskRateSpec& rate_spec, uint64_t seed, int max_sequences) {
  auto holdout = holdout_subset(corpus, max_sequences);
  if (holdout.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  int64_t counted = 0;
  for (size_t i = 0; i < holdout.size(); ++i) {
    Rng rng = Rng::fork(seed, 0xe7a1000 + i);
    const int n = static_cast<int>(holdout[i]->tokens.size());
    const double rate = sample_mask_rate(rate_spec, rng);
    MaskSet mask = sample_mask(n, rate, rng, MaskMode::exact_count);
    auto r = sequence_mlm_loss(model, holdout[i]->tokens, mask, nullptr, 1.0f);
    if (!r.empty_mask) {
      total += r.loss;
      ++counted;
    }
  }
  return counted == 0 ? std::numeric_limits<double>::quiet_NaN()
                      : total / static_cast<double>(counted);
}

double eval_holdout_fusion(const TransformerModel& ar_model,
                           const TransformerModel& mlm_model, const FusionHead& head,
                           const CorpusShards& corpus, const MaskRateSpec& rate_spec,
                           uint64_t seed, int max_sequences) {
  auto holdout = holdout_subset(corpus, max_sequences);
  if (holdout.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  int64_t counted = 0;
  for (size_t i = 0; i < holdout.size(); ++i) {
    Rng rng = Rng::fork(seed, 0xe7a1000 + i);
    const int n = static_cast<int>(holdout[i]->tokens.size());
    const double rate = sample_mask_rate(rate_spec, rng);
    MaskSet mask = sample_mask(n, rate, rng, MaskMode::exact_count);
    auto r = sequence_fusion_loss(ar_model, mlm_model, head, holdout[i]->tokens, mask,
                                  nullptr, 1.0f);
    if (!r.empty_mask) {
      total += r.loss;
      ++counted;
    }
  }
  return counted == 0 ? std::numeric_limits<double>::quiet_NaN()
                      : total / static_cast<double>(counted);
}

namespace {

enum class Objective { ar, mlm };

TrainResult train_base(const CorpusShards& corpus, const ModelConfig& model_config,
                       const TrainConfig& config, Objective objective) {
  config.validate();
  model_config.validate();
  if (corpus.window > model_config.max_seq_len) {
    throw ConfigError("train: corpus window exceeds model max_seq_len");
  }
  auto train_shards = corpus.train();
  if (train_shards.empty()) throw DataError("train: no training shards");

  TrainResult result;
  result.model = init_model(model_config, config.seed);
  std::vector<TensorRef> params = result.model.parameters();
  Adam optimizer(params);

  Rng data_rng = Rng::fork(config.seed, 1);
  Rng mask_rng = Rng::fork(config.seed, 2);
  const float loss_scale = 1.0f / static_cast<float>(config.batch_size);
  const bool has_holdout = !corpus.holdout().empty();

  auto eval = [&]() -> std::optional<double> {
    if (!has_holdout) return std::nullopt;
    if (objective == Objective::ar) {
      return eval_holdout_ar(result.model, corpus, config.holdout_sequences);
    }
    return eval_holdout_mlm(result.model, corpus, config.mask_rate_spec, config.seed,
                            config.holdout_sequences);
  };

  if (auto h = eval()) {
    // Step 0 records the untrained holdout loss.
    result.log.entries.push_back({0, *h, cosine_lr(config.lr, 0, config.steps), h, 0.0});
  }

  Tape tape;
  for (int64_t step = 0; step < config.steps; ++step) {
    const auto step_start = Clock::now();
    const double lr = cosine_lr(config.lr, step, config.steps);
    double batch_loss = 0.0;
    int64_t counted = 0;
    for (int b = 0; b < config.batch_size; ++b) {
      const Shard* shard =
          train_shards[static_cast<size_t>(data_rng.uniform_int(static_cast<int>(train_shards.size())))];
      tape.clear();
      if (objective == Objective::ar) {
        batch_loss += sequence_ar_loss(result.model, shard->tokens, &tape, loss_scale);
        ++counted;
      } else {
        const int n = static_cast<int>(shard->tokens.size());
        const double rate = sample_mask_rate(config.mask_rate_spec, mask_rng);
        MaskSet mask = sample_mask(n, rate, mask_rng, config.mask_mode);
        auto r = sequence_mlm_loss(result.model, shard->tokens, mask, &tape, loss_scale);
        if (r.empty_mask) {
          result.log.skipped_empty_masks += 1;
        } else {
          batch_loss += r.loss;
          ++counted;
        }
      }
    }
    optimizer.step(lr);
    optimizer.zero_grad();

    TrainLogEntry entry;
    entry.step = step + 1;
    entry.loss = counted > 0 ? batch_loss / static_cast<double>(counted) : 0.0;
    entry.lr = lr;
    if (!std::isfinite(entry.loss)) throw DataError("train: non-finite loss at step " +
                                                    std::to_string(step + 1));
    const bool do_eval =
        config.eval_every > 0 &&
        ((step + 1) % config.eval_every == 0 || step + 1 == config.steps);
    if (do_eval) entry.holdout = eval();
    entry.wall_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - step_start).count();
    result.log.entries.push_back(std::move(entry));
  }
  return result;
}

}  // namespace

TrainResult train_ar(const CorpusShards& corpus, const ModelConfig& model_config,
                     const TrainConfig& config) {
  if (model_config.attention_mode != AttentionMode::causal) {
    throw ConfigError("train_ar: model must be causal");
  }
  return train_base(corpus, model_config, config, Objective::ar);
}

TrainResult train_mlm(const CorpusShards& corpus, const ModelConfig& model_config,
                      const TrainConfig& config) {
  if (model_config.attention_mode != AttentionMode::bidirectional) {
    throw ConfigError("train_mlm: model must be bidirectional");
  }
  return train_base(corpus, model_config, config, Objective::mlm);
}

FusionTrainResult train_fusion(const TransformerModel& ar_model,
                               const TransformerModel& mlm_model,
                               const CorpusShards& corpus, const TrainConfig& config,
                               FusionInit init) {
  config.validate();
  if (!ar_model.frozen || !mlm_model.frozen) {
    throw ContractError("train_fusion: base models must be frozen");
  }
  if (ar_model.config.vocab_size != mlm_model.config.vocab_size) {
    throw ContractError("train_fusion: vocab mismatch: " +
                        std::to_string(ar_model.config.vocab_size) + " vs " +
                        std::to_string(mlm_model.config.vocab_size));
  }
  auto train_shards = corpus.train();
  if (train_shards.empty()) throw DataError("train_fusion: no training shards");

  FusionTrainResult result;
  result.head = init == FusionInit::product
                    ? init_product(ar_model, mlm_model)
                    : init_random(ar_model.config.d_model, mlm_model.config.d_model,
                                  ar_model.config.vocab_size, config.seed);
  result.log.init_kind = result.head.init_kind;
  Adam optimizer(result.head.parameters());

  Rng data_rng = Rng::fork(config.seed, 1);
  Rng mask_rng = Rng::fork(config.seed, 2);
  const float loss_scale = 1.0f / static_cast<float>(config.batch_size);
  const bool has_holdout = !corpus.holdout().empty();

  auto eval = [&]() -> std::optional<double> {
    if (!has_holdout) return std::nullopt;
    return eval_holdout_fusion(ar_model, mlm_model, result.head, corpus,
                               config.mask_rate_spec, config.seed, config.holdout_sequences);
  };

  if (auto h = eval()) {
    result.log.entries.push_back({0, *h, cosine_lr(config.lr, 0, config.steps), h, 0.0});
  }

  Tape tape;
  for (int64_t step = 0; step < config.steps; ++step) {
    const auto step_start = Clock::now();
    const double lr = cosine_lr(config.lr, step, config.steps);
    double batch_loss = 0.0;
    int64_t counted = 0;
    for (int b = 0; b < config.batch_size; ++b) {
      const Shard* shard =
          train_shards[static_cast<size_t>(data_rng.uniform_int(static_cast<int>(train_shards.size())))];
      const int n = static_cast<int>(shard->tokens.size());
      const double rate = sample_mask_rate(config.mask_rate_spec, mask_rng);
      MaskSet mask = sample_mask(n, rate, mask_rng, config.mask_mode);
      tape.clear();
      auto r = sequence_fusion_loss(ar_model, mlm_model, result.head, shard->tokens, mask,
                                    &tape, loss_scale);
      if (r.empty_mask) {
        result.log.skipped_empty_masks += 1;
      } else {
        batch_loss += r.loss;
        ++counted;
      }
    }
    optimizer.step(lr);
    optimizer.zero_grad();
    result.head.train_steps += 1;

    TrainLogEntry entry;
    entry.step = step + 1;
    entry.loss = counted > 0 ? batch_loss / static_cast<double>(counted) : 0.0;
    entry.lr = lr;
    if (!std::isfinite(entry.loss)) throw DataError("train_fusion: non-finite loss at step " +
                                                    std::to_string(step + 1));
    const bool do_eval =
        config.eval_every > 0 &&
        ((step + 1) % config.eval_every == 0 || step + 1 == config.steps);
    if (do_eval) entry.holdout = eval();
    entry.wall_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - step_start).count();
    result.log.entries.push_back(std::move(entry));
  }
  return result;
}

}  // namespace maria
