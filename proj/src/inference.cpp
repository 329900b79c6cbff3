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

#include "maria/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace maria {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void check_input_consistency(std::span<const int> tokens, const MaskSet& mask) {
  if (mask.seq_len != static_cast<int>(tokens.size())) {
    throw ContractError("infill: mask seq_len " + std::to_string(mask.seq_len) +
                        " does not match input length " + std::to_string(tokens.size()));
  }
  mask.validate();
  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
    const bool is_mask_token = tokens[static_cast<size_t>(i)] == ByteTokenizer::kMask;
    if (is_mask_token && !mask.contains(i)) {
      throw ContractError("infill: MASK id at position " + std::to_string(i) +
                          " which is not in the mask set");
    }
    if (!is_mask_token && mask.contains(i)) {
      throw ContractError("infill: masked position " + std::to_string(i) +
                          " does not hold the MASK id");
    }
  }
}

/// logits row for one position from a model's own output head.
std::vector<float> head_logits_row(const TransformerModel& model, const float* hidden) {
  const int v = model.config.vocab_size;
  const int d = model.config.d_model;
  std::vector<float> logits(static_cast<size_t>(v));
  for (int j = 0; j < v; ++j) {
    logits[static_cast<size_t>(j)] = static_cast<float>(
        detail::dot_strided(hidden, 1, model.w_head->data.data() + j, v, d));
  }
  return logits;
}

std::vector<double> softmax_double(std::span<const float> logits, double inv_temp) {
  double max_z = -std::numeric_limits<double>::infinity();
  for (float z : logits) max_z = std::max(max_z, static_cast<double>(z) * inv_temp);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) * inv_temp - max_z);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

int argmax_lowest(std::span<const float> logits) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
    if (logits[static_cast<size_t>(i)] > logits[static_cast<size_t>(best)]) best = i;
  }
  return best;
}

}  // namespace

void SamplerSpec::validate() const {
  if (kind == Kind::temperature && temperature <= 0.0) {
    throw ContractError("sampler: temperature must be > 0 (express t=0 as greedy)");
  }
  if (kind == Kind::nucleus) {
    if (nucleus_p <= 0.0 || nucleus_p > 1.0) {
      throw ContractError("sampler: nucleus_p must be in (0, 1]");
    }
    if (temperature <= 0.0) {
      throw ContractError("sampler: temperature must be > 0 (express t=0 as greedy)");
    }
  }
}

SamplerSpec SamplerSpec::temperature_spec(double t) {
  if (t == 0.0) return greedy_spec();
  SamplerSpec s;
  s.kind = Kind::temperature;
  s.temperature = t;
  s.validate();
  return s;
}

SamplerSpec SamplerSpec::nucleus_spec(double p, double t) {
  SamplerSpec s;
  s.kind = Kind::nucleus;
  s.nucleus_p = p;
  s.temperature = t;
  s.validate();
  return s;
}

int sample_token(std::span<const float> logits, const SamplerSpec& sampler, Rng& rng) {
  if (logits.empty()) throw ContractError("sample_token: empty logits");
  sampler.validate();
  if (sampler.kind == SamplerSpec::Kind::greedy) return argmax_lowest(logits);

  const double inv_temp = 1.0 / sampler.temperature;
  auto probs = softmax_double(logits, inv_temp);

  if (sampler.kind == SamplerSpec::Kind::nucleus && sampler.nucleus_p < 1.0) {
    // Keep the smallest prefix of the sorted distribution with mass >= p,
    // then renormalize. The selected set is sampled in ascending-id order so
    // p = 1 degenerates to plain temperature sampling on the same stream.
    std::vector<int> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return probs[static_cast<size_t>(a)] > probs[static_cast<size_t>(b)]; });
    double cum = 0.0;
    std::vector<char> keep(probs.size(), 0);
    for (int id : order) {
      keep[static_cast<size_t>(id)] = 1;
      cum += probs[static_cast<size_t>(id)];
      if (cum >= sampler.nucleus_p) break;
    }
    double mass = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      if (!keep[i]) probs[i] = 0.0;
      mass += probs[i];
    }
    for (double& x : probs) x /= mass;
  }

  const double u = rng.uniform();
  double cum = 0.0;
  int last_positive = 0;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    if (probs[static_cast<size_t>(i)] <= 0.0) continue;
    last_positive = i;
    cum += probs[static_cast<size_t>(i)];
    if (u < cum) return i;
  }
  return last_positive;
}

std::vector<int> infill_cached(const TransformerModel& ar_model,
                               const TransformerModel& mlm_model, const FusionHead& head,
                               std::span<const int> masked_tokens, const MaskSet& mask,
                               const SamplerSpec& sampler, Rng& rng, InfillStats* stats) {
  const auto start = Clock::now();
  check_input_consistency(masked_tokens, mask);
  std::vector<int> buffer(masked_tokens.begin(), masked_tokens.end());
  InfillStats local;
  if (mask.empty()) {
    if (stats != nullptr) {
      local.wall_ms = ms_since(start);
      *stats = local;
    }
    return buffer;
  }
  if (static_cast<int>(buffer.size()) > ar_model.config.max_seq_len) {
    throw LengthError("infill: sequence of " + std::to_string(buffer.size()) +
                      " tokens exceeds max_seq_len " +
                      std::to_string(ar_model.config.max_seq_len));
  }

  // One bidirectional pass over the original masked input; never refreshed
  // within the session.
  auto mlm_hidden = forward_hidden(mlm_model, buffer);
  local.mlm_forward_calls = 1;

  KVCache cache = make_cache(ar_model);
  int prev = 0;
  bool first = true;
  std::vector<int> ar_input;
  for (int curr : mask.indices) {
    ar_input.clear();
    if (first) {
      ar_input.push_back(ByteTokenizer::kBos);
      ar_input.insert(ar_input.end(), buffer.begin(), buffer.begin() + curr);
      first = false;
    } else {
      ar_input.insert(ar_input.end(), buffer.begin() + prev, buffer.begin() + curr);
    }
    auto ar_hidden = forward_cached(ar_model, ar_input, cache);
    local.ar_forward_calls += 1;
    local.ar_tokens_processed += static_cast<int64_t>(ar_input.size());
    const float* ar_row = ar_hidden->row_ptr(ar_hidden->rows() - 1);
    auto logits = fusion_logits_row(head, ar_row, mlm_hidden->row_ptr(curr));
    buffer[static_cast<size_t>(curr)] = sample_token(logits, sampler, rng);
    prev = curr;
  }
  local.wall_ms = ms_since(start);
  if (stats != nullptr) *stats = local;
  return buffer;
}

std::vector<int> infill_uncached(const TransformerModel& ar_model,
                                 const TransformerModel& mlm_model, const FusionHead& head,
                                 std::span<const int> masked_tokens, const MaskSet& mask,
                                 const SamplerSpec& sampler, Rng& rng, InfillStats* stats) {
  const auto start = Clock::now();
  check_input_consistency(masked_tokens, mask);
  std::vector<int> buffer(masked_tokens.begin(), masked_tokens.end());
  InfillStats local;
  if (mask.empty()) {
    if (stats != nullptr) {
      local.wall_ms = ms_since(start);
      *stats = local;
    }
    return buffer;
  }
  if (static_cast<int>(buffer.size()) > ar_model.config.max_seq_len) {
    throw LengthError("infill: sequence of " + std::to_string(buffer.size()) +
                      " tokens exceeds max_seq_len " +
                      std::to_string(ar_model.config.max_seq_len));
  }
  auto mlm_hidden = forward_hidden(mlm_model, buffer);
  local.mlm_forward_calls = 1;

  std::vector<int> ar_input;
  for (int curr : mask.indices) {
    ar_input.clear();
    ar_input.push_back(ByteTokenizer::kBos);
    ar_input.insert(ar_input.end(), buffer.begin(), buffer.begin() + curr);
    auto ar_hidden = forward_hidden(ar_model, ar_input);
    local.ar_forward_calls += 1;
    local.ar_tokens_processed += static_cast<int64_t>(ar_input.size());
    const float* ar_row = ar_hidden->row_ptr(ar_hidden->rows() - 1);
    auto logits = fusion_logits_row(head, ar_row, mlm_hidden->row_ptr(curr));
    buffer[static_cast<size_t>(curr)] = sample_token(logits, sampler, rng);
  }
  local.wall_ms = ms_since(start);
  if (stats != nullptr) *stats = local;
  return buffer;
}

std::vector<int> mlm_iterative_decode(const TransformerModel& mlm_model,
                                      std::span<const int> masked_tokens, const MaskSet& mask,
                                      const SamplerSpec& sampler, Rng& rng,
                                      InfillStats* stats) {
  const auto start = Clock::now();
  check_input_consistency(masked_tokens, mask);
  std::vector<int> buffer(masked_tokens.begin(), masked_tokens.end());
  InfillStats local;
  for (int curr : mask.indices) {
    auto hidden = forward_hidden(mlm_model, buffer);
    local.mlm_forward_calls += 1;
    auto logits = head_logits_row(mlm_model, hidden->row_ptr(curr));
    buffer[static_cast<size_t>(curr)] = sample_token(logits, sampler, rng);
  }
  local.wall_ms = ms_since(start);
  if (stats != nullptr) *stats = local;
  return buffer;
}

std::vector<int> generate_unconditional(const TransformerModel& ar_model, int length,
                                        const SamplerSpec& sampler, Rng& rng) {
  if (length < 0) throw ContractError("generate_unconditional: negative length");
  if (length > ar_model.config.max_seq_len) {
    throw LengthError("generate_unconditional: length " + std::to_string(length) +
                      " exceeds max_seq_len " + std::to_string(ar_model.config.max_seq_len));
  }
  std::vector<int> out;
  if (length == 0) return out;
  KVCache cache = make_cache(ar_model);
  std::vector<int> feed{ByteTokenizer::kBos};
  for (int i = 0; i < length; ++i) {
    auto hidden = forward_cached(ar_model, feed, cache);
    auto logits = head_logits_row(ar_model, hidden->row_ptr(hidden->rows() - 1));
    const int tok = sample_token(logits, sampler, rng);
    out.push_back(tok);
    feed.assign(1, tok);
  }
  return out;
}

void AnnealSchedule::validate() const {
  if (iterations < 0) throw ContractError("anneal: iterations must be >= 0");
  if (remask_fraction < 0.0 || remask_fraction > 1.0) {
    throw ContractError("anneal: remask_fraction must be in [0, 1]");
  }
}

std::vector<double> AnnealSchedule::temperatures() const {
  validate();
  std::vector<double> t(static_cast<size_t>(iterations));
  if (iterations == 1) {
    t[0] = 0.0;  // a single iteration ends the schedule: greedy
    return t;
  }
  for (int i = 0; i < iterations; ++i) {
    t[static_cast<size_t>(i)] =
        1.0 - static_cast<double>(i) / static_cast<double>(iterations - 1);
  }
  return t;
}

AnnealResult simulated_anneal(const TransformerModel& ar_model,
                              const TransformerModel& mlm_model, const FusionHead& head,
                              int length, const AnnealSchedule& schedule, Rng& rng) {
  schedule.validate();
  AnnealResult result;
  result.tokens = generate_unconditional(ar_model, length, SamplerSpec::temperature_spec(1.0), rng);
  result.trace.push_back(result.tokens);
  if (length == 0) {
    result.trace.resize(static_cast<size_t>(schedule.iterations) + 1, result.tokens);
    return result;
  }
  const auto temps = schedule.temperatures();
  for (int it = 0; it < schedule.iterations; ++it) {
    MaskSet mask = sample_mask(length, schedule.remask_fraction, rng, MaskMode::exact_count);
    MaskedSequence masked = apply_mask(result.tokens, mask);
    const SamplerSpec sampler = SamplerSpec::temperature_spec(temps[static_cast<size_t>(it)]);
    result.tokens = infill_cached(ar_model, mlm_model, head, masked.tokens, mask, sampler, rng);
    result.trace.push_back(result.tokens);
  }
  return result;
}

}  // namespace maria
