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

#include "maria/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace maria {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<int> bos_shifted_input(std::span<const int> tokens) {
  std::vector<int> input(tokens.size());
  input[0] = ByteTokenizer::kBos;
  for (size_t i = 1; i < tokens.size(); ++i) input[i] = tokens[i - 1];
  return input;
}

double row_nll(const float* logits, int vocab, int target) {
  return detail::log_sum_exp_row(logits, vocab) - static_cast<double>(logits[target]);
}

double hidden_row_nll(const TransformerModel& model, const float* hidden, int target) {
  const int v = model.config.vocab_size;
  std::vector<float> logits(static_cast<size_t>(v));
  for (int j = 0; j < v; ++j) {
    logits[static_cast<size_t>(j)] = static_cast<float>(
        detail::dot_strided(hidden, 1, model.w_head->data.data() + j, v, model.config.d_model));
  }
  return row_nll(logits.data(), v, target);
}

PplEntry finish_entry(std::string method, double rate, double total_nll, int64_t count,
                      int64_t min_masked_tokens) {
  PplEntry e;
  e.method = std::move(method);
  e.rate = rate;
  e.total_nll = total_nll;
  e.masked_tokens = count;
  e.insufficient = count < min_masked_tokens;
  e.ppl = count > 0 ? std::exp(total_nll / static_cast<double>(count))
                    : std::numeric_limits<double>::quiet_NaN();
  return e;
}

MaskSet eval_mask(int seq_len, double rate, uint64_t seed, size_t seq_index) {
  Rng rng = Rng::fork(seed, 0xbb1d000 + seq_index);
  return sample_mask(seq_len, rate, rng, MaskMode::exact_count);
}

}  // namespace

TokenSequences eval_sequences(const CorpusShards& corpus, int max_sequences,
                              bool holdout_only) {
  TokenSequences out;
  for (const auto& s : corpus.shards) {
    if (holdout_only && !s.holdout) continue;
    out.push_back(s.tokens);
    if (static_cast<int>(out.size()) >= max_sequences) break;
  }
  return out;
}

PplEntry masked_ppl_maria(const TransformerModel& ar_model, const TransformerModel& mlm_model,
                          const FusionHead& head, const TokenSequences& seqs, double rate,
                          uint64_t seed, int64_t min_masked_tokens) {
  double total = 0.0;
  int64_t count = 0;
  for (size_t si = 0; si < seqs.size(); ++si) {
    const auto& clean = seqs[si];
    const int n = static_cast<int>(clean.size());
    MaskSet mask = eval_mask(n, rate, seed, si);
    if (mask.empty()) continue;
    MaskedSequence masked = apply_mask(clean, mask);
    AlignedBatch aligned = align_hidden(clean, masked.tokens, ar_model, mlm_model);
    for (int i : mask.indices) {
      auto logits = fusion_logits_row(head, aligned.ar_hidden->row_ptr(i),
                                      aligned.mlm_hidden->row_ptr(i));
      total += row_nll(logits.data(), head.vocab, clean[static_cast<size_t>(i)]);
      ++count;
    }
  }
  return finish_entry("maria", rate, total, count, min_masked_tokens);
}

PplEntry masked_ppl_ar(const TransformerModel& ar_model, const TokenSequences& seqs,
                       double rate, uint64_t seed, int64_t min_masked_tokens) {
  double total = 0.0;
  int64_t count = 0;
  for (size_t si = 0; si < seqs.size(); ++si) {
    const auto& clean = seqs[si];
    const int n = static_cast<int>(clean.size());
    MaskSet mask = eval_mask(n, rate, seed, si);
    if (mask.empty()) continue;
    auto hidden = forward_hidden(ar_model, bos_shifted_input(clean));
    for (int i : mask.indices) {
      total += hidden_row_nll(ar_model, hidden->row_ptr(i), clean[static_cast<size_t>(i)]);
      ++count;
    }
  }
  return finish_entry("ar", rate, total, count, min_masked_tokens);
}

PplEntry masked_ppl_mlm_ardecode(const TransformerModel& mlm_model, const TokenSequences& seqs,
                                 double rate, uint64_t seed, int64_t min_masked_tokens) {
  double total = 0.0;
  int64_t count = 0;
  for (size_t si = 0; si < seqs.size(); ++si) {
    const auto& clean = seqs[si];
    const int n = static_cast<int>(clean.size());
    MaskSet mask = eval_mask(n, rate, seed, si);
    if (mask.empty()) continue;
    std::vector<int> buffer = apply_mask(clean, mask).tokens;
    for (int i : mask.indices) {
      auto hidden = forward_hidden(mlm_model, buffer);
      total += hidden_row_nll(mlm_model, hidden->row_ptr(i), clean[static_cast<size_t>(i)]);
      ++count;
      buffer[static_cast<size_t>(i)] = clean[static_cast<size_t>(i)];  // reveal ground truth
    }
  }
  return finish_entry("mlm_ardecode", rate, total, count, min_masked_tokens);
}

PplEntry rolling_ppl(const TransformerModel& ar_model, const std::vector<int>& stream,
                     int window) {
  if (window < 1 || window > ar_model.config.max_seq_len) {
    throw ContractError("rolling_ppl: window must be in [1, max_seq_len]");
  }
  if (stream.empty()) throw DataError("rolling_ppl: empty stream");
  double total = 0.0;
  int64_t count = 0;
  for (size_t begin = 0; begin < stream.size(); begin += static_cast<size_t>(window)) {
    const size_t end = std::min(stream.size(), begin + static_cast<size_t>(window));
    std::span<const int> chunk(stream.data() + begin, end - begin);
    auto hidden = forward_hidden(ar_model, bos_shifted_input(chunk));
    for (size_t i = 0; i < chunk.size(); ++i) {
      total += hidden_row_nll(ar_model, hidden->row_ptr(static_cast<int>(i)),
                              chunk[i]);
      ++count;
    }
  }
  PplEntry e = finish_entry("rolling", 1.0, total, count, 1);
  return e;
}

namespace {

MethodFit fit_loglog(const std::string& method, const std::vector<int>& lengths,
                     const std::vector<double>& times) {
  MethodFit fit;
  fit.method = method;
  const size_t n = lengths.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double x = std::log(static_cast<double>(lengths[i]));
    const double y = std::log(times[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double dn = static_cast<double>(n);
  const double denom = dn * sxx - sx * sx;
  fit.slope = (dn * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / dn;
  double ss_res = 0, ss_tot = 0;
  const double ymean = sy / dn;
  for (size_t i = 0; i < n; ++i) {
    const double x = std::log(static_cast<double>(lengths[i]));
    const double y = std::log(times[i]);
    const double pred = fit.intercept + fit.slope * x;
    ss_res += (y - pred) * (y - pred);
    ss_tot += (y - ymean) * (y - ymean);
  }
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

}  // namespace

ThroughputReport throughput_bench(const TransformerModel& ar_model,
                                  const TransformerModel& mlm_model, const FusionHead& head,
                                  const std::vector<std::string>& methods,
                                  const std::vector<int>& lengths, double mask_rate,
                                  int runs, int warmups, uint64_t seed) {
  for (size_t i = 1; i < lengths.size(); ++i) {
    if (lengths[i] <= lengths[i - 1]) {
      throw ContractError("throughput_bench: lengths must be strictly increasing");
    }
  }
  for (const auto& m : methods) {
    if (m != "maria_cached" && m != "maria_uncached" && m != "mlm_ardecode") {
      throw ContractError("throughput_bench: unknown method '" + m + "'");
    }
  }
  ThroughputReport report;
  report.lengths = lengths;
  report.mask_rate = mask_rate;
  report.runs = runs;
  report.warmups = warmups;
  const SamplerSpec greedy = SamplerSpec::greedy_spec();
  for (const auto& method : methods) {
    std::vector<double> mean_times;
    for (int length : lengths) {
      Rng data_rng = Rng::fork(seed, 0xbe9c000 + static_cast<uint64_t>(length));
      std::vector<int> clean(static_cast<size_t>(length));
      for (int& t : clean) t = data_rng.uniform_int(256);
      MaskSet mask = sample_mask(length, mask_rate, data_rng, MaskMode::exact_count);
      MaskedSequence masked = apply_mask(clean, mask);

      auto run_once = [&]() {
        Rng rng(seed);  // greedy consumes nothing; kept for interface parity
        if (method == "maria_cached") {
          infill_cached(ar_model, mlm_model, head, masked.tokens, mask, greedy, rng);
        } else if (method == "maria_uncached") {
          infill_uncached(ar_model, mlm_model, head, masked.tokens, mask, greedy, rng);
        } else {
          mlm_iterative_decode(mlm_model, masked.tokens, mask, greedy, rng);
        }
      };

      ThroughputCell cell;
      cell.method = method;
      cell.length = length;
      cell.masked = static_cast<int>(mask.size());
      for (int w = 0; w < warmups; ++w) run_once();
      for (int r = 0; r < runs; ++r) {
        const auto start = Clock::now();
        run_once();
        cell.run_s.push_back(std::chrono::duration<double>(Clock::now() - start).count());
      }
      double mean = 0.0;
      for (double t : cell.run_s) mean += t;
      mean /= static_cast<double>(cell.run_s.size());
      double var = 0.0;
      for (double t : cell.run_s) var += (t - mean) * (t - mean);
      var /= static_cast<double>(cell.run_s.size());
      cell.mean_s = mean;
      cell.stddev_s = std::sqrt(var);
      cell.unstable = cell.stddev_s > 0.3 * mean;
      cell.tokens_per_s = mean > 0 ? static_cast<double>(cell.masked) / mean : 0.0;
      mean_times.push_back(std::max(mean, 1e-12));
      report.cells.push_back(std::move(cell));
    }
    if (lengths.size() >= 2) {
      report.fits.push_back(fit_loglog(method, lengths, mean_times));
    }
  }
  return report;
}

std::vector<double> generative_ppl_per_sample(const TransformerModel& scorer,
                                              const TokenSequences& samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& sample : samples) {
    if (sample.empty()) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    auto hidden = forward_hidden(scorer, bos_shifted_input(sample));
    double nll = 0.0;
    for (size_t i = 0; i < sample.size(); ++i) {
      nll += hidden_row_nll(scorer, hidden->row_ptr(static_cast<int>(i)), sample[i]);
    }
    out.push_back(std::exp(nll / static_cast<double>(sample.size())));
  }
  return out;
}

double generative_ppl(const TransformerModel& scorer, const TokenSequences& samples) {
  auto per_sample = generative_ppl_per_sample(scorer, samples);
  double total = 0.0;
  int64_t count = 0;
  for (double p : per_sample) {
    if (std::isfinite(p)) {
      total += p;
      ++count;
    }
  }
  return count > 0 ? total / static_cast<double>(count)
                   : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace maria
