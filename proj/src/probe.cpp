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

#include "maria/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "maria/adam.hpp"

namespace maria {

namespace {

std::vector<int> bos_shifted_input(std::span<const int> tokens) {
  std::vector<int> input(tokens.size());
  input[0] = ByteTokenizer::kBos;
  for (size_t i = 1; i < tokens.size(); ++i) input[i] = tokens[i - 1];
  return input;
}

struct FeatureSet {
  std::vector<std::vector<float>> x;
  std::vector<int> y;
};

FeatureSet extract_features(const TransformerModel* ar_model, const TransformerModel& mlm_model,
                            const std::vector<TaggedExample>& data, ProbeSource source,
                            size_t begin, size_t end) {
  FeatureSet out;
  for (size_t e = begin; e < end; ++e) {
    const auto& ex = data[e];
    if (ex.tokens.size() != ex.labels.size()) {
      throw ContractError("probe: tokens/labels length mismatch in example " +
                          std::to_string(e));
    }
    if (ex.tokens.empty()) continue;
    auto mlm_h = forward_hidden(mlm_model, ex.tokens);
    TensorRef ar_h;
    if (source == ProbeSource::concat) {
      ar_h = forward_hidden(*ar_model, bos_shifted_input(ex.tokens));
    }
    const int d2 = mlm_model.config.d_model;
    const int d1 = source == ProbeSource::concat ? ar_model->config.d_model : 0;
    for (size_t i = 0; i < ex.tokens.size(); ++i) {
      std::vector<float> row(static_cast<size_t>(d1 + d2));
      if (d1 > 0) {
        std::memcpy(row.data(), ar_h->row_ptr(static_cast<int>(i)),
                    sizeof(float) * static_cast<size_t>(d1));
      }
      std::memcpy(row.data() + d1, mlm_h->row_ptr(static_cast<int>(i)),
                  sizeof(float) * static_cast<size_t>(d2));
      out.x.push_back(std::move(row));
      out.y.push_back(ex.labels[i]);
    }
  }
  return out;
}

}  // namespace

ProbeReport probe_linear(const std::vector<std::vector<float>>& train_x,
                         const std::vector<int>& train_y,
                         const std::vector<std::vector<float>>& test_x,
                         const std::vector<int>& test_y, int classes, int epochs,
                         double lr, uint64_t seed) {
  if (classes < 2) throw ContractError("probe: need at least 2 classes");
  if (train_x.empty() || test_x.empty()) throw ContractError("probe: empty split");
  if (train_x.size() != train_y.size() || test_x.size() != test_y.size()) {
    throw ContractError("probe: features/labels size mismatch");
  }
  const int dim = static_cast<int>(train_x[0].size());
  for (int label : train_y) {
    if (label < 0 || label >= classes) throw ContractError("probe: label out of range");
  }

  Rng rng = Rng::fork(seed, 0x9c0be);
  auto w = Tensor::randn({dim, classes}, rng, 0.01, /*requires_grad=*/true);
  auto b = Tensor::zeros({classes}, /*requires_grad=*/true);
  Adam optimizer({w, b});

  const int batch = 256;
  const int n_train = static_cast<int>(train_x.size());
  std::vector<int> order(static_cast<size_t>(n_train));
  for (int i = 0; i < n_train; ++i) order[static_cast<size_t>(i)] = i;

  Tape tape;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    // Deterministic shuffle per epoch.
    for (int i = n_train - 1; i > 0; --i) {
      int j = rng.uniform_int(i + 1);
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    for (int start = 0; start < n_train; start += batch) {
      const int rows = std::min(batch, n_train - start);
      auto x = Tensor::create({rows, dim});
      std::vector<int> targets(static_cast<size_t>(rows));
      for (int r = 0; r < rows; ++r) {
        const int src = order[static_cast<size_t>(start + r)];
        std::memcpy(x->row_ptr(r), train_x[static_cast<size_t>(src)].data(),
                    sizeof(float) * static_cast<size_t>(dim));
        targets[static_cast<size_t>(r)] = train_y[static_cast<size_t>(src)];
      }
      std::vector<float> weights(static_cast<size_t>(rows), 1.0f);
      tape.clear();
      auto logits = add_bias(&tape, matmul(&tape, x, w), b);
      auto loss = cross_entropy(&tape, logits, targets, weights);
      tape.backward(loss);
      optimizer.step(lr);
      optimizer.zero_grad();
    }
  }

  int64_t correct = 0;
  for (size_t i = 0; i < test_x.size(); ++i) {
    int best = 0;
    double best_z = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < classes; ++c) {
      double z = static_cast<double>(b->data[static_cast<size_t>(c)]);
      z += detail::dot_strided(test_x[i].data(), 1, w->data.data() + c, classes, dim);
      if (z > best_z) {
        best_z = z;
        best = c;
      }
    }
    if (best == test_y[i]) ++correct;
  }
  ProbeReport report;
  report.classes = classes;
  report.train_tokens = static_cast<int64_t>(train_x.size());
  report.test_tokens = static_cast<int64_t>(test_x.size());
  report.accuracy = static_cast<double>(correct) / static_cast<double>(test_x.size());
  report.stderr_ = std::sqrt(report.accuracy * (1.0 - report.accuracy) /
                             static_cast<double>(test_x.size()));
  return report;
}

ProbeReport probe_tagging(const TransformerModel* ar_model, const TransformerModel& mlm_model,
                          const std::vector<TaggedExample>& data, ProbeSource source,
                          int classes, int epochs, double lr, uint64_t seed) {
  if (classes < 2) throw ContractError("probe: need at least 2 classes");
  if (source == ProbeSource::concat && ar_model == nullptr) {
    throw ContractError("probe: concat source needs an AR model");
  }
  if (data.size() < 5) throw ContractError("probe: need at least 5 tagged examples");
  const size_t split = data.size() - data.size() / 5;  // 80/20 by example
  FeatureSet train = extract_features(ar_model, mlm_model, data, source, 0, split);
  FeatureSet test = extract_features(ar_model, mlm_model, data, source, split, data.size());
  ProbeReport report =
      probe_linear(train.x, train.y, test.x, test.y, classes, epochs, lr, seed);
  report.source = source == ProbeSource::concat ? "concat" : "mlm_only";
  return report;
}

}  // namespace maria
