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
#include <vector>

#include "maria/tensor.hpp"

namespace maria {

/// First/second moment accumulators for a fixed parameter list.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;

  void init(const std::vector<TensorRef>& params);
};

/// One Adam update with bias correction. Parameters with an absent gradient
/// buffer are treated as having zero gradient.
void adam_step(const std::vector<TensorRef>& params, AdamState& state, double lr);

/// Thin convenience wrapper owning state for a parameter list.
class Adam {
 public:
  explicit Adam(std::vector<TensorRef> params, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void step(double lr) { adam_step(params_, state_, lr); }
  void zero_grad();
  const AdamState& state() const { return state_; }

 private:
  std::vector<TensorRef> params_;
  AdamState state_;
};

/// Cosine decay to zero: lr * (1 + cos(pi * t / total)) / 2.
double cosine_lr(double base_lr, int64_t step, int64_t total_steps);

}  // namespace maria
