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

#include "maria/adam.hpp"

#include <cmath>

namespace maria {

void AdamState::init(const std::vector<TensorRef>& params) {
  m.clear();
  v.clear();
  step = 0;
  for (const auto& p : params) {
    m.emplace_back(p->data.size(), 0.0f);
    v.emplace_back(p->data.size(), 0.0f);
  }
}

void adam_step(const std::vector<TensorRef>& params, AdamState& state, double lr) {
  if (state.m.size() != params.size()) {
    throw ContractError("adam_step: state was initialized for a different parameter list");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    if (state.m[pi].size() != p.data.size()) {
      throw DimensionError("adam_step: moment buffers do not match parameter " +
                           p.shape_str());
    }
    float* m = state.m[pi].data();
    float* v = state.v[pi].data();
    for (size_t i = 0; i < p.data.size(); ++i) {
      const double g = p.grad.empty() ? 0.0 : static_cast<double>(p.grad[i]);
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p.data[i] = static_cast<float>(p.data[i] - lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

Adam::Adam(std::vector<TensorRef> params, double beta1, double beta2, double eps)
    : params_(std::move(params)) {
  state_.beta1 = beta1;
  state_.beta2 = beta2;
  state_.eps = eps;
  state_.init(params_);
}

void Adam::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

double cosine_lr(double base_lr, int64_t step, int64_t total_steps) {
  if (total_steps <= 0) throw ContractError("cosine_lr: total_steps must be >= 1");
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  constexpr double pi = 3.14159265358979323846;
  return base_lr * (1.0 + std::cos(pi * t)) / 2.0;
}

}  // namespace maria
