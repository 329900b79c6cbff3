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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "maria/errors.hpp"
#include "maria/rng.hpp"

namespace maria {

class Tensor;
using TensorRef = std::shared_ptr<Tensor>;

/// Dense row-major f32 tensor with an optional gradient buffer.
///
/// Gradients are allocated lazily: a parameter that never participates in a
/// backward pass keeps an empty grad (read as exact zero via grad_at).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, bool requires_grad = false);

  static TensorRef create(std::vector<int> shape, bool requires_grad = false);
  static TensorRef from_values(std::vector<int> shape, std::vector<float> values,
                               bool requires_grad = false);
  static TensorRef zeros(std::vector<int> shape, bool requires_grad = false);
  static TensorRef full(std::vector<int> shape, float value,
                        bool requires_grad = false);
  /// Gaussian init, mean 0.
  static TensorRef randn(std::vector<int> shape, Rng& rng, double stddev,
                         bool requires_grad = false);

  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int64_t numel() const;

  // 2-D accessors; most of the model works on matrices.
  int rows() const { return shape[0]; }
  int cols() const { return shape[1]; }
  float at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }
  float& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  const float* row_ptr(int r) const { return data.data() + static_cast<size_t>(r) * cols(); }
  float* row_ptr(int r) { return data.data() + static_cast<size_t>(r) * cols(); }

  void ensure_grad();
  void zero_grad() { if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0f); }
  /// Gradient value, exact 0 when no gradient was ever accumulated.
  float grad_at(int64_t i) const { return grad.empty() ? 0.0f : grad[static_cast<size_t>(i)]; }

  bool all_finite() const;
  /// Throws DataError naming `what` if any value is NaN/Inf.
  void check_finite(const std::string& what) const;

  std::string shape_str() const;

  std::vector<int> shape;
  std::vector<float> data;
  std::vector<float> grad;
  bool requires_grad = false;
};

/// Define-by-run tape. Operations append a backward step as they execute;
/// backward() replays the steps in exact reverse recording order.
class Tape {
 public:
  void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

  /// Seeds d(loss)/d(loss) = 1 and runs all recorded steps in reverse.
  /// The loss must be a scalar (numel == 1).
  void backward(const TensorRef& loss);

  size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }
  void clear() { steps_.clear(); }

 private:
  std::vector<std::function<void()>> steps_;
};

/// Side-channel detail from cross_entropy: the double-precision loss value
/// and whether every position was masked out (loss defined as 0 then).
struct CrossEntropyInfo {
  double loss = 0.0;
  bool all_masked = false;
  int64_t active_positions = 0;
};

// ---------------------------------------------------------------------------
// Operations. `tape` may be null: the op then runs in inference mode and
// records nothing. All reductions accumulate in double with a fixed order,
// which keeps results identical across call paths (full vs. incremental).
// ---------------------------------------------------------------------------

TensorRef matmul(Tape* tape, const TensorRef& a, const TensorRef& b);
/// a[m x k] * transpose(b[n x k]) -> [m x n]; both operands row-contiguous.
TensorRef matmul_nt(Tape* tape, const TensorRef& a, const TensorRef& b);
TensorRef add(Tape* tape, const TensorRef& a, const TensorRef& b);
/// mat[n x d] + bias[d] broadcast over rows (the only broadcast supported).
TensorRef add_bias(Tape* tape, const TensorRef& mat, const TensorRef& bias);
TensorRef mul(Tape* tape, const TensorRef& a, const TensorRef& b);
TensorRef scale(Tape* tape, const TensorRef& a, float s);
TensorRef gelu(Tape* tape, const TensorRef& x);
/// Normalizes the last dim to mean 0 / var 1, then applies gain and bias.
TensorRef layer_norm(Tape* tape, const TensorRef& x, const TensorRef& gain,
                     const TensorRef& bias);
/// Softmax over the last dim, max-subtracted for stability.
TensorRef softmax(Tape* tape, const TensorRef& x);
TensorRef embedding_lookup(Tape* tape, const TensorRef& table,
                           std::span<const int> ids);
TensorRef concat_cols(Tape* tape, const TensorRef& a, const TensorRef& b);
TensorRef slice_rows(Tape* tape, const TensorRef& x, int row_begin, int row_end);
TensorRef sum_all(Tape* tape, const TensorRef& x);
/// Fused multi-head self-attention over already-projected q/k/v [n x d].
/// causal limits row i to keys j <= i.
TensorRef multihead_attention(Tape* tape, const TensorRef& q, const TensorRef& k,
                              const TensorRef& v, int n_heads, bool causal);
/// Mean over weight-1 positions of -log softmax(logits)[target].
/// All-zero weights define the loss as 0 and set info->all_masked.
TensorRef cross_entropy(Tape* tape, const TensorRef& logits,
                        std::span<const int> targets,
                        std::span<const float> weights,
                        CrossEntropyInfo* info = nullptr);

namespace detail {

// Dot products accumulate in double with four independent partial sums; the
// partials are combined in a fixed order so results do not depend on inlining
// or FMA contraction. Every matrix/attention path funnels through these.
double dot(const float* a, const float* b, int n);
double dot_strided(const float* a, int astride, const float* b, int bstride, int n);

void layer_norm_row(const float* x, const float* gain, const float* bias, int d,
                    float* out);
void softmax_row(const float* z, float* out, int n);
double log_sum_exp_row(const float* z, int n);
float gelu_scalar(float x);
float gelu_grad_scalar(float x);

/// One query row of multi-head attention against contiguous key/value
/// history [context_len x d]. Shared by the batched training op and the
/// KV-cached incremental path, so both produce bit-identical outputs.
/// probs, when non-null, receives n_heads * context_len attention weights.
void attention_row(const float* q, const float* k_base, const float* v_base,
                   int context_len, int d_model, int n_heads, float* out,
                   float* probs);

}  // namespace detail

}  // namespace maria
