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

#include "maria/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace maria {

namespace {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw DimensionError("tensor dimension must be non-negative");
    n *= d;
  }
  return n;
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

void require_2d(const TensorRef& t, const char* op) {
  if (t->ndim() != 2) {
    throw DimensionError(std::string(op) + ": expected 2-D tensor, got " + t->shape_str());
  }
}

bool should_record(Tape* tape, std::initializer_list<const TensorRef*> inputs) {
  if (tape == nullptr) return false;
  for (const TensorRef* t : inputs) {
    if ((*t)->requires_grad) return true;
  }
  return false;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape_in, bool requires_grad_in)
    : shape(std::move(shape_in)), requires_grad(requires_grad_in) {
  data.assign(static_cast<size_t>(shape_numel(shape)), 0.0f);
}

TensorRef Tensor::create(std::vector<int> shape, bool requires_grad) {
  return std::make_shared<Tensor>(std::move(shape), requires_grad);
}

TensorRef Tensor::from_values(std::vector<int> shape, std::vector<float> values,
                              bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  if (shape_numel(t->shape) != static_cast<int64_t>(values.size())) {
    throw DimensionError("from_values: " + std::to_string(values.size()) +
                         " values do not fill shape " + t->shape_str());
  }
  t->data = std::move(values);
  t->requires_grad = requires_grad;
  return t;
}

TensorRef Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return create(std::move(shape), requires_grad);
}

TensorRef Tensor::full(std::vector<int> shape, float value, bool requires_grad) {
  auto t = create(std::move(shape), requires_grad);
  std::fill(t->data.begin(), t->data.end(), value);
  return t;
}

TensorRef Tensor::randn(std::vector<int> shape, Rng& rng, double stddev,
                        bool requires_grad) {
  auto t = create(std::move(shape), requires_grad);
  for (float& x : t->data) x = static_cast<float>(rng.normal() * stddev);
  return t;
}

int64_t Tensor::numel() const { return shape_numel(shape); }

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
}

bool Tensor::all_finite() const {
  for (float x : data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void Tensor::check_finite(const std::string& what) const {
  if (!all_finite()) throw DataError(what + ": non-finite value in tensor " + shape_str());
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void Tape::backward(const TensorRef& loss) {
  if (loss->numel() != 1) {
    throw ContractError("backward: loss must be scalar, got " + loss->shape_str());
  }
  loss->ensure_grad();
  loss->grad[0] = 1.0f;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

// ---------------------------------------------------------------------------
// kernels
// ---------------------------------------------------------------------------

namespace detail {

double dot(const float* a, const float* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    s1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
    s2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
    s3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
  }
  for (; i < n; ++i) s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return (s0 + s1) + (s2 + s3);
}

double dot_strided(const float* a, int astride, const float* b, int bstride, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  const float* pa = a;
  const float* pb = b;
  for (; i + 4 <= n; i += 4) {
    s0 += static_cast<double>(pa[0]) * static_cast<double>(pb[0]);
    s1 += static_cast<double>(pa[astride]) * static_cast<double>(pb[bstride]);
    s2 += static_cast<double>(pa[2 * astride]) * static_cast<double>(pb[2 * bstride]);
    s3 += static_cast<double>(pa[3 * astride]) * static_cast<double>(pb[3 * bstride]);
    pa += 4 * astride;
    pb += 4 * bstride;
  }
  for (; i < n; ++i) {
    s0 += static_cast<double>(*pa) * static_cast<double>(*pb);
    pa += astride;
    pb += bstride;
  }
  return (s0 + s1) + (s2 + s3);
}

void layer_norm_row(const float* x, const float* gain, const float* bias, int d,
                    float* out) {
  double mean = 0.0;
  for (int i = 0; i < d; ++i) mean += x[i];
  mean /= d;
  double var = 0.0;
  for (int i = 0; i < d; ++i) {
    double c = x[i] - mean;
    var += c * c;
  }
  var /= d;
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  for (int i = 0; i < d; ++i) {
    double xhat = (x[i] - mean) * inv;
    out[i] = static_cast<float>(xhat * gain[i] + bias[i]);
  }
}

double log_sum_exp_row(const float* z, int n) {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) m = std::max(m, static_cast<double>(z[i]));
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(static_cast<double>(z[i]) - m);
  return m + std::log(s);
}

void softmax_row(const float* z, float* out, int n) {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) m = std::max(m, static_cast<double>(z[i]));
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double e = std::exp(static_cast<double>(z[i]) - m);
    out[i] = static_cast<float>(e);
    s += e;
  }
  const double inv = 1.0 / s;
  for (int i = 0; i < n; ++i) out[i] = static_cast<float>(out[i] * inv);
}

float gelu_scalar(float x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  double xd = x;
  return static_cast<float>(0.5 * xd * (1.0 + std::erf(xd * inv_sqrt2)));
}

float gelu_grad_scalar(float x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  double xd = x;
  double cdf = 0.5 * (1.0 + std::erf(xd * inv_sqrt2));
  double pdf = inv_sqrt2pi * std::exp(-0.5 * xd * xd);
  return static_cast<float>(cdf + xd * pdf);
}

void attention_row(const float* q, const float* k_base, const float* v_base,
                   int context_len, int d_model, int n_heads, float* out,
                   float* probs) {
  const int head_dim = d_model / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  // Scratch kept local; context_len is bounded by the model's max length.
  thread_local std::vector<double> scores;
  scores.resize(static_cast<size_t>(context_len));
  for (int h = 0; h < n_heads; ++h) {
    const int off = h * head_dim;
    double max_score = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < context_len; ++j) {
      double s = dot(q + off, k_base + static_cast<size_t>(j) * d_model + off, head_dim) * scale;
      scores[static_cast<size_t>(j)] = s;
      max_score = std::max(max_score, s);
    }
    double denom = 0.0;
    for (int j = 0; j < context_len; ++j) {
      double e = std::exp(scores[static_cast<size_t>(j)] - max_score);
      scores[static_cast<size_t>(j)] = e;
      denom += e;
    }
    const double inv = 1.0 / denom;
    for (int j = 0; j < context_len; ++j) scores[static_cast<size_t>(j)] *= inv;
    if (probs != nullptr) {
      for (int j = 0; j < context_len; ++j) {
        probs[static_cast<size_t>(h) * context_len + j] =
            static_cast<float>(scores[static_cast<size_t>(j)]);
      }
    }
    for (int c = 0; c < head_dim; ++c) {
      double acc = 0.0;
      const float* vcol = v_base + off + c;
      for (int j = 0; j < context_len; ++j) {
        acc += scores[static_cast<size_t>(j)] *
               static_cast<double>(vcol[static_cast<size_t>(j) * d_model]);
      }
      out[off + c] = static_cast<float>(acc);
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ops
// ---------------------------------------------------------------------------

TensorRef matmul(Tape* tape, const TensorRef& a, const TensorRef& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const int m = a->rows(), k = a->cols(), k2 = b->rows(), n = b->cols();
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions disagree: " + a->shape_str() +
                         " vs " + b->shape_str());
  }
  auto out = Tensor::create({m, n});
  for (int i = 0; i < m; ++i) {
    const float* arow = a->row_ptr(i);
    float* orow = out->row_ptr(i);
    for (int j = 0; j < n; ++j) {
      orow[j] = static_cast<float>(detail::dot_strided(arow, 1, b->data.data() + j, n, k));
    }
  }
  if (should_record(tape, {&a, &b})) {
    out->requires_grad = true;
    tape->record([a, b, out, m, k, n]() {
      if (a->requires_grad) {
        a->ensure_grad();
        // dA = dC * B^T: rows of dC against rows of B, both contiguous.
        for (int i = 0; i < m; ++i) {
          const float* grow = out->grad.data() + static_cast<size_t>(i) * n;
          float* garow = a->grad.data() + static_cast<size_t>(i) * k;
          for (int l = 0; l < k; ++l) {
            garow[l] += static_cast<float>(
                detail::dot(grow, b->data.data() + static_cast<size_t>(l) * n, n));
          }
        }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        // dB = A^T * dC.
        for (int l = 0; l < k; ++l) {
          for (int j = 0; j < n; ++j) {
            b->grad[static_cast<size_t>(l) * n + j] += static_cast<float>(
                detail::dot_strided(a->data.data() + l, k, out->grad.data() + j, n, m));
          }
        }
      }
    });
  }
  return out;
}

TensorRef matmul_nt(Tape* tape, const TensorRef& a, const TensorRef& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  const int m = a->rows(), k = a->cols(), n = b->rows();
  if (k != b->cols()) {
    throw DimensionError("matmul_nt: inner dimensions disagree: " + a->shape_str() +
                         " vs " + b->shape_str());
  }
  auto out = Tensor::create({m, n});
  for (int i = 0; i < m; ++i) {
    const float* arow = a->row_ptr(i);
    float* orow = out->row_ptr(i);
    for (int j = 0; j < n; ++j) {
      orow[j] = static_cast<float>(detail::dot(arow, b->row_ptr(j), k));
    }
  }
  if (should_record(tape, {&a, &b})) {
    out->requires_grad = true;
    tape->record([a, b, out, m, k, n]() {
      if (a->requires_grad) {
        a->ensure_grad();
        for (int i = 0; i < m; ++i) {
          const float* grow = out->grad.data() + static_cast<size_t>(i) * n;
          float* garow = a->grad.data() + static_cast<size_t>(i) * k;
          for (int l = 0; l < k; ++l) {
            garow[l] += static_cast<float>(
                detail::dot_strided(grow, 1, b->data.data() + l, k, n));
          }
        }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int j = 0; j < n; ++j) {
          float* gbrow = b->grad.data() + static_cast<size_t>(j) * k;
          for (int l = 0; l < k; ++l) {
            gbrow[l] += static_cast<float>(
                detail::dot_strided(out->grad.data() + j, n, a->data.data() + l, k, m));
          }
        }
      }
    });
  }
  return out;
}

TensorRef add(Tape* tape, const TensorRef& a, const TensorRef& b) {
  if (!same_shape(*a, *b)) {
    throw DimensionError("add: shape mismatch: " + a->shape_str() + " vs " + b->shape_str());
  }
  auto out = Tensor::create(a->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
  if (should_record(tape, {&a, &b})) {
    out->requires_grad = true;
    tape->record([a, b, out]() {
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

TensorRef add_bias(Tape* tape, const TensorRef& mat, const TensorRef& bias) {
  require_2d(mat, "add_bias");
  if (bias->numel() != mat->cols()) {
    throw DimensionError("add_bias: bias " + bias->shape_str() + " does not match " +
                         mat->shape_str());
  }
  const int n = mat->rows(), d = mat->cols();
  auto out = Tensor::create({n, d});
  for (int i = 0; i < n; ++i) {
    const float* mrow = mat->row_ptr(i);
    float* orow = out->row_ptr(i);
    for (int j = 0; j < d; ++j) orow[j] = mrow[j] + bias->data[static_cast<size_t>(j)];
  }
  if (should_record(tape, {&mat, &bias})) {
    out->requires_grad = true;
    tape->record([mat, bias, out, n, d]() {
      if (mat->requires_grad) {
        mat->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) mat->grad[i] += out->grad[i];
      }
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (int j = 0; j < d; ++j) {
          double acc = 0.0;
          for (int i = 0; i < n; ++i) acc += out->grad[static_cast<size_t>(i) * d + j];
          bias->grad[static_cast<size_t>(j)] += static_cast<float>(acc);
        }
      }
    });
  }
  return out;
}

TensorRef mul(Tape* tape, const TensorRef& a, const TensorRef& b) {
  if (!same_shape(*a, *b)) {
    throw DimensionError("mul: shape mismatch: " + a->shape_str() + " vs " + b->shape_str());
  }
  auto out = Tensor::create(a->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
  if (should_record(tape, {&a, &b})) {
    out->requires_grad = true;
    tape->record([a, b, out]() {
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * b->data[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i] * a->data[i];
      }
    });
  }
  return out;
}

TensorRef scale(Tape* tape, const TensorRef& a, float s) {
  auto out = Tensor::create(a->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] * s;
  if (should_record(tape, {&a})) {
    out->requires_grad = true;
    tape->record([a, out, s]() {
      a->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * s;
    });
  }
  return out;
}

TensorRef gelu(Tape* tape, const TensorRef& x) {
  auto out = Tensor::create(x->shape);
  for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = detail::gelu_scalar(x->data[i]);
  if (should_record(tape, {&x})) {
    out->requires_grad = true;
    tape->record([x, out]() {
      x->ensure_grad();
      for (size_t i = 0; i < out->grad.size(); ++i) {
        x->grad[i] += out->grad[i] * detail::gelu_grad_scalar(x->data[i]);
      }
    });
  }
  return out;
}

TensorRef layer_norm(Tape* tape, const TensorRef& x, const TensorRef& gain,
                     const TensorRef& bias) {
  require_2d(x, "layer_norm");
  const int n = x->rows(), d = x->cols();
  if (gain->numel() != d || bias->numel() != d) {
    throw DimensionError("layer_norm: gain/bias do not match " + x->shape_str());
  }
  auto out = Tensor::create({n, d});
  for (int i = 0; i < n; ++i) {
    detail::layer_norm_row(x->row_ptr(i), gain->data.data(), bias->data.data(), d,
                           out->row_ptr(i));
  }
  if (should_record(tape, {&x, &gain, &bias})) {
    out->requires_grad = true;
    tape->record([x, gain, bias, out, n, d]() {
      const bool gx = x->requires_grad, gg = gain->requires_grad, gb = bias->requires_grad;
      if (gx) x->ensure_grad();
      if (gg) gain->ensure_grad();
      if (gb) bias->ensure_grad();
      std::vector<double> xhat(static_cast<size_t>(d));
      for (int i = 0; i < n; ++i) {
        const float* xr = x->row_ptr(i);
        const float* gr = out->grad.data() + static_cast<size_t>(i) * d;
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += xr[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
          double c = xr[j] - mean;
          var += c * c;
        }
        var /= d;
        const double inv = 1.0 / std::sqrt(var + 1e-5);
        for (int j = 0; j < d; ++j) xhat[static_cast<size_t>(j)] = (xr[j] - mean) * inv;
        if (gg || gb) {
          for (int j = 0; j < d; ++j) {
            if (gg) gain->grad[static_cast<size_t>(j)] +=
                static_cast<float>(gr[j] * xhat[static_cast<size_t>(j)]);
            if (gb) bias->grad[static_cast<size_t>(j)] += gr[j];
          }
        }
        if (gx) {
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (int j = 0; j < d; ++j) {
            double dxhat = static_cast<double>(gr[j]) * gain->data[static_cast<size_t>(j)];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xhat[static_cast<size_t>(j)];
          }
          mean_dxhat /= d;
          mean_dxhat_xhat /= d;
          float* gxr = x->grad.data() + static_cast<size_t>(i) * d;
          for (int j = 0; j < d; ++j) {
            double dxhat = static_cast<double>(gr[j]) * gain->data[static_cast<size_t>(j)];
            gxr[j] += static_cast<float>(
                (dxhat - mean_dxhat - xhat[static_cast<size_t>(j)] * mean_dxhat_xhat) * inv);
          }
        }
      }
    });
  }
  return out;
}

TensorRef softmax(Tape* tape, const TensorRef& x) {
  if (x->ndim() < 1 || x->shape.back() < 1) {
    throw DimensionError("softmax: last dim must be >= 1, got " + x->shape_str());
  }
  const int v = x->shape.back();
  const int64_t rows = x->numel() / v;
  auto out = Tensor::create(x->shape);
  for (int64_t i = 0; i < rows; ++i) {
    detail::softmax_row(x->data.data() + i * v, out->data.data() + i * v, v);
  }
  if (should_record(tape, {&x})) {
    out->requires_grad = true;
    tape->record([x, out, rows, v]() {
      x->ensure_grad();
      for (int64_t i = 0; i < rows; ++i) {
        const float* y = out->data.data() + i * v;
        const float* gy = out->grad.data() + i * v;
        double s = 0.0;
        for (int j = 0; j < v; ++j) s += static_cast<double>(gy[j]) * y[j];
        float* gx = x->grad.data() + i * v;
        for (int j = 0; j < v; ++j) {
          gx[j] += static_cast<float>((static_cast<double>(gy[j]) - s) * y[j]);
        }
      }
    });
  }
  return out;
}

TensorRef embedding_lookup(Tape* tape, const TensorRef& table, std::span<const int> ids) {
  require_2d(table, "embedding_lookup");
  const int v = table->rows(), d = table->cols();
  const int n = static_cast<int>(ids.size());
  auto out = Tensor::create({n, d});
  for (int i = 0; i < n; ++i) {
    const int id = ids[static_cast<size_t>(i)];
    if (id < 0 || id >= v) {
      throw IndexError("embedding_lookup: id " + std::to_string(id) +
                       " out of range [0, " + std::to_string(v) + ")");
    }
    std::memcpy(out->row_ptr(i), table->row_ptr(id), sizeof(float) * static_cast<size_t>(d));
  }
  if (should_record(tape, {&table})) {
    out->requires_grad = true;
    std::vector<int> ids_copy(ids.begin(), ids.end());
    tape->record([table, out, ids_copy, n, d]() {
      table->ensure_grad();
      for (int i = 0; i < n; ++i) {
        float* trow = table->grad.data() + static_cast<size_t>(ids_copy[static_cast<size_t>(i)]) * d;
        const float* grow = out->grad.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) trow[j] += grow[j];
      }
    });
  }
  return out;
}

TensorRef concat_cols(Tape* tape, const TensorRef& a, const TensorRef& b) {
  require_2d(a, "concat_cols");
  require_2d(b, "concat_cols");
  if (a->rows() != b->rows()) {
    throw DimensionError("concat_cols: row mismatch: " + a->shape_str() + " vs " +
                         b->shape_str());
  }
  const int n = a->rows(), d1 = a->cols(), d2 = b->cols();
  auto out = Tensor::create({n, d1 + d2});
  for (int i = 0; i < n; ++i) {
    std::memcpy(out->row_ptr(i), a->row_ptr(i), sizeof(float) * static_cast<size_t>(d1));
    std::memcpy(out->row_ptr(i) + d1, b->row_ptr(i), sizeof(float) * static_cast<size_t>(d2));
  }
  if (should_record(tape, {&a, &b})) {
    out->requires_grad = true;
    tape->record([a, b, out, n, d1, d2]() {
      for (int i = 0; i < n; ++i) {
        const float* grow = out->grad.data() + static_cast<size_t>(i) * (d1 + d2);
        if (a->requires_grad) {
          a->ensure_grad();
          float* ga = a->grad.data() + static_cast<size_t>(i) * d1;
          for (int j = 0; j < d1; ++j) ga[j] += grow[j];
        }
        if (b->requires_grad) {
          b->ensure_grad();
          float* gb = b->grad.data() + static_cast<size_t>(i) * d2;
          for (int j = 0; j < d2; ++j) gb[j] += grow[d1 + j];
        }
      }
    });
  }
  return out;
}

TensorRef slice_rows(Tape* tape, const TensorRef& x, int row_begin, int row_end) {
  require_2d(x, "slice_rows");
  if (row_begin < 0 || row_end > x->rows() || row_begin > row_end) {
    throw DimensionError("slice_rows: range [" + std::to_string(row_begin) + ", " +
                         std::to_string(row_end) + ") invalid for " + x->shape_str());
  }
  const int d = x->cols(), n = row_end - row_begin;
  auto out = Tensor::create({n, d});
  std::memcpy(out->data.data(), x->row_ptr(row_begin),
              sizeof(float) * static_cast<size_t>(n) * d);
  if (should_record(tape, {&x})) {
    out->requires_grad = true;
    tape->record([x, out, row_begin, n, d]() {
      x->ensure_grad();
      for (int i = 0; i < n; ++i) {
        float* gx = x->grad.data() + static_cast<size_t>(row_begin + i) * d;
        const float* go = out->grad.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) gx[j] += go[j];
      }
    });
  }
  return out;
}

TensorRef sum_all(Tape* tape, const TensorRef& x) {
  auto out = Tensor::create({1});
  double acc = 0.0;
  for (float v : x->data) acc += v;
  out->data[0] = static_cast<float>(acc);
  if (should_record(tape, {&x})) {
    out->requires_grad = true;
    tape->record([x, out]() {
      x->ensure_grad();
      const float g = out->grad[0];
      for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
    });
  }
  return out;
}

TensorRef multihead_attention(Tape* tape, const TensorRef& q, const TensorRef& k,
                              const TensorRef& v, int n_heads, bool causal) {
  require_2d(q, "multihead_attention");
  if (!same_shape(*q, *k) || !same_shape(*q, *v)) {
    throw DimensionError("multihead_attention: q/k/v shapes disagree: " + q->shape_str() +
                         ", " + k->shape_str() + ", " + v->shape_str());
  }
  const int n = q->rows(), d = q->cols();
  if (n_heads < 1 || d % n_heads != 0) {
    throw DimensionError("multihead_attention: d_model " + std::to_string(d) +
                         " not divisible by n_heads " + std::to_string(n_heads));
  }
  auto out = Tensor::create({n, d});
  const bool recording = should_record(tape, {&q, &k, &v});
  // Attention weights are kept for the backward pass; rectangular storage,
  // rows beyond the causal limit stay zero.
  std::vector<float> probs;
  if (recording) probs.assign(static_cast<size_t>(n) * n_heads * n, 0.0f);
  std::vector<float> tmp;
  for (int i = 0; i < n; ++i) {
    const int limit = causal ? i + 1 : n;
    if (!recording) {
      detail::attention_row(q->row_ptr(i), k->data.data(), v->data.data(), limit, d,
                            n_heads, out->row_ptr(i), nullptr);
      continue;
    }
    // attention_row emits weights packed [n_heads x limit]; spread them into
    // the rectangular [n_heads x n] slot for row i.
    tmp.resize(static_cast<size_t>(n_heads) * limit);
    detail::attention_row(q->row_ptr(i), k->data.data(), v->data.data(), limit, d,
                          n_heads, out->row_ptr(i), tmp.data());
    float* prow = probs.data() + static_cast<size_t>(i) * n_heads * n;
    for (int h = 0; h < n_heads; ++h) {
      std::memcpy(prow + static_cast<size_t>(h) * n, tmp.data() + static_cast<size_t>(h) * limit,
                  sizeof(float) * static_cast<size_t>(limit));
    }
  }
  if (recording) {
    out->requires_grad = true;
    const int head_dim = d / n_heads;
    tape->record([q, k, v, out, probs = std::move(probs), n, d, n_heads, head_dim, causal]() {
      const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
      if (q->requires_grad) q->ensure_grad();
      if (k->requires_grad) k->ensure_grad();
      if (v->requires_grad) v->ensure_grad();
      std::vector<double> da(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) {
        const int limit = causal ? i + 1 : n;
        const float* gout = out->grad.data() + static_cast<size_t>(i) * d;
        for (int h = 0; h < n_heads; ++h) {
          const int off = h * head_dim;
          const float* arow = probs.data() + (static_cast<size_t>(i) * n_heads + h) * n;
          // da_j = dOut . v_j ; ds_j = a_j (da_j - sum_l a_l da_l)
          double weighted = 0.0;
          for (int j = 0; j < limit; ++j) {
            double aj = arow[j];
            double dj = detail::dot(gout + off, v->data.data() + static_cast<size_t>(j) * d + off,
                                    head_dim);
            da[static_cast<size_t>(j)] = dj;
            weighted += aj * dj;
          }
          for (int j = 0; j < limit; ++j) {
            const double aj = arow[j];
            const double ds = aj * (da[static_cast<size_t>(j)] - weighted) * scale;
            if (q->requires_grad) {
              float* gq = q->grad.data() + static_cast<size_t>(i) * d + off;
              const float* krow = k->data.data() + static_cast<size_t>(j) * d + off;
              for (int c = 0; c < head_dim; ++c) gq[c] += static_cast<float>(ds * krow[c]);
            }
            if (k->requires_grad) {
              float* gk = k->grad.data() + static_cast<size_t>(j) * d + off;
              const float* qrow = q->data.data() + static_cast<size_t>(i) * d + off;
              for (int c = 0; c < head_dim; ++c) gk[c] += static_cast<float>(ds * qrow[c]);
            }
            if (v->requires_grad) {
              float* gv = v->grad.data() + static_cast<size_t>(j) * d + off;
              for (int c = 0; c < head_dim; ++c) gv[c] += static_cast<float>(aj * gout[off + c]);
            }
          }
        }
      }
    });
  }
  return out;
}

TensorRef cross_entropy(Tape* tape, const TensorRef& logits, std::span<const int> targets,
                        std::span<const float> weights, CrossEntropyInfo* info) {
  require_2d(logits, "cross_entropy");
  const int n = logits->rows(), v = logits->cols();
  if (static_cast<int>(targets.size()) != n || static_cast<int>(weights.size()) != n) {
    throw DimensionError("cross_entropy: targets/weights length does not match " +
                         logits->shape_str());
  }
  double weight_sum = 0.0;
  for (int i = 0; i < n; ++i) weight_sum += weights[static_cast<size_t>(i)];
  auto out = Tensor::create({1});
  if (weight_sum == 0.0) {
    if (info != nullptr) {
      info->loss = 0.0;
      info->all_masked = true;
      info->active_positions = 0;
    }
    return out;  // defined as 0; nothing to record
  }
  double total = 0.0;
  int64_t active = 0;
  std::vector<double> lse(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int t = targets[static_cast<size_t>(i)];
    if (t < 0 || t >= v) {
      throw IndexError("cross_entropy: target " + std::to_string(t) + " out of range [0, " +
                       std::to_string(v) + ")");
    }
    lse[static_cast<size_t>(i)] = detail::log_sum_exp_row(logits->row_ptr(i), v);
    const double w = weights[static_cast<size_t>(i)];
    if (w != 0.0) {
      total += w * (lse[static_cast<size_t>(i)] -
                    static_cast<double>(logits->at(i, t)));
      ++active;
    }
  }
  const double mean = total / weight_sum;
  out->data[0] = static_cast<float>(mean);
  if (info != nullptr) {
    info->loss = mean;
    info->all_masked = false;
    info->active_positions = active;
  }
  if (should_record(tape, {&logits})) {
    out->requires_grad = true;
    std::vector<int> t_copy(targets.begin(), targets.end());
    std::vector<float> w_copy(weights.begin(), weights.end());
    tape->record([logits, out, t_copy, w_copy, lse = std::move(lse), n, v, weight_sum]() {
      logits->ensure_grad();
      const double g = out->grad[0];
      for (int i = 0; i < n; ++i) {
        const double w = w_copy[static_cast<size_t>(i)];
        if (w == 0.0) continue;
        const double coef = g * w / weight_sum;
        const float* zrow = logits->row_ptr(i);
        float* grow = logits->grad.data() + static_cast<size_t>(i) * v;
        const double l = lse[static_cast<size_t>(i)];
        for (int j = 0; j < v; ++j) {
          double p = std::exp(static_cast<double>(zrow[j]) - l);
          grow[j] += static_cast<float>(coef * p);
        }
        grow[t_copy[static_cast<size_t>(i)]] -= static_cast<float>(coef);
      }
    });
  }
  return out;
}

}  // namespace maria
