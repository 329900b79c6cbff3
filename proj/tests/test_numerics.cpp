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

#include <cmath>

#include "doctest.h"
#include "maria/adam.hpp"
#include "maria/tensor.hpp"
#include "oracles.hpp"

using namespace maria;
namespace mt = maria::testing;

TEST_SUITE_BEGIN("numerics");

TEST_CASE("matmul identity and projector") {
  auto eye = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  auto a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  auto out = matmul(nullptr, eye, a);
  CHECK(out->data == std::vector<float>{1, 2, 3, 4});

  auto proj = Tensor::from_values({2, 2}, {1, 0, 0, 0});
  auto b = Tensor::from_values({2, 2}, {5, 6, 7, 8});
  auto pb = matmul(nullptr, proj, b);
  CHECK(pb->data == std::vector<float>{5, 6, 0, 0});
}

TEST_CASE("matmul shape mismatch names both shapes") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({4, 2});
  CHECK_THROWS_WITH_AS(matmul(nullptr, a, b),
                       doctest::Contains("[2x3]"), DimensionError);
  CHECK_THROWS_WITH_AS(matmul(nullptr, a, b),
                       doctest::Contains("[4x2]"), DimensionError);
}

TEST_CASE("matmul gradient matches central finite differences") {
  Rng rng(41);
  auto a = Tensor::randn({4, 4}, rng, 1.0, true);
  auto b = Tensor::randn({4, 4}, rng, 1.0, true);

  Tape tape;
  auto loss = sum_all(&tape, matmul(&tape, a, b));
  tape.backward(loss);

  auto loss_fn = [&]() { return mt::sum_oracle(matmul(nullptr, a, b)); };
  for (int64_t i = 0; i < a->numel(); ++i) {
    const double fd = mt::fd_grad(loss_fn, a, i, 1e-3);
    CHECK(mt::rel_err(fd, a->grad_at(i)) <= 1e-3);
  }
  for (int64_t i = 0; i < b->numel(); ++i) {
    const double fd = mt::fd_grad(loss_fn, b, i, 1e-3);
    CHECK(mt::rel_err(fd, b->grad_at(i)) <= 1e-3);
  }
}

TEST_CASE("softmax uniform, overflow, shift invariance") {
  auto z = Tensor::zeros({1, 4});
  auto s = softmax(nullptr, z);
  for (float p : s->data) CHECK(p == doctest::Approx(0.25).epsilon(1e-6));

  auto big = Tensor::from_values({1, 2}, {1000.0f, 0.0f});
  auto sb = softmax(nullptr, big);
  CHECK(std::abs(sb->data[0] - 1.0) <= 1e-12);
  CHECK(std::abs(sb->data[1]) <= 1e-12);

  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = Tensor::randn({1, 8}, rng, 3.0);
    const float c = static_cast<float>(rng.normal() * 5.0);
    auto shifted = Tensor::create({1, 8});
    for (int i = 0; i < 8; ++i) shifted->data[i] = x->data[i] + c;
    auto s1 = softmax(nullptr, x);
    auto s2 = softmax(nullptr, shifted);
    for (int i = 0; i < 8; ++i) CHECK(std::abs(s1->data[i] - s2->data[i]) <= 1e-6);
  }
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(11);
  auto x = Tensor::randn({16, 33}, rng, 2.0);
  auto s = softmax(nullptr, x);
  for (int r = 0; r < 16; ++r) {
    double sum = 0.0;
    for (int c = 0; c < 33; ++c) sum += s->at(r, c);
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("cross_entropy uniform logits is log vocab") {
  auto logits = Tensor::zeros({3, 260});
  std::vector<int> targets{5, 100, 259};
  std::vector<float> weights{1, 1, 1};
  CrossEntropyInfo info;
  auto loss = cross_entropy(nullptr, logits, targets, weights, &info);
  CHECK(info.loss == doctest::Approx(std::log(260.0)).epsilon(1e-6));
  CHECK(loss->data[0] == doctest::Approx(5.5607).epsilon(1e-4));
  CHECK(info.loss >= 0.0);
}

TEST_CASE("cross_entropy margin drives loss to zero") {
  double prev = 1e9;
  for (float margin : {2.0f, 8.0f, 32.0f}) {
    auto logits = Tensor::zeros({1, 16});
    logits->at(0, 3) = margin;
    std::vector<int> targets{3};
    std::vector<float> weights{1};
    CrossEntropyInfo info;
    cross_entropy(nullptr, logits, targets, weights, &info);
    CHECK(info.loss < prev);
    prev = info.loss;
  }
  CHECK(prev < 1e-10);
}

TEST_CASE("cross_entropy all-zero weights is zero with warning") {
  auto logits = Tensor::zeros({2, 8});
  std::vector<int> targets{1, 2};
  std::vector<float> weights{0, 0};
  CrossEntropyInfo info;
  auto loss = cross_entropy(nullptr, logits, targets, weights, &info);
  CHECK(loss->data[0] == 0.0f);
  CHECK(info.all_masked);
}

TEST_CASE("cross_entropy rejects out-of-range targets") {
  auto logits = Tensor::zeros({1, 8});
  std::vector<int> targets{8};
  std::vector<float> weights{1};
  CHECK_THROWS_AS(cross_entropy(nullptr, logits, targets, weights), IndexError);
}

TEST_CASE("layer_norm of constant vector returns bias") {
  auto x = Tensor::full({2, 6}, 3.5f);
  auto gain = Tensor::full({6}, 2.0f);
  auto bias = Tensor::from_values({6}, {1, 2, 3, 4, 5, 6});
  auto out = layer_norm(nullptr, x, gain, bias);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 6; ++c) CHECK(out->at(r, c) == doctest::Approx(bias->data[c]).epsilon(1e-4));
  }
}

TEST_CASE("gelu at zero") {
  auto x = Tensor::zeros({1, 1});
  CHECK(gelu(nullptr, x)->data[0] == 0.0f);
}

TEST_CASE("embedding_lookup picks rows") {
  auto eye = Tensor::from_values({4, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  std::vector<int> ids{2};
  auto row = embedding_lookup(nullptr, eye, ids);
  CHECK(row->data == std::vector<float>{0, 0, 1, 0});
  std::vector<int> bad{4};
  CHECK_THROWS_AS(embedding_lookup(nullptr, eye, bad), IndexError);
}

// FD oracles evaluate the double-precision reference forwards, so the check
// measures the backward rules, not f32 forward noise.
TEST_CASE("per-op gradients match central finite differences of the reference") {
  Rng rng(101);
  const double tol = 1e-3;

  auto weighted_sum = [](const mt::Mat& m, const TensorRef& coeff) {
    double s = 0.0;
    const int cols = coeff->cols();
    for (size_t r = 0; r < m.size(); ++r) {
      for (size_t c = 0; c < m[r].size(); ++c) {
        s += m[r][c] * coeff->data[r * static_cast<size_t>(cols) + c];
      }
    }
    return s;
  };

  SUBCASE("gelu") {
    auto x = Tensor::randn({3, 5}, rng, 1.0, true);
    Tape tape;
    tape.backward(sum_all(&tape, gelu(&tape, x)));
    auto fn = [&]() {
      double s = 0.0;
      for (float v : x->data) s += mt::ref_gelu(v);
      return s;
    };
    for (int64_t i = 0; i < x->numel(); ++i) {
      CHECK(mt::rel_err(mt::fd_grad(fn, x, i, 1e-3), x->grad_at(i)) <= tol);
    }
  }
  SUBCASE("layer_norm") {
    auto x = Tensor::randn({3, 8}, rng, 1.0, true);
    auto g = Tensor::randn({8}, rng, 0.5, true);
    auto b = Tensor::randn({8}, rng, 0.5, true);
    auto coeff = Tensor::randn({3, 8}, rng, 1.0);
    Tape tape;
    // A non-uniform weighting makes the row-coupled terms visible.
    tape.backward(sum_all(&tape, mul(&tape, layer_norm(&tape, x, g, b), coeff)));
    auto fn = [&]() {
      std::vector<double> gv(g->data.begin(), g->data.end());
      std::vector<double> bv(b->data.begin(), b->data.end());
      return weighted_sum(mt::ref_layer_norm(mt::to_mat(x), gv, bv), coeff);
    };
    for (auto& t : {x, g, b}) {
      for (int64_t i = 0; i < t->numel(); ++i) {
        CHECK(mt::rel_err(mt::fd_grad(fn, t, i, 1e-3), t->grad_at(i)) <= tol);
      }
    }
  }
  SUBCASE("softmax") {
    auto x = Tensor::randn({4, 6}, rng, 1.0, true);
    auto coeff = Tensor::randn({4, 6}, rng, 1.0);
    Tape tape;
    tape.backward(sum_all(&tape, mul(&tape, softmax(&tape, x), coeff)));
    auto fn = [&]() { return weighted_sum(mt::ref_softmax(mt::to_mat(x)), coeff); };
    for (int64_t i = 0; i < x->numel(); ++i) {
      CHECK(mt::rel_err(mt::fd_grad(fn, x, i, 1e-3), x->grad_at(i)) <= tol);
    }
  }
  SUBCASE("multihead_attention causal and bidirectional") {
    for (bool causal : {true, false}) {
      auto q = Tensor::randn({5, 8}, rng, 1.0, true);
      auto k = Tensor::randn({5, 8}, rng, 1.0, true);
      auto v = Tensor::randn({5, 8}, rng, 1.0, true);
      auto coeff = Tensor::randn({5, 8}, rng, 1.0);
      Tape tape;
      tape.backward(sum_all(
          &tape, mul(&tape, multihead_attention(&tape, q, k, v, 2, causal), coeff)));
      auto fn = [&]() {
        return weighted_sum(
            mt::ref_attention(mt::to_mat(q), mt::to_mat(k), mt::to_mat(v), 2, causal), coeff);
      };
      for (auto& t : {q, k, v}) {
        for (int64_t i = 0; i < t->numel(); ++i) {
          CHECK(mt::rel_err(mt::fd_grad(fn, t, i, 1e-3), t->grad_at(i)) <= tol);
        }
      }
    }
  }
  SUBCASE("cross_entropy") {
    auto logits = Tensor::randn({4, 9}, rng, 1.0, true);
    std::vector<int> targets{1, 0, 8, 4};
    std::vector<float> weights{1, 0, 1, 1};
    Tape tape;
    tape.backward(cross_entropy(&tape, logits, targets, weights));
    auto fn = [&]() { return mt::ref_cross_entropy(mt::to_mat(logits), targets, weights); };
    for (int64_t i = 0; i < logits->numel(); ++i) {
      CHECK(mt::rel_err(mt::fd_grad(fn, logits, i, 1e-3), logits->grad_at(i)) <= tol);
    }
  }
  SUBCASE("embedding_lookup scatter") {
    auto table = Tensor::randn({6, 4}, rng, 1.0, true);
    std::vector<int> ids{0, 3, 3, 5};
    Tape tape;
    tape.backward(sum_all(&tape, embedding_lookup(&tape, table, ids)));
    auto fn = [&]() { return mt::sum_oracle(embedding_lookup(nullptr, table, ids)); };
    for (int64_t i = 0; i < table->numel(); ++i) {
      CHECK(mt::rel_err(mt::fd_grad(fn, table, i, 1e-3), table->grad_at(i)) <= tol);
    }
  }
  SUBCASE("reference forward agrees with the implementation") {
    auto q = Tensor::randn({6, 8}, rng, 1.0);
    auto k = Tensor::randn({6, 8}, rng, 1.0);
    auto v = Tensor::randn({6, 8}, rng, 1.0);
    auto impl = multihead_attention(nullptr, q, k, v, 4, true);
    auto ref = mt::ref_attention(mt::to_mat(q), mt::to_mat(k), mt::to_mat(v), 4, true);
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 8; ++c) {
        CHECK(std::abs(impl->at(r, c) - ref[static_cast<size_t>(r)][static_cast<size_t>(c)]) <= 1e-5);
      }
    }
  }
}

TEST_CASE("backward basics") {
  SUBCASE("d(x^2)/dx at 3 is 6") {
    auto x = Tensor::from_values({1}, {3.0f}, true);
    Tape tape;
    auto y = mul(&tape, x, x);
    tape.backward(y);
    CHECK(x->grad_at(0) == doctest::Approx(6.0));
  }
  SUBCASE("non-scalar loss rejected") {
    auto x = Tensor::zeros({2}, true);
    Tape tape;
    auto y = add(&tape, x, x);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
  }
  SUBCASE("unused parameter has exact zero gradient") {
    auto used = Tensor::from_values({1}, {2.0f}, true);
    auto unused = Tensor::from_values({1}, {5.0f}, true);
    Tape tape;
    tape.backward(mul(&tape, used, used));
    CHECK(unused->grad_at(0) == 0.0f);
    CHECK(used->grad_at(0) != 0.0f);
  }
}

TEST_CASE("adam basics") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto p = Tensor::from_values({3}, {1.0f, -2.0f, 0.5f}, true);
    Adam opt({p});
    const auto before = p->data;
    opt.step(0.01);
    CHECK(p->data == before);
  }
  SUBCASE("first step moves against the gradient") {
    auto p = Tensor::from_values({2}, {1.0f, 1.0f}, true);
    p->ensure_grad();
    p->grad[0] = 2.0f;
    p->grad[1] = -3.0f;
    Adam opt({p});
    opt.step(0.01);
    CHECK(p->data[0] < 1.0f);
    CHECK(p->data[1] > 1.0f);
  }
  SUBCASE("converges on a 1-D quadratic") {
    auto x = Tensor::from_values({1}, {1.0f}, true);
    Adam opt({x});
    for (int step = 0; step < 500; ++step) {
      Tape tape;
      auto loss = mul(&tape, x, x);
      tape.backward(loss);
      opt.step(0.01);
      opt.zero_grad();
    }
    CHECK(std::abs(x->data[0]) < 1e-3);
  }
}

TEST_CASE("cosine schedule endpoints") {
  CHECK(cosine_lr(5e-5, 0, 1000) == doctest::Approx(5e-5));
  CHECK(cosine_lr(5e-5, 500, 1000) == doctest::Approx(2.5e-5));
  CHECK(cosine_lr(5e-5, 999, 1000) <= 1e-7);
}

TEST_CASE("tensor invariants") {
  auto t = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  CHECK(t->numel() == 4);
  CHECK_THROWS_AS(Tensor::from_values({2, 2}, {1, 2, 3}), DimensionError);
  t->data[2] = std::numeric_limits<float>::infinity();
  CHECK_FALSE(t->all_finite());
  CHECK_THROWS_AS(t->check_finite("test"), DataError);
}

TEST_CASE("ops are deterministic") {
  Rng rng(5);
  auto a = Tensor::randn({8, 8}, rng, 1.0);
  auto b = Tensor::randn({8, 8}, rng, 1.0);
  auto c1 = matmul(nullptr, a, b);
  auto c2 = matmul(nullptr, a, b);
  CHECK(c1->data == c2->data);
}

TEST_SUITE_END();
