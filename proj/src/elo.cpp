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

#include "maria/elo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "json.hpp"

namespace maria {

ComparisonRecord parse_comparison_json(const std::string& line) {
  auto j = nlohmann::json::parse(line);
  ComparisonRecord r;
  r.item = j.value("item", "");
  r.a = j.at("a").get<std::string>();
  r.b = j.at("b").get<std::string>();
  const std::string outcome = j.at("outcome").get<std::string>();
  if (outcome == "a") {
    r.outcome = ComparisonRecord::Outcome::a_wins;
  } else if (outcome == "b") {
    r.outcome = ComparisonRecord::Outcome::b_wins;
  } else if (outcome == "tie") {
    r.outcome = ComparisonRecord::Outcome::tie;
  } else {
    throw DataError("comparison record: outcome must be \"a\", \"b\" or \"tie\", got \"" +
                    outcome + "\"");
  }
  if (r.a == r.b) throw DataError("comparison record: a and b must differ");
  return r;
}

std::vector<ComparisonRecord> read_comparison_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_comparison_jsonl: cannot read " + path);
  std::vector<ComparisonRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(parse_comparison_json(line));
  }
  return out;
}

double EloTable::rating(const std::string& model) const {
  for (size_t i = 0; i < models.size(); ++i) {
    if (models[i] == model) return ratings[i];
  }
  throw ContractError("EloTable: unknown model '" + model + "'");
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) { parent[static_cast<size_t>(find(a))] = find(b); }
};

// Solves H x = rhs in place by Gaussian elimination with partial pivoting.
std::vector<double> solve_dense(std::vector<std::vector<double>> h, std::vector<double> rhs) {
  const int n = static_cast<int>(rhs.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(h[static_cast<size_t>(r)][static_cast<size_t>(col)]) >
          std::abs(h[static_cast<size_t>(pivot)][static_cast<size_t>(col)])) {
        pivot = r;
      }
    }
    std::swap(h[static_cast<size_t>(col)], h[static_cast<size_t>(pivot)]);
    std::swap(rhs[static_cast<size_t>(col)], rhs[static_cast<size_t>(pivot)]);
    const double diag = h[static_cast<size_t>(col)][static_cast<size_t>(col)];
    if (std::abs(diag) < 1e-30) throw DataError("bradley_terry: singular system");
    for (int r = col + 1; r < n; ++r) {
      const double f = h[static_cast<size_t>(r)][static_cast<size_t>(col)] / diag;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) {
        h[static_cast<size_t>(r)][static_cast<size_t>(c)] -=
            f * h[static_cast<size_t>(col)][static_cast<size_t>(c)];
      }
      rhs[static_cast<size_t>(r)] -= f * rhs[static_cast<size_t>(col)];
    }
  }
  std::vector<double> x(static_cast<size_t>(n), 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double acc = rhs[static_cast<size_t>(r)];
    for (int c = r + 1; c < n; ++c) {
      acc -= h[static_cast<size_t>(r)][static_cast<size_t>(c)] * x[static_cast<size_t>(c)];
    }
    x[static_cast<size_t>(r)] = acc / h[static_cast<size_t>(r)][static_cast<size_t>(r)];
  }
  return x;
}

}  // namespace

EloTable bradley_terry(const std::vector<ComparisonRecord>& records, double scale,
                       double base, double init, double l2) {
  if (records.empty()) throw ContractError("bradley_terry: need at least one record");
  if (scale <= 0 || base <= 1) throw ContractError("bradley_terry: invalid scale/base");

  // Name -> index, sorted, so the fit never depends on record order.
  std::map<std::string, int> index;
  for (const auto& r : records) {
    index.emplace(r.a, 0);
    index.emplace(r.b, 0);
  }
  EloTable table;
  for (auto& [name, idx] : index) {
    idx = static_cast<int>(table.models.size());
    table.models.push_back(name);
  }
  const int n = static_cast<int>(table.models.size());

  // Win matrix; ties contribute exactly representable halves, so aggregation
  // is order-independent bit for bit.
  std::vector<std::vector<double>> wins(static_cast<size_t>(n),
                                        std::vector<double>(static_cast<size_t>(n), 0.0));
  UnionFind uf(n);
  for (const auto& r : records) {
    const int a = index.at(r.a), b = index.at(r.b);
    uf.unite(a, b);
    switch (r.outcome) {
      case ComparisonRecord::Outcome::a_wins: wins[static_cast<size_t>(a)][static_cast<size_t>(b)] += 1.0; break;
      case ComparisonRecord::Outcome::b_wins: wins[static_cast<size_t>(b)][static_cast<size_t>(a)] += 1.0; break;
      case ComparisonRecord::Outcome::tie:
        wins[static_cast<size_t>(a)][static_cast<size_t>(b)] += 0.5;
        wins[static_cast<size_t>(b)][static_cast<size_t>(a)] += 0.5;
        break;
    }
  }
  for (int i = 1; i < n; ++i) {
    if (uf.find(i) != uf.find(0)) {
      table.connected = false;
      break;
    }
  }

  // Damped Newton on the regularized negative log-likelihood; convex, tiny.
  const double s = std::log(base) / scale;
  std::vector<double> r(static_cast<size_t>(n), init);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<double> grad(static_cast<size_t>(n), 0.0);
    std::vector<std::vector<double>> hess(static_cast<size_t>(n),
                                          std::vector<double>(static_cast<size_t>(n), 0.0));
    for (int i = 0; i < n; ++i) {
      grad[static_cast<size_t>(i)] = l2 * (r[static_cast<size_t>(i)] - init);
      hess[static_cast<size_t>(i)][static_cast<size_t>(i)] = l2;
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double games = wins[static_cast<size_t>(i)][static_cast<size_t>(j)] +
                             wins[static_cast<size_t>(j)][static_cast<size_t>(i)];
        if (games == 0.0) continue;
        const double p = 1.0 / (1.0 + std::exp(-s * (r[static_cast<size_t>(i)] - r[static_cast<size_t>(j)])));
        grad[static_cast<size_t>(i)] -=
            s * (wins[static_cast<size_t>(i)][static_cast<size_t>(j)] - games * p);
        const double curv = s * s * games * p * (1.0 - p);
        hess[static_cast<size_t>(i)][static_cast<size_t>(i)] += curv;
        hess[static_cast<size_t>(i)][static_cast<size_t>(j)] -= curv;
      }
    }
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    table.iterations = iter + 1;
    table.grad_norm = gmax;
    if (gmax < 1e-12) break;
    std::vector<double> step = solve_dense(hess, grad);
    double smax = 0.0;
    for (double d : step) smax = std::max(smax, std::abs(d));
    // Cap the Newton step; far-from-optimum logistic curvature is tiny.
    const double cap = 4.0 * scale;
    const double damp = smax > cap ? cap / smax : 1.0;
    for (int i = 0; i < n; ++i) r[static_cast<size_t>(i)] -= damp * step[static_cast<size_t>(i)];
  }

  // Pin the gauge: mean rating == init.
  double mean = 0.0;
  for (double x : r) mean += x;
  mean /= static_cast<double>(n);
  for (double& x : r) x += init - mean;
  table.ratings = std::move(r);
  return table;
}

}  // namespace maria
