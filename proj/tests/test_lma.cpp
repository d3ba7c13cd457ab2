#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "lamp/error.hpp"
#include "lamp/lma.hpp"
#include "oracles.hpp"

using namespace lamp;
using ad::Tensor;

namespace {

double elu(double x) { return x > 0 ? x : std::expm1(x); }

IntegratedSubGraph toy_graph() {
  IntegratedSubGraph g;
  g.n = 4;
  g.metapaths = {"PAP", "PSP"};
  g.edges = {{0, 1}, {0, 2}, {1, 2}, {2, 3}};
  g.bits = {1, 0, 0, 1, 1, 1, 1, 0};
  return g;
}

IntegratedSubGraph chain(std::size_t edges) {
  IntegratedSubGraph g;
  g.n = edges + 1;
  g.metapaths = {"m"};
  for (std::size_t e = 0; e < edges; ++e) g.edges.push_back({static_cast<int>(e), static_cast<int>(e + 1)});
  g.bits.assign(edges, 1);
  return g;
}

struct Aug {
  ad::ParamStore store;
  AugmenterParams ap;
};

Aug make_aug(std::size_t in, std::size_t p, AugmenterConfig cfg = {}, std::uint64_t seed = 1) {
  Aug a;
  Rng rng(seed);
  a.ap = init_augmenter(a.store, in, p, cfg, rng);
  return a;
}

}  // namespace

TEST_CASE("random drop with rate 0 keeps the graph") {
  auto g = toy_graph();
  Rng rng(1);
  auto d = random_edge_drop(g, 0.0, rng);
  CHECK(d.edges == g.edges);
  CHECK(d.bits == g.bits);
  CHECK(d.n == g.n);
}

TEST_CASE("random drop near rate 1 empties the edge set but keeps nodes") {
  auto g = chain(3);
  Rng rng(2);
  int empty = 0;
  for (int t = 0; t < 100; ++t) {
    auto d = random_edge_drop(g, 0.999, rng);
    CHECK(d.n == g.n);
    empty += d.edges.empty();
  }
  CHECK(empty >= 95);
  CHECK_THROWS_AS(random_edge_mask(3, 1.0, rng), ArgumentError);
}

TEST_CASE("random drop retention follows the binomial") {
  Rng rng(3);
  auto kept = random_edge_mask(10000, 0.5, rng);
  CHECK(kept.size() >= 4850);
  CHECK(kept.size() <= 5150);
  CHECK(std::is_sorted(kept.begin(), kept.end()));
}

TEST_CASE("zeroed final layer gives the bias for every edge") {
  auto g = toy_graph();
  auto a = make_aug(3, 2);
  a.store.get("aug.mlp.w2").mutable_value().fill(0.0);
  a.store.get("aug.mlp.b2").mutable_value()(0, 0) = 0.37;
  Rng rng(4);
  Tensor x = Tensor::constant(oracle::random_matrix(4, 3, rng));
  Tensor w = edge_logits(g, x, a.ap, a.store, Tensor::constant(Matrix(1, 2, 1.0)));
  for (double v : w.value().data) CHECK(v == 0.37);
}

TEST_CASE("identical endpoints and encodings give identical logits") {
  IntegratedSubGraph g;
  g.n = 4;
  g.metapaths = {"m0", "m1"};
  g.edges = {{0, 1}, {2, 3}};
  g.bits = {1, 1, 1, 1};
  auto a = make_aug(3, 2);
  Rng rng(5);
  Matrix x = oracle::random_matrix(4, 3, rng);
  for (std::size_t j = 0; j < 3; ++j) {
    x(2, j) = x(0, j);
    x(3, j) = x(1, j);
  }
  Tensor w = edge_logits(g, Tensor::constant(x), a.ap, a.store, Tensor::constant(Matrix(1, 2, 1.0)));
  CHECK(w.value()(0, 0) == w.value()(1, 0));
}

TEST_CASE("edge logits match a straight-line recomputation") {
  auto g = toy_graph();
  AugmenterConfig cfg;
  cfg.dim = 3;
  cfg.hidden = 4;
  auto a = make_aug(2, 2, cfg, 6);
  Rng rng(7);
  for (auto& p : a.store.all()) p.mutable_value() = oracle::random_matrix(p.rows(), p.cols(), rng);
  Matrix x = oracle::random_matrix(4, 2, rng);
  Matrix gamma = Matrix::from_rows({{0.8, 1.4}});
  Tensor w = edge_logits(g, Tensor::constant(x), a.ap, a.store, Tensor::constant(gamma));

  const std::size_t n = 4;
  std::vector<std::vector<double>> adj(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) adj[i][i] = 1;
  for (auto [u, v] : g.edges) adj[u][v] = adj[v][u] = 1;
  std::vector<double> deg(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += adj[i][j];
  std::vector<std::vector<double>> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = {x(i, 0), x(i, 1)};
  for (std::size_t k = 0; k < 2; ++k) {
    const Matrix& W = a.store.get(AugmenterParams::gcn_name(k, "W")).value();
    const Matrix& b = a.store.get(AugmenterParams::gcn_name(k, "b")).value();
    std::vector<std::vector<double>> hw(n, std::vector<double>(W.cols, 0.0)), next(n, std::vector<double>(W.cols, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t r = 0; r < W.rows; ++r)
        for (std::size_t c = 0; c < W.cols; ++c) hw[i][c] += h[i][r] * W(r, c);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (adj[i][j] != 0)
          for (std::size_t c = 0; c < W.cols; ++c) next[i][c] += hw[j][c] / std::sqrt(deg[i] * deg[j]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < W.cols; ++c) {
        next[i][c] += b(0, c);
        if (k == 0) next[i][c] = elu(next[i][c]);
      }
    h = next;
  }
  const Matrix& w1 = a.store.get("aug.mlp.w1").value();
  const Matrix& b1 = a.store.get("aug.mlp.b1").value();
  const Matrix& w2 = a.store.get("aug.mlp.w2").value();
  const double b2 = a.store.get("aug.mlp.b2").value()(0, 0);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    auto [u, v] = g.edges[e];
    std::vector<double> in = h[u];
    in.insert(in.end(), h[v].begin(), h[v].end());
    for (std::size_t i = 0; i < 2; ++i) in.push_back(g.encoding(e, i) * gamma(0, i));
    double out = b2;
    for (std::size_t c = 0; c < w1.cols; ++c) {
      double z = b1(0, c);
      for (std::size_t r = 0; r < in.size(); ++r) z += in[r] * w1(r, c);
      out += elu(z) * w2(c, 0);
    }
    CHECK(std::abs(w.value()(e, 0) - out) < 1e-12);
  }
}

TEST_CASE("gumbel relaxation closed forms") {
  for (double tau : {0.01, 0.5, 1.0, 7.0}) {
    auto s = gumbel_from_uniform(Tensor::constant(Matrix(1, 1, 0.0)), tau, {0.5});
    CHECK(s.p.value()(0, 0) == 0.5);
  }
  auto hard = gumbel_from_uniform(Tensor::constant(Matrix(1, 1, 2.0)), 1e-4, {0.5});
  CHECK(hard.p.value()(0, 0) == doctest::Approx(1.0));
  auto low = gumbel_from_uniform(Tensor::constant(Matrix(1, 1, -2.0)), 1e-4, {0.5});
  CHECK(low.p.value()(0, 0) < 1e-100);
  CHECK(std::isfinite(low.log_p.value()(0, 0)));
  auto edge = gumbel_from_uniform(Tensor::constant(Matrix(2, 1, 0.0)), 1.0, {0.0, 1.0});
  CHECK(std::isfinite(edge.noise(0, 0)));
  CHECK(std::isfinite(edge.noise(1, 0)));
  CHECK_THROWS_AS(gumbel_from_uniform(Tensor::constant(Matrix(1, 1)), 0.0, {0.5}), ArgumentError);
}

TEST_CASE("low-temperature soft samples average to sigmoid(omega)") {
  Rng rng(8);
  for (double w : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    auto s = gumbel_sample(Tensor::constant(Matrix(10000, 1, w)), 0.01, rng);
    double mean = 0;
    for (double p : s.p.value().data) mean += p;
    mean /= 10000.0;
    CHECK(std::abs(mean - 1.0 / (1.0 + std::exp(-w))) < 0.02);
  }
}

TEST_CASE("no drop and a zero scorer keep every edge with centred weights") {
  auto g = chain(2000);
  auto a = make_aug(2, 1, {.drop_rate = 0.0});
  a.store.get("aug.mlp.w2").mutable_value().fill(0.0);
  Rng rng(9);
  Tensor x = Tensor::constant(oracle::random_matrix(g.n, 2, rng));
  Rng drop(1), gum(2);
  auto out = augment(g, x, a.ap, a.store, Tensor::constant(Matrix(1, 1, 1.0)), 0.0, drop, gum);
  CHECK(out.graph.edges == g.edges);
  double mean = 0;
  for (double p : out.p.value().data) mean += p;
  mean /= static_cast<double>(g.edges.size());
  CHECK(std::abs(mean - 0.5) < 0.02);
  for (double q : out.retention.value().data) CHECK(q == 0.5);
}

TEST_CASE("augmentation is deterministic, keeps nodes and yields a subset") {
  auto g = chain(50);
  auto a = make_aug(3, 1);
  Rng rng(10);
  Tensor x = Tensor::constant(oracle::random_matrix(g.n, 3, rng));
  Tensor gamma = Tensor::constant(Matrix(1, 1, 1.0));
  Rng d1(4), g1(5), d2(4), g2(5);
  auto o1 = augment(g, x, a.ap, a.store, gamma, 0.5, d1, g1);
  auto o2 = augment(g, x, a.ap, a.store, gamma, 0.5, d2, g2);
  CHECK(o1.kept == o2.kept);
  CHECK(o1.p.value() == o2.p.value());
  CHECK(o1.logits.value() == o2.logits.value());
  CHECK(o1.graph.n == g.n);
  std::set<std::pair<int, int>> all(g.edges.begin(), g.edges.end());
  for (const auto& e : o1.graph.edges) CHECK(all.count(e) == 1);
}

TEST_CASE("augmentation gives up after repeated empty drops") {
  auto g = chain(1);
  auto a = make_aug(2, 1);
  Tensor x = Tensor::constant(Matrix(2, 2, 0.1));
  Rng drop(3), gum(4);
  CHECK_THROWS_AS(augment(g, x, a.ap, a.store, Tensor::constant(Matrix(1, 1, 1.0)), 0.9999, drop, gum),
                  ArgumentError);
}

TEST_CASE("retention regularizer") {
  CHECK(retention_regularizer(Tensor::constant(Matrix(3, 1, 1e3))).item() == 1.0);
  CHECK(retention_regularizer(Tensor::constant(Matrix(3, 1, -1e3))).item() == 0.0);
  auto mixed = retention_regularizer(Tensor::constant(Matrix::from_rows({{0.0}, {0.0}, {1e3}})));
  CHECK(mixed.item() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(retention_regularizer(Tensor::constant(Matrix::from_rows({{1.0}, {3.0}})), true).item() == 2.0);
}

TEST_CASE("adversarial objective reaches the scorer parameters") {
  auto g = toy_graph();
  auto a = make_aug(3, 2);
  Rng rng(11);
  Tensor x = Tensor::constant(oracle::random_matrix(4, 3, rng));
  std::vector<int> kept{0, 1, 2, 3};
  auto out = augment_fixed(g, kept, {0.2, 0.4, 0.6, 0.8}, x, a.ap, a.store, Tensor::constant(Matrix(1, 2, 1.0)));
  Tensor obj = ad::sum(out.log_p) + ad::scale(retention_regularizer(out.logits), 0.3);
  ad::backward(obj);
  for (const auto& p : a.store.all()) {
    double norm = 0;
    for (double v : p.grad().data) norm += std::abs(v);
    INFO(p.name());
    CHECK(norm > 0.0);
  }
}
