#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "lamp/error.hpp"
#include "lamp/eval.hpp"
#include "lamp/metapath.hpp"

using namespace lamp;

namespace {

// Well separated isotropic blobs, `per` points per class.
Matrix blobs(std::size_t classes, std::size_t per, std::size_t dim, Rng& rng, std::vector<int>& labels) {
  Matrix z(classes * per, dim);
  labels.assign(classes * per, 0);
  for (std::size_t i = 0; i < classes * per; ++i) {
    const std::size_t c = i % classes;
    labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < dim; ++j) z(i, j) = (j == c ? 8.0 : 0.0) + rng.normal();
  }
  return z;
}

ProbeTargets single(const std::vector<int>& labels, int k) {
  ProbeTargets t;
  t.num_classes = k;
  t.labels = labels;
  return t;
}

}  // namespace

TEST_CASE("stratified split ratios") {
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(0);
  for (int i = 0; i < 50; ++i) labels.push_back(1);
  for (int i = 0; i < 7; ++i) labels.push_back(-1);
  Split s = stratified_split(labels, 3);
  auto per_class = [&](const std::vector<int>& rows, int c) {
    return std::count_if(rows.begin(), rows.end(), [&](int r) { return labels[r] == c; });
  };
  CHECK(std::abs(per_class(s.train, 0) - 24) <= 1);
  CHECK(std::abs(per_class(s.train, 1) - 12) <= 1);
  CHECK(std::abs(per_class(s.val, 0) - 6) <= 1);
  CHECK(std::abs(per_class(s.val, 1) - 3) <= 1);
  std::set<int> all;
  for (const auto* v : {&s.train, &s.val, &s.test})
    for (int r : *v) {
      CHECK(labels[r] >= 0);
      CHECK(all.insert(r).second);
    }
  CHECK(all.size() == 150);
  Split again = stratified_split(labels, 3);
  CHECK(again.train == s.train);
  CHECK(stratified_split(labels, 4).train != s.train);

  std::vector<int> sparse(40, 0);
  sparse.push_back(1);
  CHECK_THROWS_AS(stratified_split(sparse, 1), DataError);
}

TEST_CASE("f1 scores") {
  auto f = f1_scores({0, 0, 1, 1, 2}, {0, 1, 1, 1, 0}, 3);
  CHECK(f.micro == doctest::Approx(0.6));
  CHECK(f.macro == doctest::Approx((0.5 + 0.8 + 0.0) / 3.0));
  auto m = f1_scores_multilabel({{0, 1}, {2}}, {{0}, {2, 1}}, 3);
  CHECK(m.micro == doctest::Approx(2.0 * 2 / (2.0 * 2 + 1 + 1)));
  CHECK(m.macro == doctest::Approx((1.0 + 0.0 + 1.0) / 3.0));
}

TEST_CASE("lbfgs minimises a quadratic") {
  auto f = [](const std::vector<double>& x, std::vector<double>& g) {
    double v = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - static_cast<double>(i);
      v += (i + 1.0) * d * d;
      g[i] = 2.0 * (i + 1.0) * d;
    }
    return v;
  };
  auto x = lbfgs_minimize(f, std::vector<double>(6, 5.0), {});
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i] == doctest::Approx(static_cast<double>(i)).epsilon(1e-6));
}

TEST_CASE("probe on label one-hots is perfect") {
  Rng rng(1);
  std::vector<int> labels(120);
  for (auto& l : labels) l = static_cast<int>(rng.below(3));
  Matrix z(labels.size(), 3);
  for (std::size_t i = 0; i < labels.size(); ++i) z(i, labels[i]) = 1.0;
  Split s = stratified_split(labels, 2);
  auto r = linear_probe(z, single(labels, 3), s);
  CHECK(r.test.micro == 1.0);
  CHECK(r.test.macro == 1.0);
}

TEST_CASE("probe on constant features predicts the majority") {
  std::vector<int> labels;
  for (int i = 0; i < 120; ++i) labels.push_back(i % 5 < 3 ? 0 : (i % 5 == 3 ? 1 : 2));
  Matrix z(labels.size(), 4);
  Split s = stratified_split(labels, 2);
  auto r = linear_probe(z, single(labels, 3), s);
  const double share =
      static_cast<double>(std::count_if(s.test.begin(), s.test.end(), [&](int i) { return labels[i] == 0; })) /
      static_cast<double>(s.test.size());
  CHECK(r.test.micro == doctest::Approx(share).epsilon(1e-12));
}

TEST_CASE("probe separates blobs") {
  Rng rng(2);
  std::vector<int> labels;
  Matrix z = blobs(3, 100, 6, rng, labels);
  auto r = linear_probe(z, single(labels, 3), stratified_split(labels, 5));
  CHECK(r.test.micro >= 0.99);
  CHECK(r.test.macro >= 0.99);
}

TEST_CASE("nmi and ari") {
  std::vector<int> a{0, 0, 1, 1, 2, 2, 2};
  std::vector<int> relabeled{5, 5, 3, 3, 9, 9, 9};
  CHECK(nmi(a, relabeled) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ari(a, relabeled) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<int> one(a.size(), 0);
  CHECK(nmi(a, one) == doctest::Approx(0.0));
  CHECK(ari(a, one) == doctest::Approx(0.0));
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    std::vector<int> x(40), y(40);
    for (auto& v : x) v = static_cast<int>(rng.below(4));
    for (auto& v : y) v = static_cast<int>(rng.below(3));
    const double n = nmi(x, y), r = ari(x, y);
    CHECK(n >= 0.0);
    CHECK(n <= 1.0 + 1e-12);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0 + 1e-12);
  }
}

TEST_CASE("k-means recovers blobs") {
  Rng rng(3);
  std::vector<int> labels;
  Matrix z = blobs(3, 80, 5, rng, labels);
  Rng km(7);
  auto assign = kmeans(z, 3, km);
  CHECK(nmi(labels, assign) >= 0.95);
  auto cs = cluster_metrics(z, labels, 3, 11, 5);
  CHECK(cs.nmi >= 0.95);
  CHECK(cs.ari >= 0.95);
}

TEST_CASE("synthetic generator homophily") {
  auto author_homophily = [](const SyntheticOptions& o) {
    Hin hin = make_synthetic_hin(o);
    auto sg = materialize(hin, synthetic_metapath(hin, "author"));
    return homophily_ratio(sg, hin.target_labels());
  };
  CHECK(author_homophily({.n_target = 90, .classes = 3, .homophily = 1.0, .seed = 1}) == 1.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    CHECK(std::abs(author_homophily({.n_target = 300, .classes = 3, .homophily = 1.0 / 3.0, .seed = seed}) -
                   1.0 / 3.0) <= 0.05);
  CHECK(author_homophily({.n_target = 300, .classes = 3, .homophily = 0.9, .seed = 0}) >= 0.8);

  Hin hin = make_synthetic_hin({.n_target = 30, .classes = 3, .seed = 2});
  CHECK(hin.type_count(hin.target_type) == 30);
  auto tl = hin.target_labels();
  for (std::size_t i = 0; i < tl.size(); ++i) CHECK(tl[i] == static_cast<int>(i % 3));
}

TEST_CASE("report aggregates") {
  SensitivityReport r;
  for (double m : {0.90, 0.92, 0.94}) {
    CombinationResult c;
    c.micro = {m - 0.01, m + 0.01};
    c.macro = {m - 0.1};
    r.combinations.push_back(c);
  }
  r.recompute();
  CHECK(r.combinations[1].micro_mean == doctest::Approx(0.92).epsilon(1e-12));
  CHECK(r.micro_gap == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(r.micro_std == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(r.macro_std == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(r.to_json().find("\"micro_std\"") != std::string::npos);

  SensitivityReport one;
  one.combinations.resize(1);
  one.combinations[0].micro = {0.7};
  one.recompute();
  CHECK(one.micro_std == 0.0);
  CHECK(one.micro_gap == 0.0);
  CHECK(sample_std({0.90, 0.92, 0.94}) == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("sensitivity study reports consistent aggregates") {
  Hin hin = make_synthetic_hin({.n_target = 40, .classes = 2, .seed = 3});
  std::vector<MetaPath> mps = {synthetic_metapath(hin, "author"), synthetic_metapath(hin, "subject")};
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.hidden = 8;
  cfg.epochs = 3;
  SensitivityOptions opts;
  opts.min_size = 1;
  auto rep = sensitivity_study(hin, mps, cfg, opts);
  CHECK(rep.combinations.size() == 3);
  CHECK(rep.failed == 0);
  SensitivityReport copy = rep;
  copy.recompute();
  CHECK(copy.micro_std == rep.micro_std);
  CHECK(copy.micro_gap == rep.micro_gap);
  for (const auto& c : rep.combinations) {
    CHECK(c.micro_mean >= 0.0);
    CHECK(c.micro_mean <= 1.0);
  }
}
