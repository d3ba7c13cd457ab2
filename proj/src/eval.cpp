#include "lamp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "lamp/error.hpp"

namespace lamp {

namespace {

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Split stratified_split(const std::vector<int>& labels, std::uint64_t seed, double train_ratio, double val_ratio) {
  if (train_ratio <= 0.0 || val_ratio < 0.0 || train_ratio + val_ratio >= 1.0)
    throw ArgumentError("stratified_split: ratios must satisfy 0 < train, 0 <= val, train + val < 1");
  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) by_class[labels[i]].push_back(static_cast<int>(i));
  if (by_class.empty()) throw DataError("stratified_split: no labeled rows");
  Rng rng(seed);
  Split s;
  for (auto& [c, rows] : by_class) {
    shuffle(rows, rng);
    const auto n = static_cast<double>(rows.size());
    const auto n_train = static_cast<std::size_t>(std::llround(train_ratio * n));
    const auto n_val = std::min(static_cast<std::size_t>(std::llround(val_ratio * n)), rows.size() - n_train);
    if (n_train == 0)
      throw DataError("stratified_split: class " + std::to_string(c) + " has no training row; re-stratify");
    s.train.insert(s.train.end(), rows.begin(), rows.begin() + n_train);
    s.val.insert(s.val.end(), rows.begin() + n_train, rows.begin() + n_train + n_val);
    s.test.insert(s.test.end(), rows.begin() + n_train + n_val, rows.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<int> ProbeTargets::strata() const {
  if (!multi_label) return labels;
  std::vector<int> out(label_sets.size(), -1);
  for (std::size_t i = 0; i < label_sets.size(); ++i)
    if (!label_sets[i].empty()) out[i] = label_sets[i].front();
  return out;
}

ProbeTargets probe_targets(const Hin& hin) {
  ProbeTargets t;
  t.multi_label = hin.multi_label;
  t.num_classes = hin.num_classes();
  const std::size_t off = hin.type_offset(hin.target_type);
  const std::size_t n = hin.type_count(hin.target_type);
  if (hin.multi_label) {
    t.label_sets.resize(n);
    for (std::size_t i = 0; i < n && off + i < hin.label_sets.size(); ++i) t.label_sets[i] = hin.label_sets[off + i];
  } else {
    t.labels = hin.target_labels();
  }
  return t;
}

F1Scores f1_scores(const std::vector<int>& truth, const std::vector<int>& pred, int num_classes) {
  if (truth.size() != pred.size()) throw ShapeError("f1_scores: length mismatch");
  F1Scores s;
  if (truth.empty()) return s;
  std::vector<double> tp(num_classes), fp(num_classes), fn(num_classes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == pred[i]) {
      ++correct;
      tp[truth[i]] += 1;
    } else {
      fn[truth[i]] += 1;
      fp[pred[i]] += 1;
    }
  }
  s.micro = static_cast<double>(correct) / static_cast<double>(truth.size());
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (tp[c] + fp[c] + fn[c] == 0) continue;
    ++present;
    sum += 2 * tp[c] / (2 * tp[c] + fp[c] + fn[c]);
  }
  s.macro = present ? sum / present : 0.0;
  return s;
}

F1Scores f1_scores_multilabel(const std::vector<std::vector<int>>& truth, const std::vector<std::vector<int>>& pred,
                              int num_classes) {
  if (truth.size() != pred.size()) throw ShapeError("f1_scores_multilabel: length mismatch");
  std::vector<double> tp(num_classes), fp(num_classes), fn(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    std::vector<char> t(num_classes, 0), p(num_classes, 0);
    for (int c : truth[i]) t[c] = 1;
    for (int c : pred[i]) p[c] = 1;
    for (int c = 0; c < num_classes; ++c) {
      tp[c] += t[c] && p[c];
      fp[c] += !t[c] && p[c];
      fn[c] += t[c] && !p[c];
    }
  }
  F1Scores s;
  const double TP = std::accumulate(tp.begin(), tp.end(), 0.0);
  const double FP = std::accumulate(fp.begin(), fp.end(), 0.0);
  const double FN = std::accumulate(fn.begin(), fn.end(), 0.0);
  s.micro = TP + FP + FN > 0 ? 2 * TP / (2 * TP + FP + FN) : 0.0;
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (tp[c] + fp[c] + fn[c] == 0) continue;
    ++present;
    sum += 2 * tp[c] / (2 * tp[c] + fp[c] + fn[c]);
  }
  s.macro = present ? sum / present : 0.0;
  return s;
}

std::vector<double> lbfgs_minimize(const std::function<double(const std::vector<double>&, std::vector<double>&)>& f,
                                   std::vector<double> x, const LbfgsOptions& opts,
                                   const std::function<void(int, const std::vector<double>&)>& on_iter) {
  const std::size_t n = x.size();
  std::vector<double> g(n), g_new(n), x_new(n), d(n);
  double fx = f(x, g);
  if (!std::isfinite(fx)) throw NumericError("lbfgs: objective is not finite at the starting point");
  std::vector<std::vector<double>> s_hist, y_hist;
  std::vector<double> rho_hist;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const double gnorm = std::sqrt(dot(g, g));
    if (gnorm < opts.grad_tol) break;

    // Two-loop recursion.
    d = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * y_hist[k][i];
    }
    double h0 = 1.0 / std::max(gnorm, 1.0);
    if (!s_hist.empty()) h0 = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
    for (double& v : d) v *= h0;
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], d);
      for (std::size_t i = 0; i < n; ++i) d[i] += s_hist[k][i] * (alpha[k] - beta);
    }
    for (double& v : d) v = -v;
    double slope = dot(g, d);
    if (slope >= 0.0) {
      // Not a descent direction: restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i] / std::max(gnorm, 1.0);
      slope = dot(g, d);
    }

    double step = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * d[i];
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > static_cast<std::size_t>(opts.memory)) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
    }
    const double f_old = fx;
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    if (on_iter) on_iter(it, x);
    if (std::abs(f_old - fx) <= 1e-14 * std::max(1.0, std::abs(fx))) break;
  }
  return x;
}

namespace {

// Feature rows of `rows` with a trailing 1 for the bias.
Matrix design(const Matrix& z, const std::vector<int>& rows, const std::vector<double>& mu,
              const std::vector<double>& sd) {
  Matrix x(rows.size(), z.cols + 1);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < z.cols; ++c) x(r, c) = (z(rows[r], c) - mu[c]) / sd[c];
    x(r, z.cols) = 1.0;
  }
  return x;
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Matrix as_weights(const std::vector<double>& w, std::size_t rows, std::size_t cols) { return Matrix(rows, cols, w); }

}  // namespace

ProbeResult linear_probe(const Matrix& z, const ProbeTargets& targets, const Split& split, const ProbeOptions& opts) {
  const int k = targets.num_classes;
  if (k < 1) throw DataError("linear_probe: no classes");
  if (split.train.empty()) throw DataError("linear_probe: empty training split");
  const std::size_t n_rows = targets.multi_label ? targets.label_sets.size() : targets.labels.size();
  if (z.rows != n_rows) throw ShapeError("linear_probe: embeddings and labels are not row-aligned");
  if (!all_finite(z)) throw NumericError("linear_probe: embeddings contain non-finite values");

  std::vector<double> mu(z.cols, 0.0), sd(z.cols, 1.0);
  if (opts.standardize) {
    for (std::size_t c = 0; c < z.cols; ++c) {
      double m = 0.0, v = 0.0;
      for (int r : split.train) m += z(r, c);
      m /= static_cast<double>(split.train.size());
      for (int r : split.train) v += (z(r, c) - m) * (z(r, c) - m);
      v /= static_cast<double>(split.train.size());
      mu[c] = m;
      sd[c] = v > 1e-24 ? std::sqrt(v) : 1.0;
    }
  }
  const Matrix xt = design(z, split.train, mu, sd);
  const Matrix xv = design(z, split.val, mu, sd);
  const Matrix xs = design(z, split.test, mu, sd);
  const std::size_t d = xt.cols;
  const double nt = static_cast<double>(xt.rows);
  LbfgsOptions lo;
  lo.max_iter = opts.max_iter;

  ProbeResult res;
  if (!targets.multi_label) {
    if (!split.train.empty())
      for (int r : split.train)
        if (targets.labels[r] < 0) throw DataError("linear_probe: unlabeled row in the training split");
    std::vector<int> yv, ys;
    for (int r : split.val) yv.push_back(targets.labels[r]);
    for (int r : split.test) ys.push_back(targets.labels[r]);

    auto objective = [&](const std::vector<double>& w, std::vector<double>& g) {
      Matrix W = as_weights(w, d, k);
      Matrix logits = matmul(xt, W);
      Matrix gl(xt.rows, k);
      double loss = 0.0;
      for (std::size_t r = 0; r < xt.rows; ++r) {
        auto row = logits.row(r);
        const double m = *std::max_element(row.begin(), row.end());
        double se = 0.0;
        for (double v : row) se += std::exp(v - m);
        const double lse = m + std::log(se);
        const int y = targets.labels[split.train[r]];
        loss += lse - row[y];
        for (int c = 0; c < k; ++c) gl(r, c) = (std::exp(row[c] - lse) - (c == y ? 1.0 : 0.0)) / nt;
      }
      loss /= nt;
      Matrix gW(d, k);
      gemm(xt, true, gl, false, gW, false);
      for (std::size_t i = 0; i + 1 < d; ++i)
        for (int c = 0; c < k; ++c) {
          loss += 0.5 * opts.l2 * W(i, c) * W(i, c);
          gW(i, c) += opts.l2 * W(i, c);
        }
      g = gW.data;
      return loss;
    };
    auto predict = [&](const Matrix& x, const std::vector<double>& w) { return argmax_rows(matmul(x, as_weights(w, d, k))); };

    std::vector<double> best(d * k, 0.0);
    double best_val = -1.0;
    auto consider = [&](int it, const std::vector<double>& w) {
      const double v = yv.empty() ? 0.0 : f1_scores(yv, predict(xv, w), k).micro;
      if (v >= best_val) {
        best_val = v;
        best = w;
        res.best_iter = it;
      }
    };
    std::vector<double> w0(d * k, 0.0);
    consider(0, w0);
    lbfgs_minimize(objective, w0, lo, consider);
    if (!yv.empty()) res.val = f1_scores(yv, predict(xv, best), k);
    res.test = f1_scores(ys, predict(xs, best), k);
    return res;
  }

  // One-vs-rest binary logistic regressions, threshold 0.5.
  auto has = [&](int r, int c) {
    const auto& s = targets.label_sets[r];
    return std::find(s.begin(), s.end(), c) != s.end();
  };
  std::vector<std::vector<int>> pv(split.val.size()), ps(split.test.size());
  std::vector<std::vector<int>> tv, ts;
  for (int r : split.val) tv.push_back(targets.label_sets[r]);
  for (int r : split.test) ts.push_back(targets.label_sets[r]);
  for (int c = 0; c < k; ++c) {
    auto objective = [&](const std::vector<double>& w, std::vector<double>& g) {
      double loss = 0.0;
      g.assign(d, 0.0);
      for (std::size_t r = 0; r < xt.rows; ++r) {
        auto row = xt.row(r);
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += row[i] * w[i];
        const double y = has(split.train[r], c) ? 1.0 : 0.0;
        loss += std::max(s, 0.0) - y * s + std::log1p(std::exp(-std::abs(s)));
        const double p = 1.0 / (1.0 + std::exp(-s));
        for (std::size_t i = 0; i < d; ++i) g[i] += (p - y) * row[i] / nt;
      }
      loss /= nt;
      for (std::size_t i = 0; i + 1 < d; ++i) {
        loss += 0.5 * opts.l2 * w[i] * w[i];
        g[i] += opts.l2 * w[i];
      }
      return loss;
    };
    auto predict = [&](const Matrix& x, const std::vector<double>& w) {
      std::vector<char> out(x.rows);
      for (std::size_t r = 0; r < x.rows; ++r) {
        auto row = x.row(r);
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += row[i] * w[i];
        out[r] = s > 0.0;
      }
      return out;
    };
    auto binary_f1 = [&](const std::vector<int>& rows, const std::vector<char>& p) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const bool t = has(rows[i], c);
        tp += t && p[i];
        fp += !t && p[i];
        fn += t && !p[i];
      }
      return tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 1.0;
    };
    std::vector<double> best(d, 0.0);
    double best_val = -1.0;
    auto consider = [&](int, const std::vector<double>& w) {
      const double v = binary_f1(split.val, predict(xv, w));
      if (v >= best_val) {
        best_val = v;
        best = w;
      }
    };
    std::vector<double> w0(d, 0.0);
    consider(0, w0);
    lbfgs_minimize(objective, w0, lo, consider);
    const auto pvc = predict(xv, best);
    const auto psc = predict(xs, best);
    for (std::size_t i = 0; i < pvc.size(); ++i)
      if (pvc[i]) pv[i].push_back(c);
    for (std::size_t i = 0; i < psc.size(); ++i)
      if (psc[i]) ps[i].push_back(c);
  }
  res.val = f1_scores_multilabel(tv, pv, k);
  res.test = f1_scores_multilabel(ts, ps, k);
  return res;
}

std::vector<int> kmeans(const Matrix& z, int k, Rng& rng, int max_iter) {
  const std::size_t n = z.rows, d = z.cols;
  if (k < 1) throw ArgumentError("kmeans: k must be >= 1");
  if (static_cast<std::size_t>(k) > n) throw ArgumentError("kmeans: k exceeds the number of points");
  auto dist2 = [&](std::size_t r, const Matrix& c, int j) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double t = z(r, i) - c(j, i);
      s += t * t;
    }
    return s;
  };
  Matrix centers(k, d);
  auto set_center = [&](int j, std::size_t r) {
    for (std::size_t i = 0; i < d; ++i) centers(j, i) = z(r, i);
  };
  set_center(0, rng.below(n));
  std::vector<double> best_d(n);
  for (std::size_t r = 0; r < n; ++r) best_d[r] = dist2(r, centers, 0);
  // Greedy seeding: several D^2-weighted candidates, keep the one that
  // lowers the potential most.
  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
  for (int j = 1; j < k; ++j) {
    const double total = std::accumulate(best_d.begin(), best_d.end(), 0.0);
    std::size_t best_pick = rng.below(n);
    double best_pot = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
      std::size_t pick = n - 1;
      if (total > 0.0) {
        double u = rng.uniform() * total;
        for (std::size_t r = 0; r < n; ++r) {
          u -= best_d[r];
          if (u < 0.0) {
            pick = r;
            break;
          }
        }
      } else {
        pick = rng.below(n);
      }
      double pot = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        double s2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double q = z(r, i) - z(pick, i);
          s2 += q * q;
        }
        pot += std::min(best_d[r], s2);
      }
      if (pot < best_pot) {
        best_pot = pot;
        best_pick = pick;
      }
    }
    set_center(j, best_pick);
    for (std::size_t r = 0; r < n; ++r) best_d[r] = std::min(best_d[r], dist2(r, centers, j));
  }

  std::vector<int> assign(n, -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t r = 0; r < n; ++r) {
      int arg = 0;
      double bd = dist2(r, centers, 0);
      for (int j = 1; j < k; ++j) {
        const double v = dist2(r, centers, j);
        if (v < bd) {
          bd = v;
          arg = j;
        }
      }
      best_d[r] = bd;
      if (assign[r] != arg) {
        assign[r] = arg;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums(k, d);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t r = 0; r < n; ++r) {
      ++cnt[assign[r]];
      for (std::size_t i = 0; i < d; ++i) sums(assign[r], i) += z(r, i);
    }
    for (int j = 0; j < k; ++j) {
      if (cnt[j] == 0) {
        const auto far = static_cast<std::size_t>(std::max_element(best_d.begin(), best_d.end()) - best_d.begin());
        set_center(j, far);
        best_d[far] = 0.0;
        continue;
      }
      for (std::size_t i = 0; i < d; ++i) centers(j, i) = sums(j, i) / static_cast<double>(cnt[j]);
    }
  }
  return assign;
}

namespace {

struct Contingency {
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> a, b;
  double n = 0.0;
};

Contingency contingency(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ShapeError("partition comparison: length mismatch");
  Contingency c;
  for (std::size_t i = 0; i < a.size(); ++i) {
    c.cells[{a[i], b[i]}] += 1;
    c.a[a[i]] += 1;
    c.b[b[i]] += 1;
  }
  c.n = static_cast<double>(a.size());
  return c;
}

double entropy(const std::map<int, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [k, v] : counts) h -= v / n * std::log(v / n);
  return h;
}

}  // namespace

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  const Contingency c = contingency(a, b);
  if (c.n == 0) return 1.0;
  const double ha = entropy(c.a, c.n), hb = entropy(c.b, c.n);
  if (c.a.size() == 1 && c.b.size() == 1) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  double mi = 0.0;
  for (const auto& [key, v] : c.cells) mi += v / c.n * std::log(c.n * v / (c.a.at(key.first) * c.b.at(key.second)));
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

double ari(const std::vector<int>& a, const std::vector<int>& b) {
  const Contingency c = contingency(a, b);
  auto comb2 = [](double x) { return x * (x - 1) / 2; };
  double sum_ij = 0, sum_a = 0, sum_b = 0;
  for (const auto& [k, v] : c.cells) sum_ij += comb2(v);
  for (const auto& [k, v] : c.a) sum_a += comb2(v);
  for (const auto& [k, v] : c.b) sum_b += comb2(v);
  const double total = comb2(c.n);
  if (total == 0) return 1.0;
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

ClusterScores cluster_metrics(const Matrix& z, const std::vector<int>& labels, int k, std::uint64_t seed, int runs) {
  if (labels.size() != z.rows) throw ShapeError("cluster_metrics: embeddings and labels are not row-aligned");
  if (runs < 1) throw ArgumentError("cluster_metrics: runs must be >= 1");
  std::vector<int> rows, truth;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) {
      rows.push_back(static_cast<int>(i));
      truth.push_back(labels[i]);
    }
  Matrix x(rows.size(), z.cols);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < z.cols; ++c) x(r, c) = z(rows[r], c);
  ClusterScores s;
  for (int run = 0; run < runs; ++run) {
    Rng rng = stream(seed, "kmeans." + std::to_string(run));
    const auto pred = kmeans(x, k, rng);
    s.nmi += nmi(truth, pred);
    s.ari += ari(truth, pred);
  }
  s.nmi /= runs;
  s.ari /= runs;
  return s;
}

Hin make_synthetic_hin(const SyntheticOptions& opts) {
  if (opts.classes < 2) throw ArgumentError("synthetic: classes must be >= 2");
  if (opts.n_target < opts.classes) throw ArgumentError("synthetic: fewer targets than classes");
  std::vector<AuxTypeSpec> aux = opts.aux;
  if (aux.empty()) {
    aux.push_back({"author", std::max(opts.n_target / 3, opts.classes * 2), 2, -1});
    aux.push_back({"subject", 10 * opts.classes, 1, -1});
  }
  Hin hin;
  hin.node_types.push_back(opts.target_name);
  for (const auto& a : aux) {
    if (a.count < opts.classes) throw ArgumentError("synthetic: aux type " + a.name + " needs >= one node per class");
    if (a.links < 1 || a.count / opts.classes < a.links)
      throw ArgumentError("synthetic: aux type " + a.name + " has too few nodes per class for its link count");
    const double h = a.homophily < 0 ? opts.homophily : a.homophily;
    if (h < 0.0 || h > 1.0) throw ArgumentError("synthetic: homophily must lie in [0, 1]");
    hin.node_types.push_back(a.name);
  }
  auto initial = [](const std::string& s) { return static_cast<char>(std::toupper(static_cast<unsigned char>(s[0]))); };
  for (std::size_t t = 0; t < aux.size(); ++t) {
    Relation r;
    r.name = std::string{initial(opts.target_name), initial(aux[t].name)};
    r.src_type = 0;
    r.dst_type = static_cast<int>(t + 1);
    hin.relations.push_back(r);
  }
  const int k = static_cast<int>(opts.classes);
  for (std::size_t i = 0; i < opts.n_target; ++i) {
    hin.node_type.push_back(0);
    hin.node_key.push_back(opts.target_name + std::to_string(i));
    hin.labels.push_back(static_cast<int>(i % opts.classes));
  }
  std::vector<std::size_t> offset;
  for (std::size_t t = 0; t < aux.size(); ++t) {
    offset.push_back(hin.node_type.size());
    for (std::size_t a = 0; a < aux[t].count; ++a) {
      hin.node_type.push_back(static_cast<int>(t + 1));
      hin.node_key.push_back(aux[t].name + std::to_string(a));
      hin.labels.push_back(-1);
    }
  }

  for (std::size_t t = 0; t < aux.size(); ++t) {
    const auto& spec = aux[t];
    const double h = spec.homophily < 0 ? opts.homophily : spec.homophily;
    Rng rng = stream(opts.seed, "synthetic." + spec.name);
    std::vector<std::vector<int>> by_class(k);
    for (std::size_t a = 0; a < spec.count; ++a) by_class[a % k].push_back(static_cast<int>(a));
    std::vector<std::vector<int>> others(k);
    for (int c = 0; c < k; ++c)
      for (std::size_t a = 0; a < spec.count; ++a)
        if (static_cast<int>(a % k) != c) others[c].push_back(static_cast<int>(a));
    // Fixed number of within-class links, placed at random slots.
    const std::size_t slots = opts.n_target * spec.links;
    std::vector<char> inside(slots, 0);
    const auto n_in = static_cast<std::size_t>(std::llround(h * static_cast<double>(slots)));
    std::fill(inside.begin(), inside.begin() + n_in, 1);
    for (std::size_t i = slots; i > 1; --i) std::swap(inside[i - 1], inside[rng.below(i)]);
    for (std::size_t i = 0; i < opts.n_target; ++i) {
      const int c = hin.labels[i];
      std::vector<int> chosen;
      for (std::size_t l = 0; l < spec.links; ++l) {
        const auto& pool = inside[i * spec.links + l] ? by_class[c] : others[c];
        int pick = -1;
        for (int attempt = 0; attempt < 64 && pick < 0; ++attempt) {
          const int cand = pool[rng.below(pool.size())];
          if (std::find(chosen.begin(), chosen.end(), cand) == chosen.end()) pick = cand;
        }
        if (pick < 0)
          for (int cand : pool)
            if (std::find(chosen.begin(), chosen.end(), cand) == chosen.end()) {
              pick = cand;
              break;
            }
        if (pick < 0) throw ArgumentError("synthetic: cannot place distinct links for aux type " + spec.name);
        chosen.push_back(pick);
        hin.edges.push_back({static_cast<int>(i), static_cast<int>(offset[t] + pick), static_cast<int>(t)});
      }
    }
  }
  if (opts.feature_dim > 0) {
    Rng rng = stream(opts.seed, "synthetic.features");
    hin.features.assign(hin.num_nodes(), {});
    for (std::size_t i = 0; i < opts.n_target; ++i) {
      hin.features[i].resize(opts.feature_dim);
      for (double& x : hin.features[i]) x = rng.normal();
    }
  }
  hin.target_type = 0;
  hin.rebuild_index();
  return hin;
}

MetaPath synthetic_metapath(const Hin& hin, const std::string& aux) {
  const int t = hin.type_id(aux);
  if (t < 0) throw ArgumentError("synthetic_metapath: unknown type " + aux);
  for (std::size_t r = 0; r < hin.relations.size(); ++r) {
    const auto& rel = hin.relations[r];
    if (rel.src_type == hin.target_type && rel.dst_type == t) {
      MetaPath mp;
      const char a = static_cast<char>(std::toupper(static_cast<unsigned char>(hin.node_types[hin.target_type][0])));
      const char b = static_cast<char>(std::toupper(static_cast<unsigned char>(aux[0])));
      mp.name = std::string{a, b, a};
      mp.steps = {{static_cast<int>(r), Direction::forward}, {static_cast<int>(r), Direction::reverse}};
      return mp;
    }
  }
  throw ArgumentError("synthetic_metapath: no relation from the target type to " + aux);
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double gap_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

}  // namespace

void SensitivityReport::recompute() {
  std::vector<double> mi, ma;
  failed = 0;
  for (auto& c : combinations) {
    if (c.failed) {
      ++failed;
      continue;
    }
    c.micro_mean = mean_of(c.micro);
    c.macro_mean = mean_of(c.macro);
    c.micro_std = sample_std(c.micro);
    c.macro_std = sample_std(c.macro);
    mi.push_back(c.micro_mean);
    ma.push_back(c.macro_mean);
  }
  micro_std = sample_std(mi);
  macro_std = sample_std(ma);
  micro_gap = gap_of(mi);
  macro_gap = gap_of(ma);
}

std::string SensitivityReport::to_json() const {
  nlohmann::json j;
  j["variant"] = variant;
  j["metapaths"] = metapaths;
  j["micro_f1_std"] = micro_std;
  j["micro_f1_gap"] = micro_gap;
  j["macro_f1_std"] = macro_std;
  j["macro_f1_gap"] = macro_gap;
  j["failed"] = failed;
  j["combinations"] = nlohmann::json::array();
  for (const auto& c : combinations) {
    nlohmann::json e = {{"name", c.name},         {"members", c.members},       {"micro_f1", c.micro},
                        {"macro_f1", c.macro},    {"micro_mean", c.micro_mean}, {"micro_std", c.micro_std},
                        {"macro_mean", c.macro_mean}, {"macro_std", c.macro_std}, {"failed", c.failed}};
    if (c.failed) e["error"] = c.error;
    j["combinations"].push_back(e);
  }
  return j.dump(2);
}

std::string SensitivityReport::to_tsv() const {
  std::vector<const CombinationResult*> order;
  for (const auto& c : combinations) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(), [](const CombinationResult* a, const CombinationResult* b) {
    if (a->failed != b->failed) return !a->failed;
    return a->micro_mean > b->micro_mean;
  });
  std::ostringstream out;
  out << "rank\tcombination\tmicro_f1_mean\tmicro_f1_std\tmacro_f1_mean\tmacro_f1_std\n";
  char buf[160];
  int rank = 0;
  for (const auto* c : order) {
    if (c->failed) {
      out << "-\t" << c->name << "\tfailed\t\t\t\n";
      continue;
    }
    std::snprintf(buf, sizeof buf, "%d\t%s\t%.4f\t%.4f\t%.4f\t%.4f\n", ++rank, c->name.c_str(), c->micro_mean,
                  c->micro_std, c->macro_mean, c->macro_std);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "# std\t%.4f\tgap\t%.4f\n", micro_std, micro_gap);
  out << buf;
  return out.str();
}

SensitivityReport sensitivity_study(const Hin& hin, const std::vector<MetaPath>& metapaths, const TrainConfig& config,
                                    const SensitivityOptions& opts) {
  if (metapaths.size() < 2) throw ArgumentError("sensitivity: at least two meta-paths required");
  if (opts.runs < 1) throw ArgumentError("sensitivity: runs must be >= 1");
  SensitivityReport rep;
  rep.variant = opts.variant == SensitivityVariant::lamp ? "lamp" : "no_integration";
  std::vector<MetaPathSubGraph> subgraphs;
  for (const auto& mp : metapaths) {
    rep.metapaths.push_back(mp.name);
    subgraphs.push_back(materialize(hin, mp));
  }
  const ProbeTargets targets = probe_targets(hin);
  auto split_for = [&](std::uint64_t seed) { return stratified_split(targets.strata(), mix_seed(seed, "split")); };

  std::map<std::pair<int, int>, Matrix> single;  // (meta-path, run) -> embeddings
  auto single_embedding = [&](int m, int run) -> const Matrix& {
    auto it = single.find({m, run});
    if (it != single.end()) return it->second;
    TrainConfig cfg = config;
    cfg.seed = config.seed + static_cast<std::uint64_t>(run);
    Trainer tr(hin, std::vector<MetaPathSubGraph>{subgraphs[m]}, cfg);
    return single.emplace(std::make_pair(m, run), tr.train().embeddings).first->second;
  };

  for (const auto& members : enumerate_combinations(metapaths.size(), opts.min_size)) {
    CombinationResult cr;
    cr.members = members;
    for (std::size_t i = 0; i < members.size(); ++i) cr.name += (i ? "+" : "") + metapaths[members[i]].name;
    if (opts.progress) opts.progress(rep.variant + " " + cr.name);
    try {
      for (int run = 0; run < opts.runs; ++run) {
        TrainConfig cfg = config;
        cfg.seed = config.seed + static_cast<std::uint64_t>(run);
        Matrix z;
        if (opts.variant == SensitivityVariant::lamp) {
          std::vector<MetaPathSubGraph> sub;
          for (int m : members) sub.push_back(subgraphs[m]);
          Trainer tr(hin, std::move(sub), cfg);
          z = tr.train().embeddings;
        } else {
          for (int m : members) {
            const Matrix& e = single_embedding(m, run);
            if (z.size() == 0) z = Matrix(e.rows, e.cols);
            for (std::size_t i = 0; i < e.size(); ++i) z.data[i] += e.data[i] / static_cast<double>(members.size());
          }
        }
        const ProbeResult pr = linear_probe(z, targets, split_for(cfg.seed), opts.probe);
        cr.micro.push_back(pr.test.micro);
        cr.macro.push_back(pr.test.macro);
      }
    } catch (const Error& e) {
      cr.failed = true;
      cr.error = e.what();
    }
    rep.combinations.push_back(std::move(cr));
  }
  rep.recompute();
  return rep;
}

}  // namespace lamp
