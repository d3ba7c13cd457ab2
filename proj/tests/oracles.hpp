#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls into the sparse or autodiff code paths it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lamp/autodiff.hpp"
#include "lamp/hin.hpp"
#include "lamp/metapath.hpp"
#include "lamp/rng.hpp"

namespace oracle {

inline lamp::Hin random_hin(lamp::Rng& rng, int max_nodes = 60, int max_types = 3) {
  lamp::Hin hin;
  const int types = 1 + static_cast<int>(rng.below(max_types));
  std::vector<int> count(types);
  int budget = max_nodes;
  for (int t = 0; t < types; ++t) {
    const int left = types - t - 1;
    const int hi = std::max(2, std::min(20, budget - left * 2));
    count[t] = 2 + static_cast<int>(rng.below(hi - 1));
    budget -= count[t];
    hin.node_types.push_back("t" + std::to_string(t));
  }
  for (int t = 0; t < types; ++t)
    for (int k = 0; k < count[t]; ++k) {
      hin.node_type.push_back(t);
      hin.node_key.push_back("t" + std::to_string(t) + "_" + std::to_string(k));
      hin.labels.push_back(-1);
    }
  const int rels = 1 + static_cast<int>(rng.below(3));
  for (int r = 0; r < rels; ++r) {
    lamp::Relation rel;
    rel.name = "r" + std::to_string(r);
    rel.src_type = static_cast<int>(rng.below(types));
    rel.dst_type = static_cast<int>(rng.below(types));
    rel.symmetric = rng.bernoulli(0.3);
    hin.relations.push_back(rel);
  }
  hin.rebuild_index();
  const double density = rng.uniform(0.05, 0.3);
  for (int r = 0; r < rels; ++r) {
    const auto& rel = hin.relations[r];
    const int so = static_cast<int>(hin.type_offset(rel.src_type));
    const int dof = static_cast<int>(hin.type_offset(rel.dst_type));
    for (int a = 0; a < count[rel.src_type]; ++a)
      for (int b = 0; b < count[rel.dst_type]; ++b)
        if (rng.bernoulli(density)) hin.edges.push_back({so + a, dof + b, r});
  }
  hin.target_type = 0;
  return hin;
}

// Type reached by a step from `from`, or -1 if the step does not apply.
inline int step_to(const lamp::Hin& hin, const lamp::MetaPathStep& s, int from) {
  const auto& r = hin.relations[s.relation];
  if (s.direction == lamp::Direction::forward) return r.src_type == from ? r.dst_type : -1;
  return r.dst_type == from ? r.src_type : -1;
}

// Random type-checking meta-path from and back to the target type with
// 1..max_steps steps; empty steps when none was found.
inline lamp::MetaPath random_metapath(const lamp::Hin& hin, lamp::Rng& rng, int max_steps = 5) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    const int len = 1 + static_cast<int>(rng.below(max_steps));
    lamp::MetaPath mp;
    mp.name = "mp";
    int cur = hin.target_type;
    bool ok = true;
    for (int k = 0; k < len && ok; ++k) {
      std::vector<lamp::MetaPathStep> options;
      for (int r = 0; r < static_cast<int>(hin.relations.size()); ++r)
        for (auto d : {lamp::Direction::forward, lamp::Direction::reverse}) {
          lamp::MetaPathStep s{r, d};
          if (step_to(hin, s, cur) >= 0) options.push_back(s);
        }
      if (options.empty()) {
        ok = false;
        break;
      }
      const auto s = options[rng.below(options.size())];
      mp.steps.push_back(s);
      cur = step_to(hin, s, cur);
    }
    if (ok && cur == hin.target_type) return mp;
  }
  return {};
}

// Neighbours reached from global node u by one step, with multiplicity 1 per
// distinct neighbour. Same-type symmetric relations are traversed both ways.
inline std::vector<int> step_neighbors(const lamp::Hin& hin, const lamp::MetaPathStep& s, int u) {
  const auto& rel = hin.relations[s.relation];
  const bool both = rel.symmetric && rel.src_type == rel.dst_type;
  std::set<int> out;
  for (const auto& e : hin.edges) {
    if (e.relation != s.relation) continue;
    const bool fwd = s.direction == lamp::Direction::forward;
    if ((fwd || both) && e.src == u) out.insert(e.dst);
    if ((!fwd || both) && e.dst == u) out.insert(e.src);
  }
  return {out.begin(), out.end()};
}

// walks[u][v]: number of typed walks from target u to target v (local ids).
inline std::map<std::pair<int, int>, std::uint64_t> walk_counts(const lamp::Hin& hin, const lamp::MetaPath& mp) {
  const int off = static_cast<int>(hin.type_offset(hin.target_type));
  const int n = static_cast<int>(hin.type_count(hin.target_type));
  std::map<std::pair<int, int>, std::uint64_t> out;
  std::function<void(int, int, std::size_t)> dfs = [&](int start, int node, std::size_t k) {
    if (k == mp.steps.size()) {
      out[{start, node - off}] += 1;
      return;
    }
    for (int nb : step_neighbors(hin, mp.steps[k], node)) dfs(start, nb, k + 1);
  };
  for (int u = 0; u < n; ++u) dfs(u, off + u, 0);
  return out;
}

inline bool palindromic(const lamp::Hin& hin, const lamp::MetaPath& mp) {
  auto norm = [&](lamp::MetaPathStep s) {
    const auto& r = hin.relations[s.relation];
    if (r.symmetric && r.src_type == r.dst_type) s.direction = lamp::Direction::forward;
    return s;
  };
  const std::size_t L = mp.steps.size();
  for (std::size_t k = 0; k < L; ++k) {
    auto a = norm(mp.steps[k]);
    auto b = mp.steps[L - 1 - k];
    b.direction = b.direction == lamp::Direction::forward ? lamp::Direction::reverse : lamp::Direction::forward;
    b = norm(b);
    if (!(a == b)) return false;
  }
  return true;
}

// Unordered pair -> instance count. A palindromic path's walk u..v read
// backwards is a walk v..u of the same path, so it is counted once; other
// paths count walks in both orientations.
inline std::map<std::pair<int, int>, std::uint64_t> instance_counts(const lamp::Hin& hin, const lamp::MetaPath& mp) {
  const auto walks = walk_counts(hin, mp);
  const bool pal = palindromic(hin, mp);
  std::map<std::pair<int, int>, std::uint64_t> out;
  for (const auto& [uv, c] : walks) {
    const auto [u, v] = uv;
    if (u == v) continue;
    if (pal) {
      if (u < v) out[{u, v}] += c;
    } else {
      out[{std::min(u, v), std::max(u, v)}] += c;
    }
  }
  return out;
}

inline double rel_err(double a, double n, double floor = 1e-3) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// Max relative error between backward() gradients and central differences
// for every entry of every parameter in `params`.
inline double gradient_check(const std::function<lamp::ad::Tensor()>& loss_fn, std::vector<lamp::ad::Tensor> params,
                             double h, std::string* worst = nullptr) {
  lamp::ad::Tensor loss = loss_fn();
  for (auto& p : params) p.node()->grad = lamp::Matrix(p.rows(), p.cols());
  lamp::ad::backward(loss);
  std::vector<lamp::Matrix> analytic;
  for (const auto& p : params) analytic.push_back(p.grad());
  double max_err = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& val = params[k].mutable_value();
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double x = val.data[i];
      val.data[i] = x + h;
      const double fp = loss_fn().item();
      val.data[i] = x - h;
      const double fm = loss_fn().item();
      val.data[i] = x;
      const double num = (fp - fm) / (2 * h);
      const double e = rel_err(analytic[k].data[i], num);
      if (e > max_err) {
        max_err = e;
        if (worst) *worst = params[k].name() + "[" + std::to_string(i) + "]";
      }
    }
  }
  return max_err;
}

inline lamp::Matrix random_matrix(std::size_t r, std::size_t c, lamp::Rng& rng, double lo = -1.0, double hi = 1.0) {
  lamp::Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace oracle
