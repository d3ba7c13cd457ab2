#include "lamp/lma.hpp"

#include <algorithm>
#include <cmath>

#include "lamp/error.hpp"

namespace lamp {

using ad::Tensor;

AugmenterParams init_augmenter(ad::ParamStore& store, std::size_t input_dim, std::size_t num_metapaths,
                               const AugmenterConfig& config, Rng& rng) {
  if (config.tau_gumbel <= 0.0) throw ArgumentError("tau_gumbel must be positive");
  if (config.drop_rate < 0.0 || config.drop_rate >= 1.0) throw ArgumentError("drop rate must lie in [0, 1)");
  if (config.gcn_layers < 1) throw ArgumentError("augmenter needs at least one GCN layer");
  AugmenterParams ap;
  ap.config = config;
  ap.input_dim = input_dim;
  ap.num_metapaths = num_metapaths;
  std::size_t in = input_dim;
  for (std::size_t k = 0; k < config.gcn_layers; ++k) {
    store.add(AugmenterParams::gcn_name(k, "W"), ad::glorot_uniform(in, config.dim, rng));
    store.add(AugmenterParams::gcn_name(k, "b"), Matrix(1, config.dim));
    in = config.dim;
  }
  const std::size_t mlp_in = 2 * config.dim + num_metapaths;
  store.add(AugmenterParams::mlp_name("w1"), ad::glorot_uniform(mlp_in, config.hidden, rng));
  store.add(AugmenterParams::mlp_name("b1"), Matrix(1, config.hidden));
  store.add(AugmenterParams::mlp_name("w2"), ad::glorot_uniform(config.hidden, 1, rng));
  store.add(AugmenterParams::mlp_name("b2"), Matrix(1, 1));
  return ap;
}

std::vector<int> random_edge_mask(std::size_t num_edges, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ArgumentError("drop rate must lie in [0, 1)");
  std::vector<int> kept;
  kept.reserve(num_edges);
  for (std::size_t e = 0; e < num_edges; ++e) {
    // Draw for every edge, so the stream position does not depend on rate.
    const double u = rng.uniform();
    if (u >= rate) kept.push_back(static_cast<int>(e));
  }
  return kept;
}

IntegratedSubGraph select_edges(const IntegratedSubGraph& g, const std::vector<int>& kept) {
  IntegratedSubGraph out;
  out.metapaths = g.metapaths;
  out.n = g.n;
  const std::size_t p = g.num_metapaths();
  out.edges.reserve(kept.size());
  out.bits.reserve(kept.size() * p);
  for (int k : kept) {
    out.edges.push_back(g.edges[k]);
    out.bits.insert(out.bits.end(), g.bits.begin() + k * p, g.bits.begin() + (k + 1) * p);
  }
  return out;
}

IntegratedSubGraph random_edge_drop(const IntegratedSubGraph& g, double rate, Rng& rng) {
  return select_edges(g, random_edge_mask(g.edges.size(), rate, rng));
}

Tensor edge_logits(const IntegratedSubGraph& g, const Tensor& node_features, const AugmenterParams& ap,
                   const ad::ParamStore& store, const Tensor& gamma) {
  if (node_features.rows() != g.n || node_features.cols() != ap.input_dim)
    throw ShapeError("edge_logits: node features must be n x input_dim");
  if (gamma.cols() != g.num_metapaths() || g.num_metapaths() != ap.num_metapaths)
    throw ShapeError("edge_logits: gamma length differs from |P|");

  // Normalised adjacency with self-loops as a message list.
  std::vector<double> deg(g.n, 1.0);
  for (const auto& [u, v] : g.edges) {
    deg[u] += 1.0;
    deg[v] += 1.0;
  }
  std::vector<int> src, dst;
  Matrix w(g.n + 2 * g.edges.size(), 1);
  src.reserve(w.rows);
  dst.reserve(w.rows);
  std::size_t m = 0;
  for (std::size_t i = 0; i < g.n; ++i) {
    src.push_back(static_cast<int>(i));
    dst.push_back(static_cast<int>(i));
    w(m++, 0) = 1.0 / deg[i];
  }
  for (const auto& [u, v] : g.edges) {
    const double c = 1.0 / std::sqrt(deg[u] * deg[v]);
    src.push_back(u);
    dst.push_back(v);
    w(m++, 0) = c;
    src.push_back(v);
    dst.push_back(u);
    w(m++, 0) = c;
  }
  Tensor weights = Tensor::constant(std::move(w), "gcn_norm");

  Tensor h = node_features;
  for (std::size_t k = 0; k < ap.config.gcn_layers; ++k) {
    Tensor hw = ad::matmul(h, store.get(AugmenterParams::gcn_name(k, "W")));
    Tensor agg = ad::scatter_sum(ad::mul(ad::gather_rows(hw, src), weights), dst, g.n);
    h = agg + store.get(AugmenterParams::gcn_name(k, "b"));
    if (k + 1 < ap.config.gcn_layers) h = ad::elu(h);
  }

  std::vector<int> us, vs;
  us.reserve(g.edges.size());
  vs.reserve(g.edges.size());
  for (const auto& [u, v] : g.edges) {
    us.push_back(u);
    vs.push_back(v);
  }
  Matrix bits(g.edges.size(), g.num_metapaths());
  for (std::size_t i = 0; i < bits.size(); ++i) bits.data[i] = g.bits[i];
  Tensor e_hat = ad::mul(Tensor::constant(std::move(bits), "edge_encoding"), gamma);
  Tensor x = ad::concat({ad::gather_rows(h, us), ad::gather_rows(h, vs), e_hat}, 1);
  Tensor hid = ad::elu(ad::matmul(x, store.get(AugmenterParams::mlp_name("w1"))) +
                       store.get(AugmenterParams::mlp_name("b1")));
  return ad::matmul(hid, store.get(AugmenterParams::mlp_name("w2"))) + store.get(AugmenterParams::mlp_name("b2"));
}

GumbelSample gumbel_from_uniform(const Tensor& logits, double tau, const std::vector<double>& delta) {
  if (tau <= 0.0) throw ArgumentError("gumbel temperature must be positive");
  if (logits.cols() != 1 || delta.size() != logits.rows()) throw ShapeError("gumbel: one uniform per logit required");
  constexpr double eps = 1e-12;
  GumbelSample s;
  s.noise = Matrix(delta.size(), 1);
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const double d = std::clamp(delta[i], eps, 1.0 - eps);
    s.noise(i, 0) = std::log(d) - std::log1p(-d);
  }
  Tensor z = ad::scale(ad::add(logits, Tensor::constant(s.noise, "logistic_noise")), 1.0 / tau);
  s.p = ad::sigmoid(z);
  s.log_p = ad::log_sigmoid(z);
  return s;
}

GumbelSample gumbel_sample(const Tensor& logits, double tau, Rng& rng) {
  std::vector<double> delta(logits.rows());
  for (double& d : delta) d = rng.uniform();
  return gumbel_from_uniform(logits, tau, delta);
}

AugmentedGraph augment(const IntegratedSubGraph& g, const Tensor& node_features, const AugmenterParams& ap,
                       const ad::ParamStore& store, const Tensor& gamma, double drop_rate, Rng& drop_rng,
                       Rng& gumbel_rng) {
  if (g.edges.empty()) throw ArgumentError("augment: integrated sub-graph has no edges");
  AugmentedGraph out;
  for (int attempt = 0; attempt < kAugmentRetries; ++attempt) {
    out.kept = random_edge_mask(g.edges.size(), drop_rate, drop_rng);
    if (!out.kept.empty()) break;
  }
  if (out.kept.empty())
    throw ArgumentError("augment: random edge drop removed every edge " + std::to_string(kAugmentRetries) +
                        " times; the drop rate is too aggressive");
  std::vector<double> delta(out.kept.size());
  for (double& d : delta) d = gumbel_rng.uniform();
  return augment_fixed(g, out.kept, delta, node_features, ap, store, gamma);
}

AugmentedGraph augment_fixed(const IntegratedSubGraph& g, const std::vector<int>& kept,
                             const std::vector<double>& delta, const Tensor& node_features,
                             const AugmenterParams& ap, const ad::ParamStore& store, const Tensor& gamma) {
  AugmentedGraph out;
  out.kept = kept;
  out.graph = select_edges(g, kept);
  out.logits = edge_logits(out.graph, node_features, ap, store, gamma);
  GumbelSample s = gumbel_from_uniform(out.logits, ap.config.tau_gumbel, delta);
  out.p = s.p;
  out.log_p = s.log_p;
  out.retention = ad::sigmoid(out.logits);
  return out;
}

Tensor retention_regularizer(const Tensor& logits, bool on_logits) {
  if (logits.rows() == 0) throw ArgumentError("retention_regularizer: empty edge set");
  return on_logits ? ad::mean(logits) : ad::mean(ad::sigmoid(logits));
}

}  // namespace lamp
