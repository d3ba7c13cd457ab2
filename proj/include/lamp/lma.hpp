#pragma once

#include <cstddef>
#include <vector>

#include "lamp/autodiff.hpp"
#include "lamp/metapath.hpp"

namespace lamp {

struct AugmenterConfig {
  std::size_t gcn_layers = 2;
  std::size_t dim = 64;      // GCN width; input width is the encoder dim
  std::size_t hidden = 64;   // scoring MLP hidden width
  double tau_gumbel = 1.0;
  double drop_rate = 0.5;
};

// Parameters live in a ParamStore under "aug.".
struct AugmenterParams {
  AugmenterConfig config;
  std::size_t input_dim = 0;
  std::size_t num_metapaths = 0;

  static std::string gcn_name(std::size_t k, const char* part) { return "aug.gcn.l" + std::to_string(k) + "." + part; }
  static std::string mlp_name(const char* part) { return std::string("aug.mlp.") + part; }
};

AugmenterParams init_augmenter(ad::ParamStore& store, std::size_t input_dim, std::size_t num_metapaths,
                               const AugmenterConfig& config, Rng& rng);

// Indices of edges that survive independent Bernoulli(1 - rate) retention.
std::vector<int> random_edge_mask(std::size_t num_edges, double rate, Rng& rng);

// Same node set, each edge kept with probability 1 - rate, encodings kept.
IntegratedSubGraph random_edge_drop(const IntegratedSubGraph& g, double rate, Rng& rng);

// omega_e = MLP([h_u^K ; h_v^K ; gamma ⊙ e_uv]) for every edge of `g`, after a
// K-layer GCN over g (self-loops, symmetric normalisation). Returns |E| x 1.
ad::Tensor edge_logits(const IntegratedSubGraph& g, const ad::Tensor& node_features, const AugmenterParams& ap,
                       const ad::ParamStore& store, const ad::Tensor& gamma);

struct GumbelSample {
  ad::Tensor p;       // |E| x 1, sigmoid((log d - log(1-d) + omega) / tau)
  ad::Tensor log_p;   // log of p, computed stably
  Matrix noise;       // log d - log(1-d), constant
};

// delta ~ U(0,1) clamped to [1e-12, 1 - 1e-12]; gradients flow into omega only.
GumbelSample gumbel_sample(const ad::Tensor& logits, double tau, Rng& rng);
// Same relaxation with caller-supplied uniforms.
GumbelSample gumbel_from_uniform(const ad::Tensor& logits, double tau, const std::vector<double>& delta);

struct AugmentedGraph {
  IntegratedSubGraph graph;     // surviving edges; node set unchanged
  std::vector<int> kept;        // indices into the source graph's edges
  ad::Tensor logits;            // omega
  ad::Tensor p;                 // soft weights in (0,1)
  ad::Tensor log_p;
  ad::Tensor retention;         // q = sigmoid(omega)
};

constexpr int kAugmentRetries = 8;

// Edges `kept` of g (indices into g.edges), encodings carried along.
IntegratedSubGraph select_edges(const IntegratedSubGraph& g, const std::vector<int>& kept);

// Edge logits and Gumbel relaxation on a fixed drop mask and fixed uniforms.
AugmentedGraph augment_fixed(const IntegratedSubGraph& g, const std::vector<int>& kept,
                             const std::vector<double>& delta, const ad::Tensor& node_features,
                             const AugmenterParams& ap, const ad::ParamStore& store, const ad::Tensor& gamma);

// random drop -> edge logits -> Gumbel relaxation. Retries the random drop up
// to kAugmentRetries times when it empties the graph, then throws.
AugmentedGraph augment(const IntegratedSubGraph& g, const ad::Tensor& node_features, const AugmenterParams& ap,
                       const ad::ParamStore& store, const ad::Tensor& gamma, double drop_rate, Rng& drop_rng,
                       Rng& gumbel_rng);

// Mean retention probability mean(sigmoid(omega)), or mean(omega) when
// on_logits is set.
ad::Tensor retention_regularizer(const ad::Tensor& logits, bool on_logits = false);

}  // namespace lamp
