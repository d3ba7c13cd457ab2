#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lamp/autodiff.hpp"
#include "lamp/hin.hpp"
#include "lamp/metapath.hpp"

namespace lamp {

enum class MlpActivation { elu, linear };

struct EncoderConfig {
  std::size_t dim = 64;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t heads = 1;
  double beta = 0.05;         // edge-residual mixing, clamped to [0, 1]
  double leaky_slope = 0.2;
  MlpActivation mlp_activation = MlpActivation::elu;
};

enum class ViewKind { schema, metapath };

// Message-passing graph for one view. Message edges run src -> dst, are
// sorted by dst and carry a relation payload: the relation one-hot for the
// schema view, the raw meta-path membership bits e_uv for the meta-path view
// (scaled by gamma inside the encoder).
struct ViewGraph {
  ViewKind kind = ViewKind::schema;
  std::size_t num_nodes = 0;
  std::vector<int> src;
  std::vector<int> dst;
  Matrix payload;                  // messages x payload_dim
  std::vector<int> message_edge;   // metapath view: undirected edge index per message
  ad::Tensor log_weights;          // metapath view: log p_e per undirected edge (optional)
  std::vector<int> output_rows;    // rows returned by encode; empty = all

  std::size_t num_messages() const { return src.size(); }
  std::size_t payload_dim() const { return payload.cols; }
};

// Full HIN, both directions of every edge, relation one-hot payload; output
// rows are the target-type nodes.
ViewGraph schema_view(const Hin& hin);

// Integrated sub-graph restricted to `kept` edges (indices into g.edges; all
// edges when empty is false and kept covers everything). Each undirected
// edge yields two messages sharing its payload and log weight.
ViewGraph metapath_view(const IntegratedSubGraph& g, const std::vector<int>& kept,
                        const ad::Tensor& log_weights = {});

// Parameter names used by the encoder, all under the "enc." prefix. The
// meta-path importance vector is stored separately as "gamma".
struct EncoderParams {
  EncoderConfig config;
  std::vector<std::string> type_names;
  std::size_t num_relations = 0;
  std::size_t num_metapaths = 0;

  static std::string mlp_name(const std::string& type, const char* part) { return "enc.mlp." + type + "." + part; }
  static std::string layer_name(std::size_t l, const char* part) { return "enc.l" + std::to_string(l) + "." + part; }
  static std::string head_name(std::size_t l, std::size_t h, const char* part) {
    return "enc.l" + std::to_string(l) + ".h" + std::to_string(h) + "." + part;
  }
  static std::string relation_transform_name(ViewKind k) {
    return k == ViewKind::schema ? "enc.W_r.schema" : "enc.W_r.metapath";
  }
};

// Registers encoder parameters and gamma (initialised to ones) in `store`
// with Glorot-uniform weights and zero biases.
EncoderParams init_encoder(ad::ParamStore& store, const Hin& hin, std::size_t num_metapaths,
                           const EncoderConfig& config, Rng& rng);

// Constant per-type feature matrices (supplied features or one-hot ids).
std::vector<Matrix> type_features(const Hin& hin);

// h_i^(0) = MLP^{type(i)}(x_i) for all nodes, rows in node-id order.
ad::Tensor project_features(const Hin& hin, const std::vector<Matrix>& features, const EncoderParams& ep,
                            const ad::ParamStore& store);

struct EncodeResult {
  ad::Tensor z;                                 // output rows
  std::vector<std::vector<ad::Tensor>> alpha;   // [layer][head], messages x 1
  std::set<std::string> used_parameters;
};

struct LayerResult {
  ad::Tensor h;
  std::vector<ad::Tensor> alpha;
};

// One attention layer. `gamma` must be defined for the meta-path view.
LayerResult attention_layer(const ad::Tensor& h, const ViewGraph& g, const ad::Tensor& gamma,
                            const EncoderParams& ep, const ad::ParamStore& store, std::size_t layer,
                            const std::vector<ad::Tensor>* alpha_prev, std::set<std::string>* used = nullptr);

// Stacks config.layers attention layers (edge residual from layer 2 on).
// In the schema view gamma is never read.
EncodeResult encode(const ViewGraph& g, const ad::Tensor& h0, const EncoderParams& ep, const ad::ParamStore& store,
                    const ad::Tensor& gamma);

}  // namespace lamp
