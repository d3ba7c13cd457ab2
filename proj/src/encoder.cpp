#include "lamp/encoder.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "lamp/error.hpp"

namespace lamp {

using ad::Tensor;

namespace {

void sort_messages(ViewGraph& g, std::vector<std::tuple<int, int, int>>& msgs) {
  // (dst, src, payload key) ordering makes segment ids contiguous.
  std::sort(msgs.begin(), msgs.end());
  msgs.erase(std::unique(msgs.begin(), msgs.end()), msgs.end());
  g.src.clear();
  g.dst.clear();
  for (const auto& [d, s, k] : msgs) {
    g.dst.push_back(d);
    g.src.push_back(s);
  }
}

Tensor mlp_activation(const Tensor& x, MlpActivation a) { return a == MlpActivation::elu ? ad::elu(x) : x; }

}  // namespace

ViewGraph schema_view(const Hin& hin) {
  ViewGraph g;
  g.kind = ViewKind::schema;
  g.num_nodes = hin.num_nodes();
  std::vector<std::tuple<int, int, int>> msgs;
  msgs.reserve(hin.edges.size() * 2);
  for (const auto& e : hin.edges) {
    msgs.emplace_back(e.dst, e.src, e.relation);
    msgs.emplace_back(e.src, e.dst, e.relation);
  }
  sort_messages(g, msgs);
  g.payload = Matrix(msgs.size(), hin.num_relations());
  for (std::size_t m = 0; m < msgs.size(); ++m) g.payload(m, std::get<2>(msgs[m])) = 1.0;
  const std::size_t off = hin.type_offset(hin.target_type);
  g.output_rows.resize(hin.type_count(hin.target_type));
  std::iota(g.output_rows.begin(), g.output_rows.end(), static_cast<int>(off));
  return g;
}

ViewGraph metapath_view(const IntegratedSubGraph& ig, const std::vector<int>& kept, const Tensor& log_weights) {
  ViewGraph g;
  g.kind = ViewKind::metapath;
  g.num_nodes = ig.n;
  if (log_weights.defined() && (log_weights.rows() != kept.size() || log_weights.cols() != 1))
    throw ShapeError("metapath_view: log weights must be (kept edges) x 1");
  std::vector<std::tuple<int, int, int>> msgs;
  msgs.reserve(kept.size() * 2);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const auto [u, v] = ig.edges.at(kept[k]);
    msgs.emplace_back(v, u, static_cast<int>(k));
    msgs.emplace_back(u, v, static_cast<int>(k));
  }
  sort_messages(g, msgs);
  const std::size_t p = ig.num_metapaths();
  g.payload = Matrix(msgs.size(), p);
  g.message_edge.resize(msgs.size());
  for (std::size_t m = 0; m < msgs.size(); ++m) {
    const int k = std::get<2>(msgs[m]);
    g.message_edge[m] = k;
    for (std::size_t i = 0; i < p; ++i) g.payload(m, i) = ig.encoding(kept[k], i);
  }
  g.log_weights = log_weights;
  return g;
}

EncoderParams init_encoder(ad::ParamStore& store, const Hin& hin, std::size_t num_metapaths,
                           const EncoderConfig& config, Rng& rng) {
  EncoderParams ep;
  ep.config = config;
  ep.config.beta = std::clamp(config.beta, 0.0, 1.0);
  ep.type_names = hin.node_types;
  ep.num_relations = hin.num_relations();
  ep.num_metapaths = num_metapaths;
  if (config.layers < 1 || config.heads < 1 || config.dim < 1) throw ArgumentError("encoder needs layers, heads, dim >= 1");

  const auto feats = type_features(hin);
  const std::size_t d = config.dim;
  for (std::size_t t = 0; t < hin.num_types(); ++t) {
    const auto& name = hin.node_types[t];
    store.add(EncoderParams::mlp_name(name, "w1"), ad::glorot_uniform(feats[t].cols, config.hidden, rng));
    store.add(EncoderParams::mlp_name(name, "b1"), Matrix(1, config.hidden));
    store.add(EncoderParams::mlp_name(name, "w2"), ad::glorot_uniform(config.hidden, d, rng));
    store.add(EncoderParams::mlp_name(name, "b2"), Matrix(1, d));
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    for (std::size_t h = 0; h < config.heads; ++h) {
      store.add(EncoderParams::head_name(l, h, "W"), ad::glorot_uniform(d, d, rng));
      store.add(EncoderParams::head_name(l, h, "a_dst"), ad::glorot_uniform(d, 1, rng));
      store.add(EncoderParams::head_name(l, h, "a_src"), ad::glorot_uniform(d, 1, rng));
      store.add(EncoderParams::head_name(l, h, "a_rel"), ad::glorot_uniform(d, 1, rng));
    }
    store.add(EncoderParams::layer_name(l, "W_res"), ad::glorot_uniform(d, d, rng));
  }
  store.add(EncoderParams::relation_transform_name(ViewKind::schema),
            ad::glorot_uniform(std::max<std::size_t>(hin.num_relations(), 1), d, rng));
  store.add(EncoderParams::relation_transform_name(ViewKind::metapath),
            ad::glorot_uniform(std::max<std::size_t>(num_metapaths, 1), d, rng));
  store.add("gamma", Matrix(1, std::max<std::size_t>(num_metapaths, 1), 1.0));
  return ep;
}

std::vector<Matrix> type_features(const Hin& hin) {
  std::vector<Matrix> out;
  for (std::size_t t = 0; t < hin.num_types(); ++t) out.push_back(type_feature_matrix(hin, static_cast<int>(t)));
  return out;
}

Tensor project_features(const Hin& hin, const std::vector<Matrix>& features, const EncoderParams& ep,
                        const ad::ParamStore& store) {
  if (features.size() != hin.num_types()) throw DataError("project_features: missing features for a type");
  std::vector<Tensor> blocks;
  for (std::size_t t = 0; t < hin.num_types(); ++t) {
    if (hin.type_count(static_cast<int>(t)) == 0) continue;
    const auto& name = hin.node_types[t];
    const Matrix& x = features[t];
    if (x.rows != hin.type_count(static_cast<int>(t))) throw DataError("project_features: missing features for type " + name);
    const Tensor& w1 = store.get(EncoderParams::mlp_name(name, "w1"));
    if (w1.rows() != x.cols) throw ShapeError("project_features: feature dimension mismatch for type " + name);
    Tensor xin = Tensor::constant(x, "features." + name);
    Tensor h = mlp_activation(ad::matmul(xin, w1) + store.get(EncoderParams::mlp_name(name, "b1")),
                              ep.config.mlp_activation);
    h = ad::matmul(h, store.get(EncoderParams::mlp_name(name, "w2"))) + store.get(EncoderParams::mlp_name(name, "b2"));
    blocks.push_back(h);
  }
  return blocks.size() == 1 ? blocks.front() : ad::concat(blocks, 0);
}

LayerResult attention_layer(const Tensor& h, const ViewGraph& g, const Tensor& gamma, const EncoderParams& ep,
                            const ad::ParamStore& store, std::size_t layer, const std::vector<Tensor>* alpha_prev,
                            std::set<std::string>* used) {
  const auto& cfg = ep.config;
  if (h.cols() != cfg.dim || h.rows() != g.num_nodes)
    throw ShapeError("attention_layer: node states must be (view nodes) x dim");
  auto param = [&](const std::string& name) -> const Tensor& {
    if (used) used->insert(name);
    return store.get(name);
  };

  LayerResult out;
  const std::size_t e = g.num_messages();
  Tensor agg;
  if (e > 0) {
    Tensor rel = Tensor::constant(g.payload, "relation_payload");
    if (g.kind == ViewKind::metapath) {
      if (!gamma.defined()) throw ArgumentError("attention_layer: meta-path view needs gamma");
      if (gamma.cols() != g.payload_dim()) throw ShapeError("attention_layer: gamma length differs from |P|");
      rel = ad::mul(rel, gamma);
    }
    const Tensor& w_r = param(EncoderParams::relation_transform_name(g.kind));
    if (w_r.rows() != g.payload_dim()) throw ShapeError("attention_layer: relation transform has the wrong input size");
    Tensor rel_emb = ad::matmul(rel, w_r);

    std::vector<Tensor> per_head;
    for (std::size_t hd = 0; hd < cfg.heads; ++hd) {
      Tensor wh = ad::matmul(h, param(EncoderParams::head_name(layer, hd, "W")));
      Tensor s_dst = ad::gather_rows(ad::matmul(wh, param(EncoderParams::head_name(layer, hd, "a_dst"))), g.dst);
      Tensor s_src = ad::gather_rows(ad::matmul(wh, param(EncoderParams::head_name(layer, hd, "a_src"))), g.src);
      Tensor s_rel = ad::matmul(rel_emb, param(EncoderParams::head_name(layer, hd, "a_rel")));
      Tensor s = ad::leaky_relu(s_dst + s_src + s_rel, cfg.leaky_slope);
      // Soft edge weights multiply the exponentiated scores.
      if (g.log_weights.defined()) s = s + ad::gather_rows(g.log_weights, g.message_edge);
      Tensor alpha = ad::segment_softmax(s, g.dst);
      if (alpha_prev && cfg.beta > 0.0) {
        const Tensor& prev = alpha_prev->at(hd);
        if (prev.rows() != e) throw ShapeError("attention_layer: previous scores not aligned with messages");
        alpha = ad::scale(alpha, 1.0 - cfg.beta) + ad::scale(prev, cfg.beta);
      }
      out.alpha.push_back(alpha);
      Tensor msg = ad::mul(ad::gather_rows(wh, g.src), alpha);
      per_head.push_back(ad::scatter_sum(msg, g.dst, g.num_nodes));
    }
    agg = per_head.front();
    for (std::size_t hd = 1; hd < per_head.size(); ++hd) agg = agg + per_head[hd];
    if (per_head.size() > 1) agg = ad::scale(agg, 1.0 / static_cast<double>(per_head.size()));
  }
  Tensor res = ad::matmul(h, param(EncoderParams::layer_name(layer, "W_res")));
  out.h = ad::elu(agg.defined() ? agg + res : res);
  return out;
}

EncodeResult encode(const ViewGraph& g, const Tensor& h0, const EncoderParams& ep, const ad::ParamStore& store,
                    const Tensor& gamma) {
  if (ep.config.layers < 1) throw ArgumentError("encode: at least one layer required");
  EncodeResult r;
  Tensor h = h0;
  const std::vector<Tensor>* prev = nullptr;
  for (std::size_t l = 0; l < ep.config.layers; ++l) {
    LayerResult lr = attention_layer(h, g, g.kind == ViewKind::metapath ? gamma : Tensor{}, ep, store, l, prev,
                                     &r.used_parameters);
    h = lr.h;
    r.alpha.push_back(std::move(lr.alpha));
    prev = r.alpha.back().empty() ? nullptr : &r.alpha.back();
  }
  r.z = g.output_rows.empty() ? h : ad::gather_rows(h, g.output_rows);
  return r;
}

}  // namespace lamp
