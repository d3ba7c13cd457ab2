#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lamp/autodiff.hpp"
#include "lamp/encoder.hpp"
#include "lamp/hin.hpp"
#include "lamp/lma.hpp"
#include "lamp/metapath.hpp"

namespace lamp {

struct TrainConfig {
  double lambda_reg = 0.3;
  double tau_nce = 0.5;
  double tau_gumbel = 1.0;
  int t_pos = 20;
  double rho = 0.5;            // random-drop rate
  double lr = 1e-3;
  double weight_decay = 0.0;
  double dropout = 0.2;        // feature dropout on H0
  int patience = 5;
  int epochs = 200;
  std::uint64_t seed = 0;
  std::size_t dim = 64;
  std::size_t hidden = 64;     // type MLP, projection head and scoring MLP width
  std::size_t layers = 2;      // attention layers L
  std::size_t gcn_layers = 2;  // augmenter GCN layers K
  std::size_t heads = 1;
  double beta = 0.05;
  bool freeze_gamma = false;
  std::size_t neg_samples = 0;  // 0 = all non-positive targets
  bool reg_on_logits = false;
  double min_delta = 1e-2;

  // Throws ArgumentError on out-of-range values.
  void validate() const;
  std::string to_text() const;
  std::string hash() const;  // 16 hex digits over to_text()
};

// `key = value` lines, '#' comments. Unknown keys and malformed values throw
// ArgumentError. Keys not present keep the values in `base`.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

struct ProjectionParams {
  std::size_t in = 0;
  std::size_t hidden = 64;
  double slope = 0.2;
};

ProjectionParams init_projection(ad::ParamStore& store, std::size_t in, std::size_t hidden, Rng& rng);
// W2 LeakyReLU(W1 z + b1) + b2 with parameters proj.{w1,b1,w2,b2}.
ad::Tensor project(const ad::Tensor& z, const ProjectionParams& pp, const ad::ParamStore& store);

struct PosNegAssignment {
  int t_pos = 1;
  std::vector<std::vector<int>> pos;
  std::vector<std::vector<int>> neg;
};

// Candidates ranked by (C desc, id asc); Pos = top min(T_pos, #C>0), or {i}
// when that is empty. Neg = remaining targets minus Pos and i, uniformly
// subsampled to `neg_samples` when nonzero.
PosNegAssignment select_pos_neg(const std::vector<std::map<int, int>>& connectivity, int t_pos,
                                std::size_t neg_samples = 0, Rng* rng = nullptr);

struct InfoNceResult {
  ad::Tensor per_node;  // n x 1
  ad::Tensor loss;      // mean
};

InfoNceResult info_nce(const ad::Tensor& a, const ad::Tensor& b, const PosNegAssignment& assign, double tau);

struct EpochLog {
  int epoch = 0;
  double j_step1 = 0.0;
  double j_step2 = 0.0;
  double reg = 0.0;
  double q_mean = 0.0;
  double grad_norm_step1 = 0.0;
  double grad_norm_step2 = 0.0;
  std::size_t kept_edges = 0;
};

// Randomness used by one epoch, shared by both steps.
struct EpochDraw {
  std::vector<int> kept;
  std::vector<double> gumbel_uniform;
  std::uint64_t dropout_seed = 0;
  bool train = true;
};

struct ForwardPass {
  ad::Tensor h0;
  AugmentedGraph aug;
  EncodeResult schema;
  EncodeResult metapath;
  ad::Tensor proj_schema;
  ad::Tensor proj_metapath;
  InfoNceResult nce;
  ad::Tensor reg;
};

struct TrainResult {
  Matrix embeddings;  // target nodes x dim, meta-path view, pre-projection
  std::vector<EpochLog> log;
  int epochs_run = 0;
  int best_epoch = -1;
  std::string stop_reason;
  double final_retention = 0.0;  // mean sigmoid(omega) on the full graph
};

enum class Phase { step1, step2, none };

class Trainer {
 public:
  Trainer(const Hin& hin, const std::vector<MetaPath>& metapaths, const TrainConfig& config);
  Trainer(const Hin& hin, std::vector<MetaPathSubGraph> subgraphs, const TrainConfig& config);

  EpochDraw draw_epoch();
  EpochDraw inference_draw() const;
  ForwardPass forward(const EpochDraw& draw) const;

  // Sets frozen flags for a phase; `none` unfreezes all but a frozen gamma.
  void set_phase(Phase phase);
  EpochLog train_epoch();
  TrainResult train();
  Matrix embed() const;
  double retention() const;

  ad::ParamStore& params() { return store_; }
  const ad::ParamStore& params() const { return store_; }
  std::vector<ad::Tensor> encoder_side() const;  // enc.*, gamma, proj.*
  std::vector<ad::Tensor> augmenter_side() const;
  const TrainConfig& config() const { return config_; }
  const IntegratedSubGraph& integrated() const { return integrated_; }
  const std::vector<MetaPathSubGraph>& subgraphs() const { return subgraphs_; }
  const PosNegAssignment& assignment() const { return assign_; }
  const EncoderParams& encoder_params() const { return ep_; }
  const ProjectionParams& projection_params() const { return pp_; }
  const ViewGraph& schema_graph() const { return schema_; }
  int epoch() const { return epoch_; }

 private:
  void init();

  const Hin& hin_;
  TrainConfig config_;
  std::vector<MetaPathSubGraph> subgraphs_;
  IntegratedSubGraph integrated_;
  PosNegAssignment assign_;
  ViewGraph schema_;
  std::vector<Matrix> features_;
  std::vector<int> target_rows_;
  ad::ParamStore store_;
  EncoderParams ep_;
  AugmenterParams ap_;
  ProjectionParams pp_;
  ad::Adam opt_enc_;
  ad::Adam opt_aug_;
  Rng drop_rng_;
  Rng gumbel_rng_;
  Rng dropout_rng_;
  int epoch_ = 0;
};

std::string epoch_log_json(const EpochLog& e);

}  // namespace lamp
