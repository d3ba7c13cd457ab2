#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lamp/contrastive.hpp"
#include "lamp/hin.hpp"
#include "lamp/matrix.hpp"
#include "lamp/metapath.hpp"

namespace lamp {

struct Split {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

// Per-class shuffled split of the labeled rows (label >= 0). Each class
// contributes round(train_ratio * n_c) train and round(val_ratio * n_c) val
// rows. Throws DataError when a class ends up without a training row.
Split stratified_split(const std::vector<int>& labels, std::uint64_t seed, double train_ratio = 0.24,
                       double val_ratio = 0.06);

// Labels of the target rows in a probe-ready form.
struct ProbeTargets {
  bool multi_label = false;
  int num_classes = 0;
  std::vector<int> labels;                   // single-label, -1 = unlabeled
  std::vector<std::vector<int>> label_sets;  // multi-label
  // Stratification key: the label, or the first label of the set.
  std::vector<int> strata() const;
};

ProbeTargets probe_targets(const Hin& hin);

struct ProbeOptions {
  double l2 = 1e-4;
  int max_iter = 500;
  bool standardize = true;
};

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
};

struct ProbeResult {
  F1Scores test;
  F1Scores val;
  int best_iter = 0;
};

F1Scores f1_scores(const std::vector<int>& truth, const std::vector<int>& pred, int num_classes);
F1Scores f1_scores_multilabel(const std::vector<std::vector<int>>& truth, const std::vector<std::vector<int>>& pred,
                              int num_classes);

ProbeResult linear_probe(const Matrix& z, const ProbeTargets& targets, const Split& split,
                         const ProbeOptions& opts = {});

// Limited-memory BFGS with backtracking Armijo line search. `f` returns the
// objective and writes the gradient; `on_iter` sees every accepted iterate.
struct LbfgsOptions {
  int max_iter = 500;
  int memory = 10;
  double grad_tol = 1e-7;
};
std::vector<double> lbfgs_minimize(const std::function<double(const std::vector<double>&, std::vector<double>&)>& f,
                                   std::vector<double> x0, const LbfgsOptions& opts,
                                   const std::function<void(int, const std::vector<double>&)>& on_iter = {});

// Greedy k-means++ seeding (2 + ln k candidates per centre) then Lloyd iterations; an emptied cluster is re-seeded
// with the point farthest from its centroid.
std::vector<int> kmeans(const Matrix& z, int k, Rng& rng, int max_iter = 300);

double nmi(const std::vector<int>& a, const std::vector<int>& b);
double ari(const std::vector<int>& a, const std::vector<int>& b);

struct ClusterScores {
  double nmi = 0.0;
  double ari = 0.0;
};

// Mean NMI/ARI over `runs` k-means runs on the labeled rows, k = #classes.
ClusterScores cluster_metrics(const Matrix& z, const std::vector<int>& labels, int k, std::uint64_t seed,
                              int runs = 10);

struct AuxTypeSpec {
  std::string name;
  std::size_t count = 0;
  std::size_t links = 1;   // distinct links per target node
  double homophily = -1;   // < 0: use SyntheticOptions::homophily
};

struct SyntheticOptions {
  std::size_t n_target = 300;
  std::size_t classes = 3;
  double homophily = 0.9;
  std::uint64_t seed = 0;
  std::string target_name = "paper";
  // Standard-normal target features carrying no class signal; 0 = none
  // (one-hot ids).
  std::size_t feature_dim = 0;
  std::vector<AuxTypeSpec> aux;  // empty: author (n/3, 2 links) and subject (10 per class, 1 link)
};

// Planted partition: target i has class i mod classes, auxiliary node a has
// class a mod classes. A target's link goes to an auxiliary node of its own
// class with probability `homophily`, otherwise to one of another class;
// within-class link quotas are fixed per type so the realised rate matches.
Hin make_synthetic_hin(const SyntheticOptions& opts);

// Relation name joining the target type to auxiliary type `aux` in a
// synthetic HIN, and the matching target-aux-target meta-path.
MetaPath synthetic_metapath(const Hin& hin, const std::string& aux);

enum class SensitivityVariant { lamp, no_integration };

struct CombinationResult {
  std::vector<int> members;
  std::string name;
  std::vector<double> micro;
  std::vector<double> macro;
  double micro_mean = 0.0;
  double micro_std = 0.0;
  double macro_mean = 0.0;
  double macro_std = 0.0;
  bool failed = false;
  std::string error;
};

struct SensitivityReport {
  std::string variant;
  std::vector<std::string> metapaths;
  std::vector<CombinationResult> combinations;
  double micro_std = 0.0;   // sample std over combination means
  double micro_gap = 0.0;   // max - min of combination means
  double macro_std = 0.0;
  double macro_gap = 0.0;
  std::size_t failed = 0;

  // Recomputes the aggregates from the per-combination means.
  void recompute();
  std::string to_json() const;
  // Ranking by Micro-F1 mean, descending.
  std::string to_tsv() const;
};

double sample_std(const std::vector<double>& v);

struct SensitivityOptions {
  std::size_t min_size = 2;
  int runs = 1;
  SensitivityVariant variant = SensitivityVariant::lamp;
  ProbeOptions probe;
  std::function<void(const std::string&)> progress;
};

// Trains on every combination (seed = config.seed + run) and probes the
// meta-path view embeddings. The no-integration variant trains one model
// per single meta-path and mean-pools member embeddings.
SensitivityReport sensitivity_study(const Hin& hin, const std::vector<MetaPath>& metapaths, const TrainConfig& config,
                                    const SensitivityOptions& opts);

}  // namespace lamp
