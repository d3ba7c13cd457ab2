#include "lamp/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "lamp/error.hpp"

namespace lamp {

using ad::Tensor;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ArgumentError("config: " + key + " expects a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ArgumentError("config: " + key + " expects an integer, got '" + v + "'");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < 0) throw ArgumentError("config: " + key + " must be non-negative");
  return static_cast<std::size_t>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ArgumentError("config: " + key + " expects true or false, got '" + v + "'");
}

struct Field {
  const char* key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define LAMP_DOUBLE(name) \
  Field{#name, [](TrainConfig& c, const std::string& v) { c.name = to_double(#name, v); }, \
        [](const TrainConfig& c) { return fmt_double(c.name); }}
#define LAMP_INT(name) \
  Field{#name, [](TrainConfig& c, const std::string& v) { c.name = static_cast<int>(to_int(#name, v)); }, \
        [](const TrainConfig& c) { return std::to_string(c.name); }}
#define LAMP_SIZE(name) \
  Field{#name, [](TrainConfig& c, const std::string& v) { c.name = to_size(#name, v); }, \
        [](const TrainConfig& c) { return std::to_string(c.name); }}
#define LAMP_BOOL(name) \
  Field{#name, [](TrainConfig& c, const std::string& v) { c.name = to_bool(#name, v); }, \
        [](const TrainConfig& c) { return std::string(c.name ? "true" : "false"); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      LAMP_DOUBLE(lambda_reg), LAMP_DOUBLE(tau_nce), LAMP_DOUBLE(tau_gumbel), LAMP_INT(t_pos),
      LAMP_DOUBLE(rho),        LAMP_DOUBLE(lr),      LAMP_DOUBLE(weight_decay), LAMP_DOUBLE(dropout),
      LAMP_INT(patience),      LAMP_INT(epochs),
      Field{"seed", [](TrainConfig& c, const std::string& v) { c.seed = to_size("seed", v); },
            [](const TrainConfig& c) { return std::to_string(c.seed); }},
      LAMP_SIZE(dim),          LAMP_SIZE(hidden),    LAMP_SIZE(layers),      LAMP_SIZE(gcn_layers),
      LAMP_SIZE(heads),        LAMP_DOUBLE(beta),    LAMP_BOOL(freeze_gamma), LAMP_SIZE(neg_samples),
      LAMP_BOOL(reg_on_logits), LAMP_DOUBLE(min_delta),
  };
  return f;
}

#undef LAMP_DOUBLE
#undef LAMP_INT
#undef LAMP_SIZE
#undef LAMP_BOOL

void require(bool ok, const std::string& msg) {
  if (!ok) throw ArgumentError("config: " + msg);
}

}  // namespace

void TrainConfig::validate() const {
  require(lambda_reg >= 0.0 && std::isfinite(lambda_reg), "lambda_reg must be finite and >= 0");
  require(tau_nce > 0.0, "tau_nce must be > 0");
  require(tau_gumbel > 0.0, "tau_gumbel must be > 0");
  require(t_pos >= 1, "t_pos must be >= 1");
  require(rho >= 0.0 && rho < 1.0, "rho must lie in [0, 1)");
  require(lr >= 1e-4 && lr <= 5e-2, "lr must lie in [1e-4, 5e-2]");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(dropout >= 0.1 && dropout <= 0.5, "dropout must lie in [0.1, 0.5]");
  require(patience >= 5 && patience <= 200, "patience must lie in [5, 200]");
  require(epochs >= 0, "epochs must be >= 0");
  require(dim >= 1 && hidden >= 1 && layers >= 1 && gcn_layers >= 1 && heads >= 1, "dims and depths must be >= 1");
  require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1]");
  require(min_delta >= 0.0, "min_delta must be >= 0");
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

std::string TrainConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ArgumentError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& fs = fields();
    auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return key == f.key; });
    if (it == fs.end()) throw ArgumentError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->set(base, value);
  }
  base.validate();
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

ProjectionParams init_projection(ad::ParamStore& store, std::size_t in, std::size_t hidden, Rng& rng) {
  ProjectionParams pp;
  pp.in = in;
  pp.hidden = hidden;
  store.add("proj.w1", ad::glorot_uniform(in, hidden, rng));
  store.add("proj.b1", Matrix(1, hidden));
  store.add("proj.w2", ad::glorot_uniform(hidden, in, rng));
  store.add("proj.b2", Matrix(1, in));
  return pp;
}

Tensor project(const Tensor& z, const ProjectionParams& pp, const ad::ParamStore& store) {
  if (z.cols() != pp.in) throw ShapeError("project: embedding width differs from the projection input");
  Tensor h = ad::leaky_relu(ad::matmul(z, store.get("proj.w1")) + store.get("proj.b1"), pp.slope);
  return ad::matmul(h, store.get("proj.w2")) + store.get("proj.b2");
}

PosNegAssignment select_pos_neg(const std::vector<std::map<int, int>>& connectivity, int t_pos,
                                std::size_t neg_samples, Rng* rng) {
  if (t_pos < 1) throw ArgumentError("select_pos_neg: T_pos must be >= 1");
  const int n = static_cast<int>(connectivity.size());
  PosNegAssignment out;
  out.t_pos = t_pos;
  out.pos.resize(n);
  out.neg.resize(n);
  Rng fallback(0);
  Rng& r = rng ? *rng : fallback;
  std::vector<char> in_pos(n, 0);
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<int, int>> cand;  // (-C, j)
    for (const auto& [j, c] : connectivity[i]) {
      if (j < 0 || j >= n) throw ArgumentError("select_pos_neg: connectivity refers to a non-target node");
      if (c > 0 && j != i) cand.emplace_back(-c, j);
    }
    std::sort(cand.begin(), cand.end());
    auto& pos = out.pos[i];
    for (std::size_t k = 0; k < cand.size() && k < static_cast<std::size_t>(t_pos); ++k) pos.push_back(cand[k].second);
    if (pos.empty()) pos.push_back(i);
    for (int j : pos) in_pos[j] = 1;
    auto& neg = out.neg[i];
    for (int j = 0; j < n; ++j)
      if (!in_pos[j] && j != i) neg.push_back(j);
    for (int j : pos) in_pos[j] = 0;
    if (neg_samples > 0 && neg.size() > neg_samples) {
      for (std::size_t k = 0; k < neg_samples; ++k) std::swap(neg[k], neg[k + r.below(neg.size() - k)]);
      neg.resize(neg_samples);
      std::sort(neg.begin(), neg.end());
    }
  }
  return out;
}

InfoNceResult info_nce(const Tensor& a, const Tensor& b, const PosNegAssignment& assign, double tau) {
  if (tau <= 0.0) throw ArgumentError("info_nce: temperature must be positive");
  const std::size_t n = a.rows();
  if (b.rows() != n || b.cols() != a.cols()) throw ShapeError("info_nce: views must be row-aligned");
  if (assign.pos.size() != n || assign.neg.size() != n) throw ShapeError("info_nce: assignment size differs from n");
  Matrix pos(n, n), cand(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j : assign.pos[i]) pos(i, j) = cand(i, j) = 1.0;
    for (int j : assign.neg[i]) cand(i, j) = 1.0;
  }
  Tensor sim = ad::scale(ad::matmul(ad::l2_normalize_rows(a), ad::transpose(ad::l2_normalize_rows(b))), 1.0 / tau);
  // Cosine is at most 1, so shifting by 1/tau keeps every exponent <= 0.
  Tensor e = ad::exp(ad::add_scalar(sim, -1.0 / tau));
  Tensor num = ad::row_sum(ad::mul(e, Tensor::constant(std::move(pos), "pos_mask")));
  Tensor den = ad::row_sum(ad::mul(e, Tensor::constant(std::move(cand), "candidate_mask")));
  InfoNceResult r;
  r.per_node = ad::log(den) - ad::log(num);
  r.loss = ad::mean(r.per_node);
  return r;
}

Trainer::Trainer(const Hin& hin, const std::vector<MetaPath>& metapaths, const TrainConfig& config)
    : hin_(hin), config_(config) {
  if (metapaths.empty()) throw ArgumentError("train: at least one meta-path required");
  for (const auto& mp : metapaths) subgraphs_.push_back(materialize(hin, mp));
  init();
}

Trainer::Trainer(const Hin& hin, std::vector<MetaPathSubGraph> subgraphs, const TrainConfig& config)
    : hin_(hin), config_(config), subgraphs_(std::move(subgraphs)) {
  if (subgraphs_.empty()) throw ArgumentError("train: at least one meta-path required");
  init();
}

void Trainer::init() {
  config_.validate();
  const std::size_t n_targets = hin_.type_count(hin_.target_type);
  for (const auto& sg : subgraphs_)
    if (sg.n != n_targets) throw DataError("train: sub-graph node count differs from the target count");
  integrated_ = integrate(subgraphs_);
  Rng neg_rng = stream(config_.seed, "negatives");
  assign_ = select_pos_neg(connectivity_all(subgraphs_), config_.t_pos, config_.neg_samples, &neg_rng);
  schema_ = schema_view(hin_);
  features_ = type_features(hin_);
  target_rows_.resize(n_targets);
  std::iota(target_rows_.begin(), target_rows_.end(), static_cast<int>(hin_.type_offset(hin_.target_type)));

  Rng init_rng = stream(config_.seed, "init");
  EncoderConfig ec;
  ec.dim = config_.dim;
  ec.hidden = config_.hidden;
  ec.layers = config_.layers;
  ec.heads = config_.heads;
  ec.beta = config_.beta;
  ep_ = init_encoder(store_, hin_, integrated_.num_metapaths(), ec, init_rng);
  AugmenterConfig ac;
  ac.gcn_layers = config_.gcn_layers;
  ac.dim = config_.dim;
  ac.hidden = config_.hidden;
  ac.tau_gumbel = config_.tau_gumbel;
  ac.drop_rate = config_.rho;
  ap_ = init_augmenter(store_, config_.dim, integrated_.num_metapaths(), ac, init_rng);
  pp_ = init_projection(store_, config_.dim, config_.hidden, init_rng);

  ad::AdamOptions ao;
  ao.lr = config_.lr;
  ao.weight_decay = config_.weight_decay;
  opt_enc_ = ad::Adam(ao);
  opt_aug_ = ad::Adam(ao);
  drop_rng_ = stream(config_.seed, "drop");
  gumbel_rng_ = stream(config_.seed, "gumbel");
  dropout_rng_ = stream(config_.seed, "dropout");
  set_phase(Phase::none);
}

std::vector<Tensor> Trainer::encoder_side() const {
  auto out = store_.with_prefix("enc.");
  out.push_back(store_.get("gamma"));
  for (auto& t : store_.with_prefix("proj.")) out.push_back(t);
  return out;
}

std::vector<Tensor> Trainer::augmenter_side() const { return store_.with_prefix("aug."); }

void Trainer::set_phase(Phase phase) {
  for (auto t : encoder_side()) t.set_frozen(phase == Phase::step2);
  for (auto t : augmenter_side()) t.set_frozen(phase == Phase::step1);
  if (config_.freeze_gamma) store_.get("gamma").set_frozen(true);
}

EpochDraw Trainer::draw_epoch() {
  EpochDraw d;
  const std::size_t e = integrated_.edges.size();
  if (e > 0) {
    for (int attempt = 0; attempt < kAugmentRetries; ++attempt) {
      d.kept = random_edge_mask(e, config_.rho, drop_rng_);
      if (!d.kept.empty()) break;
    }
    if (d.kept.empty()) throw ArgumentError("train: random edge drop removed every edge; lower rho");
  }
  d.gumbel_uniform.resize(d.kept.size());
  for (double& u : d.gumbel_uniform) u = gumbel_rng_.uniform();
  d.dropout_seed = dropout_rng_.next_u64();
  d.train = true;
  return d;
}

EpochDraw Trainer::inference_draw() const {
  EpochDraw d;
  d.kept.resize(integrated_.edges.size());
  std::iota(d.kept.begin(), d.kept.end(), 0);
  Rng g = stream(config_.seed, "inference");
  d.gumbel_uniform.resize(d.kept.size());
  for (double& u : d.gumbel_uniform) u = g.uniform();
  d.train = false;
  return d;
}

ForwardPass Trainer::forward(const EpochDraw& draw) const {
  ForwardPass fp;
  const Tensor& gamma = store_.get("gamma");
  fp.h0 = project_features(hin_, features_, ep_, store_);
  Rng drop(draw.dropout_seed);
  Tensor h0_schema = ad::dropout(fp.h0, config_.dropout, drop, draw.train);
  fp.schema = encode(schema_, h0_schema, ep_, store_, gamma);

  Tensor h0_target = ad::gather_rows(fp.h0, target_rows_);
  ViewGraph mv;
  if (!draw.kept.empty()) {
    fp.aug = augment_fixed(integrated_, draw.kept, draw.gumbel_uniform, h0_target, ap_, store_, gamma);
    mv = metapath_view(integrated_, draw.kept, fp.aug.log_p);
    fp.reg = retention_regularizer(fp.aug.logits, config_.reg_on_logits);
  } else {
    mv = metapath_view(integrated_, {});
    fp.reg = Tensor::scalar(0.0);
  }
  Tensor h0_meta = ad::dropout(h0_target, config_.dropout, drop, draw.train);
  fp.metapath = encode(mv, h0_meta, ep_, store_, gamma);

  fp.proj_schema = project(fp.schema.z, pp_, store_);
  fp.proj_metapath = project(fp.metapath.z, pp_, store_);
  fp.nce = info_nce(fp.proj_schema, fp.proj_metapath, assign_, config_.tau_nce);
  if (!std::isfinite(fp.nce.loss.item())) throw NumericError("train: contrastive loss is not finite");
  return fp;
}

namespace {

double grad_norm(const std::vector<Tensor>& ps) {
  double s = 0.0;
  for (const auto& p : ps)
    for (double g : p.grad().data) s += g * g;
  return std::sqrt(s);
}

void zero_grads(ad::ParamStore& store) {
  for (auto& p : store.all()) p.node()->grad = Matrix(p.rows(), p.cols());
}

}  // namespace

EpochLog Trainer::train_epoch() {
  EpochLog log;
  log.epoch = epoch_;
  const EpochDraw draw = draw_epoch();
  log.kept_edges = draw.kept.size();

  set_phase(Phase::step1);
  {
    ForwardPass fp = forward(draw);
    zero_grads(store_);
    ad::backward(fp.nce.loss);
    log.j_step1 = fp.nce.loss.item();
    log.grad_norm_step1 = grad_norm(encoder_side());
    opt_enc_.step(store_.all());
  }

  if (!draw.kept.empty()) {
    set_phase(Phase::step2);
    ForwardPass fp = forward(draw);
    Tensor loss = ad::neg(fp.nce.loss) - ad::scale(fp.reg, config_.lambda_reg);
    if (!std::isfinite(loss.item())) throw NumericError("train: adversarial loss is not finite");
    zero_grads(store_);
    ad::backward(loss);
    log.j_step2 = fp.nce.loss.item();
    log.reg = fp.reg.item();
    log.q_mean = ad::mean(fp.aug.retention).item();
    log.grad_norm_step2 = grad_norm(augmenter_side());
    opt_aug_.step(store_.all());
  }
  set_phase(Phase::none);
  ++epoch_;
  return log;
}

TrainResult Trainer::train() {
  TrainResult r;
  double best = std::numeric_limits<double>::infinity();
  ad::ParamStore best_params = store_.clone();
  int wait = 0;
  r.stop_reason = "max_epochs";
  for (int e = 0; e < config_.epochs; ++e) {
    ad::ParamStore before = store_.clone();
    EpochLog log = train_epoch();
    r.log.push_back(log);
    ++r.epochs_run;
    if (!std::isfinite(best) || log.j_step1 < best - config_.min_delta * std::abs(best)) {
      best = log.j_step1;
      best_params = std::move(before);
      r.best_epoch = log.epoch;
      wait = 0;
    } else if (++wait >= config_.patience) {
      r.stop_reason = "patience";
      break;
    }
  }
  if (r.epochs_run > 0) store_.copy_values_from(best_params);
  r.embeddings = embed();
  r.final_retention = retention();
  return r;
}

Matrix Trainer::embed() const { return forward(inference_draw()).metapath.z.value(); }

double Trainer::retention() const {
  if (integrated_.edges.empty()) return 0.0;
  return ad::mean(forward(inference_draw()).aug.retention).item();
}

std::string epoch_log_json(const EpochLog& e) {
  nlohmann::json j = {{"epoch", e.epoch},
                      {"j_step1", e.j_step1},
                      {"j_step2", e.j_step2},
                      {"reg", e.reg},
                      {"q_mean", e.q_mean},
                      {"grad_norm_step1", e.grad_norm_step1},
                      {"grad_norm_step2", e.grad_norm_step2},
                      {"kept_edges", e.kept_edges}};
  return j.dump();
}

}  // namespace lamp
