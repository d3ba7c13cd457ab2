#pragma once

// Finite-difference checks for every differentiable op and for the composed
// training loss, shared by the unit tests and the acceptance runner.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lamp/autodiff.hpp"
#include "lamp/contrastive.hpp"
#include "lamp/eval.hpp"
#include "oracles.hpp"

namespace gradsuite {

using lamp::Matrix;
using lamp::ad::Tensor;

struct OpCheck {
  std::string op;
  double error = 0.0;
  std::string worst;
};

inline std::vector<OpCheck> op_checks(double h) {
  namespace ad = lamp::ad;
  std::vector<OpCheck> out;
  lamp::Rng rng(2024);
  auto param = [&](std::size_t r, std::size_t c, const char* name, double lo = -1.0, double hi = 1.0) {
    return Tensor::parameter(oracle::random_matrix(r, c, rng, lo, hi), name);
  };
  auto run = [&](const std::string& op, std::vector<Tensor> ps, std::function<Tensor()> f) {
    lamp::Rng wr(17);
    Tensor w_probe = f();
    Tensor w = Tensor::constant(oracle::random_matrix(w_probe.rows(), w_probe.cols(), wr), "w");
    auto loss = [&] { return ad::sum(ad::mul(f(), w)); };
    OpCheck c;
    c.op = op;
    c.error = oracle::gradient_check(loss, ps, h, &c.worst);
    out.push_back(c);
  };

  Tensor a = param(3, 4, "a"), b = param(4, 2, "b"), c = param(3, 4, "c");
  Tensor row = param(1, 4, "row"), col = param(3, 1, "col");
  Tensor pos = param(3, 4, "pos", 0.5, 2.0);
  run("matmul", {a, b}, [&] { return ad::matmul(a, b); });
  run("transpose", {a}, [&] { return ad::transpose(a); });
  run("add", {a, c}, [&] { return ad::add(a, c); });
  run("add_broadcast_row", {a, row}, [&] { return ad::add(a, row); });
  run("add_broadcast_col", {a, col}, [&] { return ad::add(a, col); });
  run("sub", {a, c}, [&] { return ad::sub(a, c); });
  run("sub_broadcast", {a, row}, [&] { return ad::sub(row, a); });
  run("mul", {a, c}, [&] { return ad::mul(a, c); });
  run("mul_broadcast", {a, col}, [&] { return ad::mul(a, col); });
  run("scale", {a}, [&] { return ad::scale(a, -1.7); });
  run("neg", {a}, [&] { return ad::neg(a); });
  run("add_scalar", {a}, [&] { return ad::add_scalar(a, 0.3); });
  run("concat_cols", {a, c}, [&] { return ad::concat({a, c}, 1); });
  run("concat_rows", {a, c}, [&] { return ad::concat({a, c}, 0); });
  const std::vector<int> idx{2, 0, 2, 1};
  run("gather_rows", {a}, [&] { return ad::gather_rows(a, idx); });
  const std::vector<int> seg{0, 0, 2};
  run("scatter_sum", {a}, [&] { return ad::scatter_sum(a, seg, 4); });
  Tensor scores = param(6, 2, "scores");
  const std::vector<int> runs{0, 0, 0, 1, 3, 3};
  run("segment_softmax", {scores}, [&] { return ad::segment_softmax(scores, runs); });
  run("leaky_relu", {a}, [&] { return ad::leaky_relu(a, 0.2); });
  run("elu", {a}, [&] { return ad::elu(a); });
  run("sigmoid", {a}, [&] { return ad::sigmoid(a); });
  run("log_sigmoid", {a}, [&] { return ad::log_sigmoid(a); });
  run("log", {pos}, [&] { return ad::log(pos); });
  run("exp", {a}, [&] { return ad::exp(a); });
  run("dropout", {a}, [&] {
    lamp::Rng d(5);
    return ad::dropout(a, 0.4, d, true);
  });
  run("l2_normalize_rows", {a}, [&] { return ad::l2_normalize_rows(a); });
  run("mean", {a}, [&] { return ad::mean(a); });
  run("sum", {a}, [&] { return ad::sum(a); });
  run("row_sum", {a}, [&] { return ad::row_sum(a); });
  return out;
}

// 12-node planted HIN: 6 targets, 4 authors, 2 subjects, two classes.
inline lamp::Hin tiny_hin(std::uint64_t seed = 3) {
  lamp::SyntheticOptions so;
  so.n_target = 6;
  so.classes = 2;
  so.homophily = 0.8;
  so.seed = seed;
  so.aux = {{"author", 4, 1, -1}, {"subject", 2, 1, -1}};
  return lamp::make_synthetic_hin(so);
}

inline lamp::TrainConfig tiny_config() {
  lamp::TrainConfig cfg;
  cfg.dim = 4;
  cfg.hidden = 4;
  cfg.t_pos = 2;
  cfg.rho = 0.2;
  cfg.seed = 9;
  return cfg;
}

// Max relative error of the composed objective J - lambda * reg with respect
// to every parameter, one fixed epoch draw.
inline OpCheck full_loss_check(double h) {
  lamp::Hin hin = tiny_hin();
  std::vector<lamp::MetaPath> mps = {lamp::synthetic_metapath(hin, "author"), lamp::synthetic_metapath(hin, "subject")};
  lamp::Trainer tr(hin, mps, tiny_config());
  tr.set_phase(lamp::Phase::none);
  const lamp::EpochDraw draw = tr.draw_epoch();
  const double lambda = tr.config().lambda_reg;
  auto loss = [&] {
    lamp::ForwardPass fp = tr.forward(draw);
    return lamp::ad::sub(fp.nce.loss, lamp::ad::scale(fp.reg, lambda));
  };
  OpCheck c;
  c.op = "training_loss";
  c.error = oracle::gradient_check(loss, tr.params().all(), h, &c.worst);
  return c;
}

}  // namespace gradsuite
