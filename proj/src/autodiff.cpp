#include "lamp/autodiff.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "lamp/error.hpp"

namespace lamp::ad {

namespace {

using NodePtr = std::shared_ptr<Node>;

void check_forward(const Matrix& m, const std::string& op) {
  if (!all_finite(m)) throw NumericError("non-finite value produced by op '" + op + "'");
}

// Builds an op node. Inputs and the backward rule are kept only when some
// input needs a gradient.
Tensor make_op(Matrix value, std::string op, std::vector<NodePtr> inputs, std::function<void(Node&)> bwd) {
  check_forward(value, op);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->leaf = false;
  n->name = op;
  n->op = std::move(op);
  n->requires_grad = std::any_of(inputs.begin(), inputs.end(), [](const NodePtr& p) { return p->requires_grad; });
  if (n->requires_grad) {
    n->inputs = std::move(inputs);
    n->backward = std::move(bwd);
  }
  return Tensor(std::move(n));
}

Matrix& grad_of(Node& n) {
  if (!n.value.same_shape(n.grad)) n.grad = Matrix(n.value.rows, n.value.cols);
  return n.grad;
}

struct Broadcast {
  std::size_t rows, cols;
};

Broadcast broadcast_shape(const Matrix& a, const Matrix& b, const char* op) {
  auto dim = [&](std::size_t x, std::size_t y) {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    throw ShapeError(std::string(op) + ": shapes " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + " and " +
                     std::to_string(b.rows) + "x" + std::to_string(b.cols) + " do not broadcast");
  };
  return {dim(a.rows, b.rows), dim(a.cols, b.cols)};
}

inline std::size_t bidx(const Matrix& m, std::size_t i, std::size_t j) {
  return (m.rows == 1 ? 0 : i) * m.cols + (m.cols == 1 ? 0 : j);
}

template <class F>
Tensor unary(const Tensor& a, const char* op, F&& fwd, std::function<double(double x, double y)> dydx) {
  const Matrix& x = a.value();
  Matrix y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = fwd(x.data[i]);
  auto an = a.shared();
  return make_op(std::move(y), op, {an}, [an, dydx](Node& self) {
    Matrix& ga = grad_of(*an);
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      ga.data[i] += self.grad.data[i] * dydx(an->value.data[i], self.value.data[i]);
  });
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------- Tensor

Tensor Tensor::constant(Matrix value, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->name = std::move(name);
  n->op = "constant";
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(Matrix value, std::string name) {
  check_forward(value, "parameter:" + name);
  auto n = std::make_shared<Node>();
  n->grad = Matrix(value.rows, value.cols);
  n->value = std::move(value);
  n->name = std::move(name);
  n->op = "parameter";
  n->requires_grad = true;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return constant(Matrix(1, 1, v), "scalar"); }

std::size_t Tensor::rows() const { return node_->value.rows; }
std::size_t Tensor::cols() const { return node_->value.cols; }
const Matrix& Tensor::value() const { return node_->value; }
const Matrix& Tensor::grad() const { return grad_of(*node_); }
Matrix& Tensor::mutable_value() {
  if (!node_->leaf) throw std::logic_error("mutable_value on a non-leaf tensor");
  return node_->value;
}
double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("item() on a non-scalar tensor");
  return node_->value.data[0];
}
bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->leaf; }
void Tensor::set_frozen(bool frozen) {
  if (!node_->leaf || node_->op != "parameter") throw std::logic_error("only parameters can be frozen");
  node_->frozen = frozen;
  node_->requires_grad = !frozen;
}
bool Tensor::frozen() const { return node_->frozen; }
const std::string& Tensor::name() const { return node_->name; }
const std::string& Tensor::op() const { return node_->op; }

// ---------------------------------------------------------------- Tape

Tape::Tape(const Tensor& root) : root_(root) {
  // Iterative post-order DFS; state 1 = on stack, 2 = done.
  std::unordered_map<Node*, int> state;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  state[root.node()] = 1;
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      const int s = state[child];
      if (s == 1) throw std::logic_error("cyclic computation graph");
      if (s == 0) {
        state[child] = 1;
        stack.emplace_back(child, 0);
      }
    } else {
      state[n] = 2;
      order_.push_back(n);
      stack.pop_back();
    }
  }
}

void Tape::backward() {
  for (Node* n : order_) {
    if (n->requires_grad || n->op == "parameter") {
      grad_of(*n).fill(0.0);
    }
  }
  Node* root = root_.node();
  if (!root->requires_grad) return;
  grad_of(*root).fill(1.0);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node* n = *it;
    if (!n->requires_grad || n->leaf || !n->backward) continue;
    grad_of(*n);
    n->backward(*n);
    for (const auto& in : n->inputs) {
      if (in->requires_grad && !all_finite(in->grad))
        throw NumericError("non-finite gradient produced by backward of op '" + n->op + "'");
    }
  }
}

void backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError("backward requires a scalar loss");
  Tape tape(loss);
  tape.backward();
}

// ---------------------------------------------------------------- ops

Tensor detach(const Tensor& a) { return Tensor::constant(a.value(), "detached"); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " times " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  Matrix c;
  gemm(a.value(), false, b.value(), false, c, false);
  auto an = a.shared(), bn = b.shared();
  return make_op(std::move(c), "matmul", {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) gemm(self.grad, false, bn->value, true, grad_of(*an), true);
    if (bn->requires_grad) gemm(an->value, true, self.grad, false, grad_of(*bn), true);
  });
}

Tensor transpose(const Tensor& a) {
  auto an = a.shared();
  return make_op(lamp::transpose(a.value()), "transpose", {an}, [an](Node& self) {
    Matrix& ga = grad_of(*an);
    for (std::size_t i = 0; i < self.grad.rows; ++i)
      for (std::size_t j = 0; j < self.grad.cols; ++j) ga(j, i) += self.grad(i, j);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Matrix &x = a.value(), &y = b.value();
  const auto s = broadcast_shape(x, y, "add");
  Matrix out(s.rows, s.cols);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) out(i, j) = x.data[bidx(x, i, j)] + y.data[bidx(y, i, j)];
  auto an = a.shared(), bn = b.shared();
  return make_op(std::move(out), "add", {an, bn}, [an, bn](Node& self) {
    for (auto* p : {an.get(), bn.get()}) {
      if (!p->requires_grad) continue;
      Matrix& g = grad_of(*p);
      for (std::size_t i = 0; i < self.grad.rows; ++i)
        for (std::size_t j = 0; j < self.grad.cols; ++j) g.data[bidx(p->value, i, j)] += self.grad(i, j);
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const Matrix &x = a.value(), &y = b.value();
  const auto s = broadcast_shape(x, y, "mul");
  Matrix out(s.rows, s.cols);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) out(i, j) = x.data[bidx(x, i, j)] * y.data[bidx(y, i, j)];
  auto an = a.shared(), bn = b.shared();
  return make_op(std::move(out), "mul", {an, bn}, [an, bn](Node& self) {
    const Matrix &x = an->value, &y = bn->value;
    if (an->requires_grad) {
      Matrix& g = grad_of(*an);
      for (std::size_t i = 0; i < self.grad.rows; ++i)
        for (std::size_t j = 0; j < self.grad.cols; ++j) g.data[bidx(x, i, j)] += self.grad(i, j) * y.data[bidx(y, i, j)];
    }
    if (bn->requires_grad) {
      Matrix& g = grad_of(*bn);
      for (std::size_t i = 0; i < self.grad.rows; ++i)
        for (std::size_t j = 0; j < self.grad.cols; ++j) g.data[bidx(y, i, j)] += self.grad(i, j) * x.data[bidx(x, i, j)];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  Matrix out = a.value();
  for (double& v : out.data) v *= s;
  auto an = a.shared();
  return make_op(std::move(out), "scale", {an}, [an, s](Node& self) {
    Matrix& g = grad_of(*an);
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += s * self.grad.data[i];
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor add_scalar(const Tensor& a, double s) {
  Matrix out = a.value();
  for (double& v : out.data) v += s;
  auto an = a.shared();
  return make_op(std::move(out), "add_scalar", {an}, [an](Node& self) {
    Matrix& g = grad_of(*an);
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += self.grad.data[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  std::vector<NodePtr> ins;
  std::size_t rows = 0, cols = 0;
  for (const auto& p : parts) {
    ins.push_back(p.shared());
    if (axis == 1) {
      if (rows == 0 && cols == 0) rows = p.rows();
      if (p.rows() != rows) throw ShapeError("concat: row counts differ");
      cols += p.cols();
    } else {
      if (rows == 0 && cols == 0) cols = p.cols();
      if (p.cols() != cols) throw ShapeError("concat: column counts differ");
      rows += p.rows();
    }
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t i = 0; i < v.rows; ++i)
      for (std::size_t j = 0; j < v.cols; ++j) {
        if (axis == 1) out(i, off + j) = v(i, j);
        else out(off + i, j) = v(i, j);
      }
    off += axis == 1 ? v.cols : v.rows;
  }
  return make_op(std::move(out), "concat", ins, [ins, axis](Node& self) {
    std::size_t off = 0;
    for (const auto& p : ins) {
      const std::size_t r = p->value.rows, c = p->value.cols;
      if (p->requires_grad) {
        Matrix& g = grad_of(*p);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g(i, j) += axis == 1 ? self.grad(i, off + j) : self.grad(off + i, j);
      }
      off += axis == 1 ? c : r;
    }
  });
}

Tensor gather_rows(const Tensor& a, std::span<const int> index) {
  const Matrix& x = a.value();
  Matrix out(index.size(), x.cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const int r = index[i];
    if (r < 0 || static_cast<std::size_t>(r) >= x.rows) throw ShapeError("gather_rows: index out of range");
    std::copy_n(x.data.begin() + r * x.cols, x.cols, out.data.begin() + i * x.cols);
  }
  auto an = a.shared();
  std::vector<int> idx(index.begin(), index.end());
  return make_op(std::move(out), "gather_rows", {an}, [an, idx = std::move(idx)](Node& self) {
    Matrix& g = grad_of(*an);
    const std::size_t c = g.cols;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = g.data.data() + idx[i] * c;
      const double* src = self.grad.data.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Tensor scatter_sum(const Tensor& a, std::span<const int> index, std::size_t rows) {
  const Matrix& x = a.value();
  if (index.size() != x.rows) throw ShapeError("scatter_sum: index length differs from row count");
  Matrix out(rows, x.cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const int r = index[i];
    if (r < 0 || static_cast<std::size_t>(r) >= rows) throw ShapeError("scatter_sum: index out of range");
    double* dst = out.data.data() + r * x.cols;
    const double* src = x.data.data() + i * x.cols;
    for (std::size_t j = 0; j < x.cols; ++j) dst[j] += src[j];
  }
  auto an = a.shared();
  std::vector<int> idx(index.begin(), index.end());
  return make_op(std::move(out), "scatter_sum", {an}, [an, idx = std::move(idx)](Node& self) {
    Matrix& g = grad_of(*an);
    const std::size_t c = g.cols;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = g.data.data() + i * c;
      const double* src = self.grad.data.data() + idx[i] * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Tensor segment_softmax(const Tensor& scores, std::span<const int> segment_ids) {
  const Matrix& s = scores.value();
  if (segment_ids.size() != s.rows) throw ShapeError("segment_softmax: segment id count differs from row count");
  if (s.rows == 0) throw ShapeError("segment_softmax: empty input");
  // Run boundaries.
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < segment_ids.size(); ++i) {
    if (i > 0 && segment_ids[i] < segment_ids[i - 1]) throw ShapeError("segment_softmax: segment ids must be sorted");
    if (i == 0 || segment_ids[i] != segment_ids[i - 1]) starts.push_back(i);
  }
  starts.push_back(segment_ids.size());

  Matrix y(s.rows, s.cols);
  for (std::size_t seg = 0; seg + 1 < starts.size(); ++seg) {
    const std::size_t b = starts[seg], e = starts[seg + 1];
    for (std::size_t c = 0; c < s.cols; ++c) {
      double mx = -INFINITY;
      for (std::size_t i = b; i < e; ++i) mx = std::max(mx, s(i, c));
      double z = 0.0;
      for (std::size_t i = b; i < e; ++i) z += (y(i, c) = std::exp(s(i, c) - mx));
      for (std::size_t i = b; i < e; ++i) y(i, c) /= z;
    }
  }
  auto sn = scores.shared();
  return make_op(std::move(y), "segment_softmax", {sn}, [sn, starts = std::move(starts)](Node& self) {
    Matrix& g = grad_of(*sn);
    const Matrix& yv = self.value;
    for (std::size_t seg = 0; seg + 1 < starts.size(); ++seg) {
      const std::size_t b = starts[seg], e = starts[seg + 1];
      for (std::size_t c = 0; c < yv.cols; ++c) {
        double dot = 0.0;
        for (std::size_t i = b; i < e; ++i) dot += self.grad(i, c) * yv(i, c);
        for (std::size_t i = b; i < e; ++i) g(i, c) += yv(i, c) * (self.grad(i, c) - dot);
      }
    }
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, "leaky_relu", [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Tensor elu(const Tensor& a) {
  return unary(
      a, "elu", [](double x) { return x > 0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0 ? 1.0 : y + 1.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, "sigmoid", sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Tensor log_sigmoid(const Tensor& a) {
  return unary(
      a, "log_sigmoid", [](double x) { return x < 0 ? x - std::log1p(std::exp(x)) : -std::log1p(std::exp(-x)); },
      [](double x, double) { return sigmoid_scalar(-x); });
}

Tensor log(const Tensor& a) {
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor dropout(const Tensor& a, double rate, Rng& rng, bool train) {
  if (rate < 0.0 || rate >= 1.0) throw ArgumentError("dropout rate must lie in [0, 1)");
  if (!train || rate == 0.0) return a;
  Matrix mask(a.rows(), a.cols());
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask.data) m = rng.uniform() < rate ? 0.0 : keep;
  return mul(a, Tensor::constant(std::move(mask), "dropout_mask"));
}

Tensor l2_normalize_rows(const Tensor& a, double eps) {
  const Matrix& x = a.value();
  Matrix y(x.rows, x.cols);
  std::vector<double> norms(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v * v;
    norms[i] = std::max(std::sqrt(s), eps);
    for (std::size_t j = 0; j < x.cols; ++j) y(i, j) = x(i, j) / norms[i];
  }
  auto an = a.shared();
  return make_op(std::move(y), "l2_normalize_rows", {an}, [an, norms = std::move(norms), eps](Node& self) {
    Matrix& g = grad_of(*an);
    const Matrix& yv = self.value;
    for (std::size_t i = 0; i < yv.rows; ++i) {
      const double n = norms[i];
      double dot = 0.0;
      const bool floored = n <= eps;
      if (!floored)
        for (std::size_t j = 0; j < yv.cols; ++j) dot += yv(i, j) * self.grad(i, j);
      for (std::size_t j = 0; j < yv.cols; ++j) g(i, j) += (self.grad(i, j) - yv(i, j) * dot) / n;
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  auto an = a.shared();
  return make_op(Matrix(1, 1, s), "sum", {an}, [an](Node& self) {
    Matrix& g = grad_of(*an);
    const double d = self.grad.data[0];
    for (double& v : g.data) v += d;
  });
}

Tensor mean(const Tensor& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Tensor row_sum(const Tensor& a) {
  const Matrix& x = a.value();
  Matrix out(x.rows, 1);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v;
    out(i, 0) = s;
  }
  auto an = a.shared();
  return make_op(std::move(out), "row_sum", {an}, [an](Node& self) {
    Matrix& g = grad_of(*an);
    for (std::size_t i = 0; i < g.rows; ++i)
      for (std::size_t j = 0; j < g.cols; ++j) g(i, j) += self.grad(i, 0);
  });
}

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-limit, limit);
  return m;
}

// ---------------------------------------------------------------- params

Tensor& ParamStore::add(std::string name, Matrix value) {
  if (contains(name)) throw std::logic_error("duplicate parameter name " + name);
  params_.push_back(Tensor::parameter(std::move(value), std::move(name)));
  return params_.back();
}

Tensor& ParamStore::get(const std::string& name) {
  for (auto& p : params_)
    if (p.name() == name) return p;
  throw std::out_of_range("no parameter named " + name);
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name() == name) return p;
  throw std::out_of_range("no parameter named " + name);
}

bool ParamStore::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Tensor& p) { return p.name() == name; });
}

std::vector<Tensor> ParamStore::with_prefix(const std::string& prefix) const {
  std::vector<Tensor> out;
  for (const auto& p : params_)
    if (p.name().rfind(prefix, 0) == 0) out.push_back(p);
  return out;
}

ParamStore ParamStore::clone() const {
  ParamStore c;
  for (const auto& p : params_) {
    Tensor& t = c.add(p.name(), p.value());
    t.set_frozen(p.frozen());
  }
  return c;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  for (auto& p : params_) {
    const Tensor& o = other.get(p.name());
    if (!o.value().same_shape(p.value())) throw ShapeError("copy_values_from: shape mismatch for " + p.name());
    p.mutable_value() = o.value();
  }
}

Adam::Slot& Adam::slot_for(Node* n, const Matrix& shape) {
  for (auto& [k, s] : slots_)
    if (k == n) return s;
  slots_.push_back({n, Slot{Matrix(shape.rows, shape.cols), Matrix(shape.rows, shape.cols), 0}});
  return slots_.back().second;
}

void Adam::step(std::span<Tensor> params) {
  for (auto& p : params) {
    if (p.frozen()) continue;
    Node* n = p.node();
    Slot& s = slot_for(n, n->value);
    ++s.t;
    const double b1t = 1.0 - std::pow(opts_.beta1, static_cast<double>(s.t));
    const double b2t = 1.0 - std::pow(opts_.beta2, static_cast<double>(s.t));
    const Matrix& g = grad_of(*n);
    for (std::size_t i = 0; i < n->value.size(); ++i) {
      const double gi = g.data[i] + opts_.weight_decay * n->value.data[i];
      s.m.data[i] = opts_.beta1 * s.m.data[i] + (1.0 - opts_.beta1) * gi;
      s.v.data[i] = opts_.beta2 * s.v.data[i] + (1.0 - opts_.beta2) * gi * gi;
      const double mh = s.m.data[i] / b1t;
      const double vh = s.v.data[i] / b2t;
      n->value.data[i] -= opts_.lr * mh / (std::sqrt(vh) + opts_.eps);
    }
  }
}

// ---------------------------------------------------------------- checkpoints

namespace {

void put_u32(std::ostream& o, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) o.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::ostream& o, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) o.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_uint(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == EOF) throw ParseError("truncated checkpoint");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

void save_checkpoint(const ParamStore& params, const std::filesystem::path& bin,
                     const std::filesystem::path& manifest) {
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw DataError("cannot write " + bin.string());
  nlohmann::json man = {{"format", "lamp-checkpoint"}, {"version", 1}, {"params", nlohmann::json::array()}};
  std::uint64_t offset = 0;
  for (const auto& p : params.all()) {
    const Matrix& v = p.value();
    put_u32(out, static_cast<std::uint32_t>(p.name().size()));
    out.write(p.name().data(), static_cast<std::streamsize>(p.name().size()));
    put_u32(out, 2);
    put_u64(out, v.rows);
    put_u64(out, v.cols);
    for (double d : v.data) put_u64(out, std::bit_cast<std::uint64_t>(d));
    man["params"].push_back({{"name", p.name()}, {"shape", {v.rows, v.cols}}, {"offset", offset}});
    offset += 4 + p.name().size() + 4 + 16 + 8 * v.size();
  }
  man["bytes"] = offset;
  std::ofstream mo(manifest);
  if (!mo) throw DataError("cannot write " + manifest.string());
  mo << man.dump(2) << '\n';
}

void load_checkpoint(ParamStore& params, const std::filesystem::path& bin) {
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + bin.string());
  std::unordered_set<std::string> loaded;
  while (in.peek() != EOF) {
    const auto len = get_uint(in, 4);
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    if (get_uint(in, 4) != 2) throw ParseError("checkpoint record is not 2-D");
    const auto rows = get_uint(in, 8);
    const auto cols = get_uint(in, 8);
    Matrix v(rows, cols);
    for (double& d : v.data) d = std::bit_cast<double>(get_uint(in, 8));
    if (!params.contains(name)) throw DataError("checkpoint parameter '" + name + "' is unknown");
    Tensor& p = params.get(name);
    if (!p.value().same_shape(v)) throw ShapeError("checkpoint shape mismatch for " + name);
    p.mutable_value() = std::move(v);
    loaded.insert(name);
  }
  for (const auto& p : params.all())
    if (!loaded.count(p.name())) throw DataError("checkpoint lacks parameter '" + p.name() + "'");
}

}  // namespace lamp::ad
