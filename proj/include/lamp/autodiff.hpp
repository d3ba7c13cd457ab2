#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lamp/matrix.hpp"
#include "lamp/rng.hpp"

namespace lamp::ad {

struct Node;

// Handle to a value in a recorded computation. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value, std::string name = "constant");
  // Leaf that accumulates gradients (unless frozen).
  static Tensor parameter(Matrix value, std::string name);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const;
  std::size_t cols() const;
  const Matrix& value() const;
  const Matrix& grad() const;
  // Parameters only: in-place update of the stored value (optimizer, tests).
  Matrix& mutable_value();
  double item() const;  // 1x1 only

  bool requires_grad() const;
  bool is_leaf() const;
  // Freezing a parameter stops it receiving gradients and stops propagation
  // into it; its value still participates as a constant.
  void set_frozen(bool frozen);
  bool frozen() const;
  const std::string& name() const;
  const std::string& op() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool leaf = true;
  bool frozen = false;
  std::string name;
  std::string op;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad, accumulates into inputs' grads.
  std::function<void(Node&)> backward;
};

// Operation nodes reachable from a root in topological order (inputs before
// outputs).
class Tape {
 public:
  explicit Tape(const Tensor& root);

  const std::vector<Node*>& order() const { return order_; }
  // Zeroes every accumulator on the tape, seeds d(root)=1 and runs the
  // vector-Jacobian rules once each in reverse order.
  void backward();

 private:
  Tensor root_;
  std::vector<Node*> order_;
};

// Throws ShapeError when `loss` is not 1x1.
void backward(const Tensor& loss);

Tensor detach(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// Elementwise with 2-D broadcasting (each dim equal or 1).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double s);
// axis 0 stacks rows, axis 1 stacks columns.
Tensor concat(const std::vector<Tensor>& parts, int axis = 1);
Tensor gather_rows(const Tensor& a, std::span<const int> index);
// out[index[i]] += a[i]; out has `rows` rows.
Tensor scatter_sum(const Tensor& a, std::span<const int> index, std::size_t rows);
// Softmax of each column over contiguous runs of equal, nondecreasing
// segment ids.
Tensor segment_softmax(const Tensor& scores, std::span<const int> segment_ids);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor elu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log_sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
// Inverted dropout; identity when !train or rate == 0.
Tensor dropout(const Tensor& a, double rate, Rng& rng, bool train);
Tensor l2_normalize_rows(const Tensor& a, double eps = 1e-12);
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor row_sum(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// Glorot/Xavier uniform: U(-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))).
Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

// Ordered, named collection of parameter tensors.
class ParamStore {
 public:
  Tensor& add(std::string name, Matrix value);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<Tensor>& all() { return params_; }
  const std::vector<Tensor>& all() const { return params_; }
  std::vector<Tensor> with_prefix(const std::string& prefix) const;
  std::size_t size() const { return params_.size(); }

  // Deep copy of the stored values (new leaf nodes).
  ParamStore clone() const;
  void copy_values_from(const ParamStore& other);

 private:
  std::vector<Tensor> params_;
};

struct AdamOptions {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}
  // Updates every non-frozen parameter from its current grad.
  void step(std::span<Tensor> params);
  const AdamOptions& options() const { return opts_; }

 private:
  struct Slot {
    Matrix m, v;
    long t = 0;
  };
  AdamOptions opts_;
  std::vector<std::pair<Node*, Slot>> slots_;
  Slot& slot_for(Node* n, const Matrix& shape);
};

// Binary checkpoint: records of (u32 name length, name, u32 ndim=2, u64 rows,
// u64 cols, f64 little-endian values) plus a JSON manifest next to it.
void save_checkpoint(const ParamStore& params, const std::filesystem::path& bin,
                     const std::filesystem::path& manifest);
// Overwrites values of same-named parameters; throws on shape mismatch or
// missing names.
void load_checkpoint(ParamStore& params, const std::filesystem::path& bin);

}  // namespace lamp::ad
