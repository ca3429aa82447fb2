// Reverse-mode autodiff over dense row-major arrays. The graph is a dynamic
// DAG rebuilt on every forward pass: each op allocates a node holding its
// value, parent handles, and a closure that pulls the node's gradient into
// its parents. backward() traverses the recorded nodes once, in reverse
// topological order.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "scenediff/common.hpp"

namespace scenediff {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<real> value;
  std::vector<real> grad;  // sized on demand; persists across backward calls for leaves
  bool requires_grad = false;
  const char* kind = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  bool is_leaf() const { return parents.empty(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), real(0));
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, real fill, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<real> data, bool requires_grad = false);
  static Tensor scalar(real v, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, real stddev = 1, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t size() const { return static_cast<int64_t>(node_->value.size()); }
  int64_t rank() const { return static_cast<int64_t>(node_->shape.size()); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<real>& data() const { return node_->value; }
  std::vector<real>& mutable_data() { return node_->value; }
  const std::vector<real>& grad() const;
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad.assign(node_->value.size(), real(0)); }

  real item() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& handle() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

// When constructed, ops stop recording parents/backprop closures; forward
// values are still computed. Used for sampling and scoring passes.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// NaN/Inf guard on op inputs; throws NumericError when tripped. Off by default.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// --- operations ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, real c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a, const std::vector<int64_t>& perm);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_last_axis(const Tensor& a, const Tensor& b);
Tensor slice_last_axis(const Tensor& a, int64_t lo, int64_t hi);
Tensor softmax_last_axis(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, real eps = 1e-5);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor sum_all(const Tensor& a);
Tensor mse(const Tensor& pred, const Tensor& target);
Tensor abs_mean(const Tensor& a);
Tensor embedding_lookup(const Tensor& table, const std::vector<int64_t>& ids);
Tensor masked_fill(const Tensor& a, const Tensor& mask, real fill);

// Reverse-mode sweep from a scalar loss. Gradients accumulate into leaf
// tensors; interior nodes are reset per call, so calling twice on the same
// graph doubles every leaf gradient.
void backward(const Tensor& loss);

// Number of distinct nodes reachable from `root` (test/debug hook).
int64_t graph_node_count(const Tensor& root);

// --- optimizer --------------------------------------------------------------

struct AdamConfig {
  real lr = 1e-3;
  real beta1 = 0.9;
  real beta2 = 0.999;
  real eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<real>> m;
  std::vector<std::vector<real>> v;
  int64_t step = 0;
};

// Bias-corrected Adam update in place, reading each parameter's grad buffer.
void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg);

}  // namespace scenediff
