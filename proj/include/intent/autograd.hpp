#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "intent/rng.hpp"
#include "intent/tensor.hpp"

namespace intent {

enum class Mode { kTrain, kEval };

namespace detail {
struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  bool needs_grad = false;  // requires_grad or downstream of something that does
  std::uint64_t seq = 0;
  std::vector<NodePtr> parents;
  // receives this node's grad, accumulates into parents
  std::function<void(const Tensor&)> backprop;

  void accumulate(const Tensor& g);
};
}  // namespace detail

/// Handle to a node in the define-by-run graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  static Var param(Tensor value) { return Var(std::move(value), true); }
  static Var constant(Tensor value) { return Var(std::move(value), false); }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }  // optimizer updates, no graph
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return defined() && !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }

  void zero_grad();
  /// Reverse pass from a scalar (numel-1) value.
  void backward() const;

  detail::NodePtr node() const { return node_; }
  explicit Var(detail::NodePtr n) : node_(std::move(n)) {}

 private:
  detail::NodePtr node_;
};

// elementwise
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, Scalar c);
Var relu(const Var& a);
// y = x * s with s a [1,1] var
Var scale_by(const Var& x, const Var& s);

// matrix ops; a [m,k]
Var matmul(const Var& a, const Var& b);     // b [k,n]
Var matmul_nt(const Var& a, const Var& b);  // b [n,k], result a*b^T
// x [n,in], w [out,in], b [out] -> [n,out]
Var linear(const Var& x, const Var& w, const Var& b);

// structure ops
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& x, std::int64_t c0, std::int64_t c1);
Var mean_rows(const Var& x);  // [n,d] -> [1,d]
Var sum_squares(const Var& x);                         // -> [1,1]
Var weighted_sum(const Var& x, const Tensor& weights); // -> [1,1]

// reductions / normalizations
Var softmax_rows(const Var& x);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, Scalar eps = 1e-5);

// nn ops
Var dropout(const Var& x, Scalar p, RandomStream& rng, Mode mode);
Var conv2d(const Var& x, const Var& w, const Var& b, std::int64_t stride, std::int64_t pad);
Var shift3d(const Var& x, const Var& offsets, std::int64_t temporal_groups);
Var global_avg_pool(const Var& x);  // [c,h,w] -> [1,c]

// loss; logit is [1,1]
Var bce_with_logits(const Var& logit, int label, Scalar pos_weight);

Scalar sigmoid(Scalar z);
Scalar softplus(Scalar z);

}  // namespace intent
