#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace dgwm {

using Shape = std::vector<int>;

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Distributes this node's grad into the parents' grad buffers.
  std::function<void(TensorNode&)> backprop;
};

}  // namespace detail

// Dense real tensor participating in a reverse-mode gradient graph.
//
// A Tensor is a cheap handle onto a graph node. Values are immutable after
// construction except through set_value (leaf tensors only, used by the
// optimizer and finite-difference probes); grad buffers are filled by
// backward(). The graph is a DAG held alive by parent links, so dropping the
// loss handle frees the whole episode while leaf parameters persist.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int dim(int i) const;
  std::size_t numel() const;

  const std::vector<double>& value() const;
  double item() const;  // numel()==1 only
  // Overwrites leaf values in place; shape must match.
  void set_value(std::span<const double> values);

  bool requires_grad() const;
  bool has_grad() const;
  const std::vector<double>& grad() const;  // throws if absent
  void zero_grad();
  // Copy of the values as a fresh leaf outside the gradient graph.
  Tensor detach() const;

  // Reverse-mode pass from a scalar; accumulates into grad buffers of every
  // requires_grad ancestor.
  void backward();

  detail::TensorNode* node() const { return node_.get(); }
  std::shared_ptr<detail::TensorNode> shared_node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node)
      : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;

  friend Tensor make_op(Shape shape, std::vector<double> value,
                        std::vector<Tensor> parents,
                        std::function<void(detail::TensorNode&)> backprop);
};

// Builds a graph node from precomputed forward values plus a backprop
// closure. The escape hatch for ops that live outside this header.
Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<Tensor> parents,
               std::function<void(detail::TensorNode&)> backprop);

// When enabled, every op (and leaf construction) verifies its outputs are
// finite and throws NumericError otherwise. Off by default; test mains switch
// it on. Kept out of the default path so timing runs measure the real cost.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// ---- graph ops ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);              // same shape
Tensor sub(const Tensor& a, const Tensor& b);              // same shape
Tensor mul(const Tensor& a, const Tensor& b);              // elementwise
Tensor scale(const Tensor& a, double factor);
Tensor add_rowvec(const Tensor& mat, const Tensor& vec);   // [m,n] + [n]
Tensor matmul(const Tensor& a, const Tensor& b);           // [m,k] x [k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);        // [m,k] x [n,k]^T
Tensor outer(const Tensor& u, const Tensor& v);            // [m] x [n] -> [m,n]
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);                           // range open (0,1)
Tensor softmax(const Tensor& v);                           // 1-D, stabilized
Tensor cross_entropy(const Tensor& logits, int target);    // 1-D -> scalar
Tensor entropy(const Tensor& logits);                      // H(softmax(z))
Tensor concat(const Tensor& a, const Tensor& b);           // 1-D
Tensor reshape(const Tensor& t, Shape new_shape);          // same element count
Tensor mean_rows(const Tensor& mat);                       // [m,n] -> [n]
Tensor pick_row(const Tensor& mat, int row);               // [m,n] -> [n]
Tensor sum(const Tensor& a);                               // -> scalar

// ---- value-space helpers (no graph) ---------------------------------------

// Stabilized softmax over a plain vector; entries clamped to the open (0,1).
std::vector<double> softmax_values(std::span<const double> logits);
// Logistic function clamped to the open (0,1); the sigmoid op applies this
// per element, so value-space callers get bitwise-identical results.
double sigmoid_value(double x);
// Lowest index wins ties.
int argmax(std::span<const double> v);

}  // namespace dgwm
