#pragma once

// Dense float64 tensors with define-by-run reverse-mode differentiation.
//
// Every op records its parents and a local backward closure on the result
// node. Node ids grow monotonically with creation, so sorting the nodes
// reachable from a loss by descending id is a valid reverse topological
// order; backward() visits each node exactly once in that order.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "grafenne/errors.hpp"

namespace grafenne {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

struct TensorNode;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  // Leading dimension; 1 for scalars.
  std::size_t rows() const;
  // Trailing dimension for rank 2; 1 otherwise.
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }

  // Gradient buffer; empty span when backward never reached this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  bool has_grad() const;
  void zero_grad();

  bool requires_grad() const;
  void set_requires_grad(bool value);
  std::uint64_t node_id() const;

  // Fresh leaf with copied values and no history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  const std::shared_ptr<TensorNode>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<TensorNode> node_;
};

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(TensorNode&)> backward_fn;

  std::span<double> grad_buffer();
};

// Gradient recording switch. Disabled inside evaluation passes so no tape
// is retained.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool value);
};

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  const std::string& name() const { return name_; }
  const Tensor& tensor() const { return tensor_; }
  Tensor& tensor() { return tensor_; }
  std::uint64_t id() const { return tensor_.node_id(); }
  std::size_t numel() const { return tensor_.numel(); }

  // Independent copy carrying the same name and values.
  Parameter deep_copy() const;

 private:
  std::string name_;
  Tensor tensor_;
};

// Partition of [0, n) into groups. Stored as a per-element group id.
class Segments {
 public:
  Segments() = default;
  Segments(std::vector<std::size_t> segment_of, std::size_t count);
  static Segments from_groups(std::span<const std::vector<std::size_t>> groups, std::size_t n);

  std::size_t size() const { return segment_of_.size(); }
  std::size_t count() const { return count_; }
  std::span<const std::size_t> segment_of() const { return segment_of_; }

 private:
  std::vector<std::size_t> segment_of_;
  std::size_t count_ = 0;
};

enum class Reduction { kMean, kSum };
enum class Activation { kIdentity, kRelu, kLeakyRelu };

namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// a * s for a scalar tensor s; differentiable in both.
Tensor scale_by(const Tensor& a, const Tensor& s);
// a[m x n] + bias[n] broadcast over rows.
Tensor add_bias(const Tensor& a, const Tensor& bias);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& a, Shape shape);

// Concatenation along axis 0 (rows / vector entries) or axis 1 (columns).
Tensor concat(std::span<const Tensor> parts, std::size_t axis);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor relu(const Tensor& x);

// Row selection; for rank-1 inputs selects entries.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);
// out[index[i]] += x[i]; out has `rows` leading entries.
Tensor scatter_add_rows(const Tensor& x, std::span<const std::size_t> index, std::size_t rows);

// out[dst[e]] += weight[e] * values[src[e]] for each edge e, in edge order.
// `weights` may be undefined, meaning all ones. Differentiable in values and
// weights.
Tensor edge_aggregate(const Tensor& values, const Tensor& weights, std::span<const std::size_t> src,
                      std::span<const std::size_t> dst, std::size_t rows);

// Softmax of a rank-1 score vector within each segment. Stabilised by the
// segment maximum.
Tensor segment_softmax(const Tensor& scores, const Segments& segments);

// Row-wise inner product of two [m x d] tensors -> [m].
Tensor row_dot(const Tensor& a, const Tensor& b);

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels,
                     Reduction reduction = Reduction::kMean);
Tensor bce_with_logits(const Tensor& scores, std::span<const double> targets,
                       Reduction reduction = Reduction::kMean);

Tensor activate(const Tensor& x, Activation activation, double slope = 0.2);

}  // namespace ops

// Affine layer: x * weight + bias with weight [in x out].
struct DenseLayer {
  Parameter weight;
  Parameter bias;
};

// Affine -> activation for every layer but the last, affine output.
Tensor mlp(const Tensor& x, std::span<const DenseLayer> layers, Activation activation,
           double slope = 0.2);

// Reverse sweep from a scalar loss. Intermediate grads are reset first;
// leaf grads accumulate.
void backward(const Tensor& loss);

}  // namespace grafenne
