#include "grafenne/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace grafenne {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

std::shared_ptr<TensorNode> new_node(Shape shape, std::vector<double> values, bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return node;
}

// Builds an op result. History is kept only when recording is on and some
// input needs a gradient.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   std::function<void(TensorNode&)> backward_fn) {
  bool needs = false;
  if (GradMode::enabled()) {
    for (const auto& t : inputs) needs = needs || t.requires_grad();
  }
  auto node = new_node(std::move(shape), std::move(values), needs);
  if (needs) {
    node->parents.reserve(inputs.size());
    for (const auto& t : inputs) node->parents.push_back(t.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(node);
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw DimensionError(std::string(op) + ": undefined tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  require_defined(t, op);
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

bool wants_grad(const TensorNode& parent) { return parent.requires_grad; }

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::span<double> TensorNode::grad_buffer() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  return grad;
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("Tensor::from: " + std::to_string(values.size()) + " values for shape " +
                         shape_str(shape));
  }
  return Tensor(new_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from({n}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->values.size(); }
std::size_t Tensor::rows() const { return rank() == 0 ? 1 : shape()[0]; }
std::size_t Tensor::cols() const { return rank() == 2 ? shape()[1] : 1; }
std::span<const double> Tensor::values() const { return node_->values; }
std::span<double> Tensor::mutable_values() { return node_->values; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item(): tensor has " + std::to_string(numel()) + " elements");
  return node_->values[0];
}

std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->grad_buffer(); }
bool Tensor::has_grad() const { return node_->grad.size() == node_->values.size(); }

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool value) { node_->requires_grad = value; }
std::uint64_t Tensor::node_id() const { return node_ ? node_->id : 0; }

Tensor Tensor::detach() const { return Tensor(new_node(node_->shape, node_->values, false)); }

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool value) { g_grad_enabled = value; }

NoGradGuard::NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
NoGradGuard::~NoGradGuard() { GradMode::set_enabled(previous_); }

Parameter::Parameter(std::string name, Tensor value) : name_(std::move(name)), tensor_(std::move(value)) {
  tensor_.set_requires_grad(true);
}

Parameter Parameter::deep_copy() const {
  Tensor copy = tensor_.detach();
  return Parameter(name_, copy);
}

Segments::Segments(std::vector<std::size_t> segment_of, std::size_t count)
    : segment_of_(std::move(segment_of)), count_(count) {
  for (auto s : segment_of_) {
    if (s >= count_) throw DimensionError("Segments: segment id out of range");
  }
}

Segments Segments::from_groups(std::span<const std::vector<std::size_t>> groups, std::size_t n) {
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> of(n, kUnset);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto i : groups[g]) {
      if (i >= n || of[i] != kUnset) throw DimensionError("Segments: groups do not partition [0, n)");
      of[i] = g;
    }
  }
  if (std::find(of.begin(), of.end(), kUnset) != of.end()) {
    throw DimensionError("Segments: groups do not cover [0, n)");
  }
  return Segments(std::move(of), groups.size());
}

// ---------------------------------------------------------------------------
// ops

namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(a.values().data(), m, k) * ConstMap(b.values().data(), k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](TensorNode& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    ConstMap dc(self.grad.data(), m, n);
    if (wants_grad(pa)) {
      MutMap(pa.grad_buffer().data(), m, k).noalias() += dc * ConstMap(pb.values.data(), k, n).transpose();
    }
    if (wants_grad(pb)) {
      MutMap(pb.grad_buffer().data(), k, n).noalias() += ConstMap(pa.values.data(), m, k).transpose() * dc;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    for (auto& p : self.parents) {
      if (!wants_grad(*p)) continue;
      auto g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    if (wants_grad(*self.parents[0])) {
      auto g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(*self.parents[1])) {
      auto g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (wants_grad(pa)) {
      auto g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.values[i];
    }
    if (wants_grad(pb)) {
      auto g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.values[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  require_defined(a, "scale");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](TensorNode& self) {
    auto g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  require_defined(a, "scale_by");
  require_defined(s, "scale_by");
  if (s.numel() != 1) throw DimensionError("scale_by: factor must be a scalar, got " + shape_str(s.shape()));
  const double factor = s.item();
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * factor;
  return make_result(a.shape(), std::move(out), {a, s}, [](TensorNode& self) {
    auto& pa = *self.parents[0];
    auto& ps = *self.parents[1];
    if (wants_grad(pa)) {
      auto g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * ps.values[0];
    }
    if (wants_grad(ps)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * pa.values[i];
      ps.grad_buffer()[0] += acc;
    }
  });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  require_rank(a, 2, "add_bias");
  require_rank(bias, 1, "add_bias");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (bias.numel() != n) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " vs " + shape_str(a.shape()));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bias.at(c);
  return make_result(a.shape(), std::move(out), {a, bias}, [m, n](TensorNode& self) {
    if (wants_grad(*self.parents[0])) {
      auto g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(*self.parents[1])) {
      auto g = self.parents[1]->grad_buffer();
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) g[c] += self.grad[r * n + c];
    }
  });
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return make_result({}, {acc}, {a}, [](TensorNode& self) {
    auto g = self.parents[0]->grad_buffer();
    for (auto& x : g) x += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  if (a.numel() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined(a, "reshape");
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), {a}, [](TensorNode& self) {
    auto g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  std::vector<Tensor> kept;
  for (const auto& p : parts) {
    require_defined(p, "concat");
    if (p.numel() > 0) kept.push_back(p);
  }
  if (kept.empty()) {
    if (parts.empty()) throw DimensionError("concat: no inputs");
    return Tensor::zeros(parts.front().shape());
  }
  const std::size_t rank = kept.front().rank();
  if (rank == 0 || rank > 2 || axis >= rank) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " invalid for " +
                         shape_str(kept.front().shape()));
  }
  for (const auto& p : kept) {
    if (p.rank() != rank) throw DimensionError("concat: rank mismatch");
    for (std::size_t d = 0; d < rank; ++d) {
      if (d != axis && p.shape()[d] != kept.front().shape()[d]) {
        throw DimensionError("concat: non-concat dimension mismatch " + shape_str(p.shape()) + " vs " +
                             shape_str(kept.front().shape()));
      }
    }
  }
  if (kept.size() == 1) return kept.front();

  std::vector<std::size_t> widths;
  for (const auto& p : kept) widths.push_back(p.shape()[axis]);
  const std::size_t total = std::accumulate(widths.begin(), widths.end(), std::size_t{0});
  Shape shape = kept.front().shape();
  shape[axis] = total;
  std::vector<double> out;
  out.reserve(shape_numel(shape));

  if (axis == 0) {
    for (const auto& p : kept) out.insert(out.end(), p.values().begin(), p.values().end());
    return make_result(std::move(shape), std::move(out), kept, [](TensorNode& self) {
      std::size_t offset = 0;
      for (auto& p : self.parents) {
        const std::size_t n = p->values.size();
        if (wants_grad(*p)) {
          auto g = p->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
        }
        offset += n;
      }
    });
  }

  const std::size_t rows = shape[0];
  out.resize(rows * total);
  std::size_t col0 = 0;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const std::size_t w = widths[k];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) out[r * total + col0 + c] = kept[k].at(r * w + c);
    col0 += w;
  }
  return make_result(std::move(shape), std::move(out), kept, [widths, rows, total](TensorNode& self) {
    std::size_t c0 = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const std::size_t w = widths[k];
      auto& p = *self.parents[k];
      if (wants_grad(p)) {
        auto g = p.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < w; ++c) g[r * w + c] += self.grad[r * total + c0 + c];
      }
      c0 += w;
    }
  });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  require_defined(x, "leaky_relu");
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.at(i);
    out[i] = v >= 0.0 ? v : slope * v;
  }
  return make_result(x.shape(), std::move(out), {x}, [slope](TensorNode& self) {
    auto& p = *self.parents[0];
    auto g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (p.values[i] >= 0.0 ? 1.0 : slope);
  });
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

Tensor activate(const Tensor& x, Activation activation, double slope) {
  switch (activation) {
    case Activation::kIdentity: return x;
    case Activation::kRelu: return relu(x);
    case Activation::kLeakyRelu: return leaky_relu(x, slope);
  }
  return x;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  require_defined(x, "gather_rows");
  if (x.rank() == 0 || x.rank() > 2) throw DimensionError("gather_rows: rank-1 or rank-2 input required");
  const std::size_t n = x.rows(), w = x.cols();
  std::vector<double> out(index.size() * w);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n) throw DimensionError("gather_rows: index " + std::to_string(index[i]) + " out of range");
    std::copy_n(x.values().begin() + index[i] * w, w, out.begin() + i * w);
  }
  Shape shape = x.rank() == 2 ? Shape{index.size(), w} : Shape{index.size()};
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result(std::move(shape), std::move(out), {x}, [idx = std::move(idx), w](TensorNode& self) {
    auto g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < w; ++c) g[idx[i] * w + c] += self.grad[i * w + c];
  });
}

Tensor scatter_add_rows(const Tensor& x, std::span<const std::size_t> index, std::size_t rows) {
  require_defined(x, "scatter_add_rows");
  if (x.rank() == 0 || x.rank() > 2) throw DimensionError("scatter_add_rows: rank-1 or rank-2 input required");
  if (index.size() != x.rows()) throw DimensionError("scatter_add_rows: index length mismatch");
  const std::size_t w = x.cols();
  std::vector<double> out(rows * w, 0.0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) throw DimensionError("scatter_add_rows: index out of range");
    for (std::size_t c = 0; c < w; ++c) out[index[i] * w + c] += x.at(i * w + c);
  }
  Shape shape = x.rank() == 2 ? Shape{rows, w} : Shape{rows};
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result(std::move(shape), std::move(out), {x}, [idx = std::move(idx), w](TensorNode& self) {
    auto g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < w; ++c) g[i * w + c] += self.grad[idx[i] * w + c];
  });
}

Tensor edge_aggregate(const Tensor& values, const Tensor& weights, std::span<const std::size_t> src,
                      std::span<const std::size_t> dst, std::size_t rows) {
  require_rank(values, 2, "edge_aggregate");
  if (src.size() != dst.size()) throw DimensionError("edge_aggregate: src/dst length mismatch");
  const bool weighted = weights.defined();
  if (weighted && (weights.rank() != 1 || weights.numel() != src.size())) {
    throw DimensionError("edge_aggregate: weights " + shape_str(weights.shape()) + " for " +
                         std::to_string(src.size()) + " edges");
  }
  const std::size_t n_src = values.shape()[0], w = values.shape()[1];
  std::vector<double> out(rows * w, 0.0);
  const auto vals = values.values();
  for (std::size_t e = 0; e < src.size(); ++e) {
    if (src[e] >= n_src || dst[e] >= rows) throw DimensionError("edge_aggregate: endpoint out of range");
    const double a = weighted ? weights.at(e) : 1.0;
    const double* in = vals.data() + src[e] * w;
    double* o = out.data() + dst[e] * w;
    for (std::size_t c = 0; c < w; ++c) o[c] += a * in[c];
  }
  std::vector<Tensor> inputs{values};
  if (weighted) inputs.push_back(weights);
  std::vector<std::size_t> s(src.begin(), src.end()), d(dst.begin(), dst.end());
  return make_result({rows, w}, std::move(out), inputs,
                     [s = std::move(s), d = std::move(d), w, weighted](TensorNode& self) {
                       auto& pv = *self.parents[0];
                       TensorNode* pw = weighted ? self.parents[1].get() : nullptr;
                       if (wants_grad(pv)) {
                         auto g = pv.grad_buffer();
                         for (std::size_t e = 0; e < s.size(); ++e) {
                           const double a = pw ? pw->values[e] : 1.0;
                           const double* go = self.grad.data() + d[e] * w;
                           double* gi = g.data() + s[e] * w;
                           for (std::size_t c = 0; c < w; ++c) gi[c] += a * go[c];
                         }
                       }
                       if (pw && wants_grad(*pw)) {
                         auto g = pw->grad_buffer();
                         for (std::size_t e = 0; e < s.size(); ++e) {
                           const double* go = self.grad.data() + d[e] * w;
                           const double* in = pv.values.data() + s[e] * w;
                           double acc = 0.0;
                           for (std::size_t c = 0; c < w; ++c) acc += go[c] * in[c];
                           g[e] += acc;
                         }
                       }
                     });
}

Tensor segment_softmax(const Tensor& scores, const Segments& segments) {
  require_rank(scores, 1, "segment_softmax");
  if (segments.size() != scores.numel()) {
    throw DimensionError("segment_softmax: " + std::to_string(scores.numel()) + " scores for " +
                         std::to_string(segments.size()) + " segmented entries");
  }
  const auto seg = segments.segment_of();
  const std::size_t k = segments.count();
  std::vector<double> peak(k, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < seg.size(); ++i) peak[seg[i]] = std::max(peak[seg[i]], scores.at(i));
  std::vector<double> out(seg.size()), total(k, 0.0);
  for (std::size_t i = 0; i < seg.size(); ++i) {
    out[i] = std::exp(scores.at(i) - peak[seg[i]]);
    total[seg[i]] += out[i];
  }
  for (std::size_t i = 0; i < seg.size(); ++i) out[i] /= total[seg[i]];
  std::vector<std::size_t> of(seg.begin(), seg.end());
  return make_result(scores.shape(), std::move(out), {scores}, [of = std::move(of), k](TensorNode& self) {
    std::vector<double> inner(k, 0.0);
    for (std::size_t i = 0; i < of.size(); ++i) inner[of[i]] += self.values[i] * self.grad[i];
    auto g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < of.size(); ++i) g[i] += self.values[i] * (self.grad[i] - inner[of[i]]);
  });
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "row_dot");
  require_rank(a, 2, "row_dot");
  const std::size_t m = a.shape()[0], w = a.shape()[1];
  std::vector<double> out(m, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < w; ++c) out[r] += a.at(r * w + c) * b.at(r * w + c);
  return make_result({m}, std::move(out), {a, b}, [m, w](TensorNode& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (wants_grad(pa)) {
      auto g = pa.grad_buffer();
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < w; ++c) g[r * w + c] += self.grad[r] * pb.values[r * w + c];
    }
    if (wants_grad(pb)) {
      auto g = pb.grad_buffer();
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < w; ++c) g[r * w + c] += self.grad[r] * pa.values[r * w + c];
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels, Reduction reduction) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t n = logits.shape()[0], classes = logits.shape()[1];
  if (labels.size() != n) throw DimensionError("cross_entropy: label count mismatch");
  if (n == 0) throw DimensionError("cross_entropy: no rows");
  std::vector<double> probs(n * classes);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes) {
      throw DimensionError("cross_entropy: label " + std::to_string(labels[r]) + " outside [0," +
                           std::to_string(classes) + ")");
    }
    const double* row = logits.values().data() + r * classes;
    const double peak = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - peak);
    const double log_z = std::log(z) + peak;
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = std::exp(row[c] - log_z);
    loss += log_z - row[labels[r]];
  }
  const double factor = reduction == Reduction::kMean ? 1.0 / static_cast<double>(n) : 1.0;
  std::vector<int> lab(labels.begin(), labels.end());
  return make_result({}, {loss * factor}, {logits},
                     [probs = std::move(probs), lab = std::move(lab), classes, factor](TensorNode& self) {
                       auto g = self.parents[0]->grad_buffer();
                       const double up = self.grad[0] * factor;
                       for (std::size_t r = 0; r < lab.size(); ++r) {
                         for (std::size_t c = 0; c < classes; ++c) {
                           const double onehot = static_cast<int>(c) == lab[r] ? 1.0 : 0.0;
                           g[r * classes + c] += up * (probs[r * classes + c] - onehot);
                         }
                       }
                     });
}

Tensor bce_with_logits(const Tensor& scores, std::span<const double> targets, Reduction reduction) {
  require_rank(scores, 1, "bce_with_logits");
  const std::size_t n = scores.numel();
  if (targets.size() != n) throw DimensionError("bce_with_logits: target count mismatch");
  if (n == 0) throw DimensionError("bce_with_logits: no scores");
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = scores.at(i);
    loss += std::max(s, 0.0) - s * targets[i] + std::log1p(std::exp(-std::abs(s)));
  }
  const double factor = reduction == Reduction::kMean ? 1.0 / static_cast<double>(n) : 1.0;
  std::vector<double> tgt(targets.begin(), targets.end());
  return make_result({}, {loss * factor}, {scores}, [tgt = std::move(tgt), factor](TensorNode& self) {
    auto& p = *self.parents[0];
    auto g = p.grad_buffer();
    const double up = self.grad[0] * factor;
    for (std::size_t i = 0; i < tgt.size(); ++i) {
      const double s = p.values[i];
      const double sig = s >= 0.0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
      g[i] += up * (sig - tgt[i]);
    }
  });
}

}  // namespace ops

Tensor mlp(const Tensor& x, std::span<const DenseLayer> layers, Activation activation, double slope) {
  if (layers.empty()) throw DimensionError("mlp: no layers");
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (h.rank() != 2 || layer.weight.tensor().shape()[0] != h.cols()) {
      throw DimensionError("mlp: layer " + std::to_string(i) + " expects input width " +
                           std::to_string(layer.weight.tensor().shape()[0]) + ", got " + shape_str(h.shape()));
    }
    h = ops::matmul(h, layer.weight.tensor());
    if (layer.bias.tensor().defined()) h = ops::add_bias(h, layer.bias.tensor());
    if (i + 1 < layers.size()) h = ops::activate(h, activation, slope);
  }
  return h;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw DimensionError("backward: loss must be a scalar, got " +
                         (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;

  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<TensorNode*> stack{loss.node().get()};
  while (!stack.empty()) {
    TensorNode* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    order.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(), [](const TensorNode* a, const TensorNode* b) { return a->id > b->id; });
  for (TensorNode* n : order) {
    if (n->backward_fn) n->grad.assign(n->values.size(), 0.0);
  }
  loss.node()->grad_buffer()[0] += 1.0;
  for (TensorNode* n : order) {
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace grafenne
