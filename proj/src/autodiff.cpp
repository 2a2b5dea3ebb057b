#include "rrtrack/autodiff.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "rrtrack/errors.hpp"

namespace rrtrack {

std::size_t shape_size(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ',';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape dims, bool requires_grad) { return filled(std::move(dims), 0.0, requires_grad); }

Tensor Tensor::filled(Shape dims, double value, bool requires_grad) {
  for (auto d : dims) {
    if (d == 0) throw ShapeError("tensor dims must be positive: " + shape_string(dims));
  }
  auto node = std::make_shared<Node>();
  node->value.assign(shape_size(dims), value);
  node->dims = std::move(dims);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape dims, std::vector<double> values, bool requires_grad) {
  for (auto d : dims) {
    if (d == 0) throw ShapeError("tensor dims must be positive: " + shape_string(dims));
  }
  if (shape_size(dims) != values.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match dims " +
                     shape_string(dims));
  }
  auto node = std::make_shared<Node>();
  node->dims = std::move(dims);
  node->value.assign(values.begin(), values.end());
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return filled({1}, value, requires_grad); }

Tensor::Node& Tensor::node() const {
  if (!node_) throw UsageError("access to an undefined tensor");
  return *node_;
}

const Shape& Tensor::dims() const { return node().dims; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& d = dims();
  if (axis >= d.size()) throw ShapeError("axis out of range for " + shape_string(d));
  return d[axis];
}

std::size_t Tensor::size() const { return node().value.size(); }

std::span<double> Tensor::data() { return node().value; }
std::span<const double> Tensor::data() const { return node().value; }

double Tensor::item() const {
  if (size() != 1) throw UsageError("item() on tensor with dims " + shape_string(dims()));
  return node().value[0];
}

bool Tensor::requires_grad() const { return node().requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  node().requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return !node().grad.empty(); }
std::span<double> Tensor::grad() { return node().grad; }
std::span<const double> Tensor::grad() const { return node().grad; }

std::span<double> Tensor::ensure_grad() const {
  auto& n = node();
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tensor::zero_grad() {
  auto& n = node();
  std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  const auto& n = node();
  return from(n.dims, std::vector<double>(n.value.begin(), n.value.end()), n.requires_grad);
}

bool Graph::wants_grad(std::initializer_list<const Tensor*> inputs) const {
  if (!record_) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

bool Graph::wants_grad(std::span<const Tensor> inputs) const {
  if (!record_) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

void Graph::record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward) {
  if (!record_) return;
  if (consumed_) throw UsageError("graph already ran backward; build a new graph");
  output.set_requires_grad(true);
  ops_.push_back(Op{std::move(inputs), std::move(output), std::move(backward)});
}

void Graph::backward(Tensor loss) {
  if (!record_) throw UsageError("backward on a non-recording graph");
  if (consumed_) throw UsageError("backward called twice on the same graph");
  if (loss.size() != 1) throw UsageError("backward requires a scalar loss, got " + shape_string(loss.dims()));
  consumed_ = true;
  auto g = loss.ensure_grad();
  g[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    if (it->output.has_grad()) it->backward();
  }
  // Release intermediate buffers held by closures.
  ops_.clear();
}

}  // namespace rrtrack
