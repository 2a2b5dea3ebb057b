#pragma once

// Minimal reverse-mode tensor engine. Tensors are shared handles onto a node
// holding values and an optional gradient buffer; operations run eagerly and
// append a backward rule to the Graph they were given.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace rrtrack {

using Shape = std::vector<std::size_t>;

template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_size(const Shape& dims);
std::string shape_string(const Shape& dims);

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape dims, bool requires_grad = false);
  static Tensor filled(Shape dims, double value, bool requires_grad = false);
  static Tensor from(Shape dims, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& dims() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return dims().size(); }
  std::size_t size() const;

  std::span<double> data();
  std::span<const double> data() const;
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  // Gradient buffer; empty span until something accumulates into it.
  bool has_grad() const;
  std::span<double> grad();
  std::span<const double> grad() const;
  // Gradient storage belongs to the shared node, so this is callable on a
  // const handle.
  std::span<double> ensure_grad() const;
  void zero_grad();

  /// Deep copy of values (no gradient, same requires_grad flag).
  Tensor clone() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node {
    Shape dims;
    Buffer value;
    Buffer grad;
    bool requires_grad = false;
  };
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  Node& node() const;

  std::shared_ptr<Node> node_;
};

/// Tape of recorded operations. A graph constructed with record=false is an
/// inference context: operations compute values but nothing is retained.
class Graph {
 public:
  using BackwardFn = std::function<void()>;

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return ops_.size(); }

  /// True when an op with these inputs must be taped.
  bool wants_grad(std::initializer_list<const Tensor*> inputs) const;
  bool wants_grad(std::span<const Tensor> inputs) const;

  void record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and runs every backward rule once, newest
  /// first. Gradients accumulate into existing leaf buffers.
  void backward(Tensor loss);

 private:
  struct Op {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  bool record_;
  bool consumed_ = false;
  std::vector<Op> ops_;
};

}  // namespace rrtrack
