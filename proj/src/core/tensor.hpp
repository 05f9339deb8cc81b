#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace mc {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// One node of the recorded computation graph. Nodes hold 64-bit values in
// row-major order plus, when recorded under an enabled tape, the closure that
// pushes this node's gradient into its parents.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // sized lazily by ensure_grad()
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(const TensorImpl&)> backprop;
  uint64_t id = 0;  // creation order; parents always precede children

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

// Value-semantics handle onto a shared tensor node. Copies alias the same
// storage. Data is immutable once consumed by an op, with one exception:
// leaf parameters may be rewritten in place between steps by an optimizer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_vector(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int64_t ndim() const;
  int64_t size(int axis) const;  // negative axes count from the back
  int64_t numel() const;
  bool requires_grad() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();  // leaf parameter updates only
  std::span<const double> grad() const;
  bool has_grad() const;
  void zero_grad();

  double item() const;  // scalar tensors only
  double at(std::initializer_list<int64_t> index) const;

  // Reverse-mode accumulation from this scalar. Gradients accumulate into
  // every reachable requires_grad leaf; intermediate gradients are reset at
  // the start of each call, so backward may be invoked repeatedly on a live
  // graph and leaf gradients add up until zero_grad.
  void backward() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Thread-local recording switch. Inside a NoGradGuard ops produce value-only
// results: no parents, no backprop closures. One tape per thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Op-authoring helper: allocates the result node and wires parents plus the
// backprop closure iff recording is on and some parent requires grad.
Tensor make_op_result(Shape shape, std::vector<double> data,
                      std::vector<Tensor> parents,
                      std::function<void(const TensorImpl&)> backprop);

// Accumulate v into t.grad[i], allocating the buffer on first touch.
inline void accum_grad(TensorImpl& t, int64_t i, double v) {
  t.ensure_grad();
  t.grad[static_cast<size_t>(i)] += v;
}

}  // namespace mc
