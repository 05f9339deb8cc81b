#include "core/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

namespace mc {

namespace {
std::atomic<uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;
}  // namespace

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    MC_CHECK_SHAPE(d >= 0, "negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

static std::shared_ptr<TensorImpl> new_impl(Shape shape, std::vector<double> data,
                                            bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return impl;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(new_impl(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(new_impl(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values, bool requires_grad) {
  MC_CHECK_SHAPE(shape_numel(shape) == static_cast<int64_t>(values.size()),
                 "from_vector: " + std::to_string(values.size()) +
                     " values do not fill shape " + shape_str(shape));
  return Tensor(new_impl(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_vector({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  MC_CHECK(defined(), "shape() on undefined tensor");
  return impl_->shape;
}

int64_t Tensor::ndim() const { return static_cast<int64_t>(shape().size()); }

int64_t Tensor::size(int axis) const {
  const auto& s = shape();
  int n = static_cast<int>(s.size());
  if (axis < 0) axis += n;
  MC_CHECK_SHAPE(axis >= 0 && axis < n, "size: axis out of range");
  return s[axis];
}

int64_t Tensor::numel() const {
  MC_CHECK(defined(), "numel() on undefined tensor");
  return impl_->numel();
}

bool Tensor::requires_grad() const { return defined() && impl_->requires_grad; }

std::span<const double> Tensor::data() const {
  MC_CHECK(defined(), "data() on undefined tensor");
  return {impl_->data.data(), impl_->data.size()};
}

std::span<double> Tensor::mutable_data() {
  MC_CHECK(defined(), "mutable_data() on undefined tensor");
  return {impl_->data.data(), impl_->data.size()};
}

std::span<const double> Tensor::grad() const {
  MC_CHECK(has_grad(), "grad() requested but no gradient has been accumulated");
  return {impl_->grad.data(), impl_->grad.size()};
}

bool Tensor::has_grad() const {
  return defined() && impl_->grad.size() == impl_->data.size();
}

void Tensor::zero_grad() {
  if (defined()) impl_->grad.clear();
}

double Tensor::item() const {
  MC_CHECK(defined() && numel() == 1, "item() requires a single-element tensor");
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> index) const {
  const auto& s = shape();
  MC_CHECK_SHAPE(index.size() == s.size(), "at: rank mismatch");
  int64_t flat = 0;
  size_t d = 0;
  for (int64_t i : index) {
    MC_CHECK_SHAPE(i >= 0 && i < s[d], "at: index out of range");
    flat = flat * s[d] + i;
    ++d;
  }
  return impl_->data[static_cast<size_t>(flat)];
}

void Tensor::backward() const {
  MC_CHECK(defined(), "backward() on undefined tensor");
  MC_CHECK(numel() == 1, "backward: loss must be a scalar tensor, got shape " +
                             shape_str(impl_->shape));

  // Collect the reachable recorded subgraph.
  std::vector<TensorImpl*> nodes;
  std::unordered_set<TensorImpl*> seen;
  std::vector<TensorImpl*> stack{impl_.get()};
  seen.insert(impl_.get());
  while (!stack.empty()) {
    TensorImpl* node = stack.back();
    stack.pop_back();
    nodes.push_back(node);
    for (const auto& p : node->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }

  // Creation ids give a valid reverse topological order: every parent was
  // created before its children.
  std::sort(nodes.begin(), nodes.end(),
            [](const TensorImpl* a, const TensorImpl* b) { return a->id > b->id; });

  // Interior gradients are scratch space for this call; leaf gradients
  // (nodes without a backprop closure) persist and accumulate.
  for (TensorImpl* node : nodes) {
    if (node->backprop) node->grad.assign(node->data.size(), 0.0);
  }
  impl_->ensure_grad();
  impl_->grad[0] += 1.0;

  for (TensorImpl* node : nodes) {
    if (node->backprop) node->backprop(*node);
  }
}

Tensor make_op_result(Shape shape, std::vector<double> data,
                      std::vector<Tensor> parents,
                      std::function<void(const TensorImpl&)> backprop) {
  MC_CHECK_SHAPE(shape_numel(shape) == static_cast<int64_t>(data.size()),
                 "op result data does not fill its shape");
  bool track = false;
  if (grad_enabled()) {
    for (const auto& p : parents) track = track || p.requires_grad();
  }
  auto impl = new_impl(std::move(shape), std::move(data), track);
  if (track) {
    impl->parents.reserve(parents.size());
    for (auto& p : parents) impl->parents.push_back(p.impl());
    impl->backprop = std::move(backprop);
  }
  return Tensor(impl);
}

}  // namespace mc
