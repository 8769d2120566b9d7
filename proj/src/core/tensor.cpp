#include "rnmt/tensor.h"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rnmt {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : s_(std::make_shared<Storage>()) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
  for (auto d : shape)
    if (d == 0) throw std::invalid_argument("tensor dimensions must be positive: " + shape_str(shape));
  s_->value.assign(shape_size(shape), fill);
  s_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : s_(std::make_shared<Storage>()) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
  for (auto d : shape)
    if (d == 0) throw std::invalid_argument("tensor dimensions must be positive: " + shape_str(shape));
  if (shape_size(shape) != values.size())
    throw std::invalid_argument("tensor shape " + shape_str(shape) + " does not match " +
                                std::to_string(values.size()) + " values");
  s_->shape = std::move(shape);
  s_->value.assign(values.begin(), values.end());
}

std::size_t Tensor::rows() const {
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < s_->shape.size(); ++i) r *= s_->shape[i];
  return r;
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape()));
  return s_->value[0];
}

std::span<double> Tensor::grad() const {
  if (s_->grad.empty()) throw std::logic_error("tensor has no gradient");
  return s_->grad;
}

std::span<double> Tensor::ensure_grad() const {
  if (s_->grad.empty()) s_->grad.assign(s_->value.size(), 0.0);
  return s_->grad;
}

void Tensor::zero_grad() const {
  if (!s_->grad.empty()) std::fill(s_->grad.begin(), s_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.s_->grad = s_->grad;
  t.s_->requires_grad = s_->requires_grad;
  return t;
}

Tensor Tensor::detach() const {
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->shape = s_->shape;
  t.s_->value = s_->value;
  return t;
}

bool Tape::wants(std::initializer_list<const Tensor*> inputs) const {
  if (!recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

void Tape::record(std::string name, std::function<void()> adjoint) {
  names_.push_back(std::move(name));
  entries_.push_back(std::move(adjoint));
}

void Tape::backward(Tensor& loss) {
  if (loss.size() != 1)
    throw std::invalid_argument("backward() needs a scalar loss, got " + shape_str(loss.shape()));
  if (!loss.requires_grad()) throw std::invalid_argument("loss does not depend on any parameter");
  loss.ensure_grad()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  entries_.clear();
  names_.clear();
}

void propagate_requires_grad(Tensor& out, std::initializer_list<const Tensor*> inputs) {
  for (const Tensor* t : inputs)
    if (t->requires_grad()) {
      out.set_requires_grad();
      return;
    }
}

}  // namespace rnmt
