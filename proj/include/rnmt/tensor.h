#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace rnmt {

using Shape = std::vector<std::size_t>;

// 64-byte aligned storage, so vectorised kernels see the same alignment (and
// hence the same summation order) in every process.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Handle to a shared dense buffer of doubles in row-major order. Copies of a
// Tensor alias the same storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{1}, {v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor(Shape{rows, cols}, std::move(values));
  }

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t size() const { return s_->value.size(); }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t dim(std::size_t i) const { return s_->shape.at(i); }
  // 2-D view helpers: rows() is product of leading dims, cols() the last.
  std::size_t rows() const;
  std::size_t cols() const { return s_->shape.back(); }

  std::span<double> data() { return s_->value; }
  std::span<const double> data() const { return s_->value; }
  double& operator[](std::size_t i) { return s_->value[i]; }
  double operator[](std::size_t i) const { return s_->value[i]; }
  double at(std::size_t r, std::size_t c) const { return s_->value[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return s_ && s_->requires_grad; }
  Tensor& set_requires_grad(bool on = true) {
    s_->requires_grad = on;
    return *this;
  }
  bool has_grad() const { return !s_->grad.empty(); }
  // Gradients belong to the shared storage, so they stay writable through
  // const handles (adjoint closures capture const copies).
  std::span<double> grad() const;
  // Allocates a zero gradient buffer when absent.
  std::span<double> ensure_grad() const;
  void zero_grad() const;

  Tensor clone() const;
  // Same values, no gradient tracking.
  Tensor detach() const;
  bool same_storage(const Tensor& other) const { return s_ == other.s_; }

 private:
  struct Storage {
    Shape shape;
    Buffer value;
    Buffer grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

// Ordered record of executed operations. Each entry is the adjoint of one
// forward operation; backward() replays them in reverse exactly once.
class Tape {
 public:
  enum class Mode { kRecord, kInference };

  explicit Tape(Mode mode = Mode::kRecord) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return mode_ == Mode::kRecord; }
  std::size_t size() const { return entries_.size(); }

  // Records an adjoint only when recording and at least one input needs grad.
  bool wants(std::initializer_list<const Tensor*> inputs) const;
  void record(std::string name, std::function<void()> adjoint);

  // Seeds d loss = 1 and replays the tape in reverse. loss must be a scalar
  // produced on this tape. The tape is consumed.
  void backward(Tensor& loss);

  const std::vector<std::string>& op_names() const { return names_; }

 private:
  Mode mode_;
  std::vector<std::function<void()>> entries_;
  std::vector<std::string> names_;
};

// Marks an output as differentiable when any input is.
void propagate_requires_grad(Tensor& out, std::initializer_list<const Tensor*> inputs);

}  // namespace rnmt
