#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "s2kd/common.hpp"

// Dense row-major arrays with reverse-mode automatic differentiation on a
// dynamic tape. Values are immutable once produced by an operation; gradients
// accumulate additively during backward. Float width is per-tensor (f32 for
// training, f64 for gradient checks) and all arithmetic dispatches on it at
// runtime.

namespace s2kd {

class Tape;

// Epsilons shared by the differentiable square-root and layer norm. Kept as
// named defaults so configs and tests can pin them.
inline constexpr double kSqrtEps = 1e-5;
inline constexpr double kLayerNormEps = 1e-5;

struct TensorImpl {
  Shape shape;
  Dtype dtype = Dtype::f32;
  std::vector<std::byte> data;
  bool requires_grad = false;
  std::vector<std::byte> grad;  // empty until backward first touches it
  Tape* producer = nullptr;     // tape that recorded this value, if any

  std::size_t numel() const { return s2kd::numel(shape); }

  template <typename T>
  T* data_as() {
    return reinterpret_cast<T*>(data.data());
  }
  template <typename T>
  const T* data_as() const {
    return reinterpret_cast<const T*>(data.data());
  }
  template <typename T>
  T* grad_as() {
    return reinterpret_cast<T*>(grad.data());
  }

  bool has_grad() const { return !grad.empty(); }
  void ensure_grad();  // allocates a zero-filled gradient buffer
};

// Cheap copyable handle; copies share the underlying array.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(const Shape& shape, Dtype dtype = default_dtype());
  static Tensor full(const Shape& shape, double value, Dtype dtype = default_dtype());
  static Tensor from_values(const Shape& shape, const std::vector<double>& values,
                            Dtype dtype = default_dtype());
  static Tensor scalar(double value, Dtype dtype = default_dtype());

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->numel(); }
  Dtype dtype() const { return impl_->dtype; }

  bool requires_grad() const { return impl_->requires_grad; }
  // Marks a leaf as trainable. Only meaningful before the tensor is used.
  Tensor& set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
  }

  // Element access as double regardless of storage width (test/data paths).
  double value_at(std::size_t i) const;
  void set_value_at(std::size_t i, double v);
  double scalar_value() const;  // numel() must be 1
  std::vector<double> to_values() const;

  bool has_grad() const { return impl_->has_grad(); }
  double grad_at(std::size_t i) const;
  std::vector<double> grad_to_values() const;
  void zero_grad() { impl_->grad.clear(); }

  // Independent copy of the values: no grad, no tape history.
  Tensor detached() const;
  Tensor astype(Dtype dtype) const;  // detached conversion

  const std::byte* raw() const { return impl_->data.data(); }
  std::byte* raw() { return impl_->data.data(); }
  std::size_t byte_size() const { return impl_->data.size(); }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Append-only record of operations; replaying the records in reverse
// propagates gradients from a scalar root to every reachable trainable leaf.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::shared_ptr<TensorImpl> out, std::function<void()> backward_fn);
  // Seeds grad(root) = 1 and accumulates gradients into every requires_grad
  // leaf reachable from root. Root must be a scalar produced on this tape.
  void backward(const Tensor& root);
  std::size_t size() const { return nodes_.size(); }

  static Tape* active();

 private:
  struct Node {
    std::shared_ptr<TensorImpl> out;
    std::function<void()> backward_fn;
  };
  std::vector<Node> nodes_;

  friend class TapeScope;
  friend class NoTapeScope;
};

// Makes a tape the recording target for the current thread while in scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
};

// Suspends recording (teacher forward during student training runs under
// this, which is what keeps the teacher out of the gradient graph).
class NoTapeScope {
 public:
  NoTapeScope();
  ~NoTapeScope();
  NoTapeScope(const NoTapeScope&) = delete;
};

bool tape_active();

// --- Differentiable operations -------------------------------------------
// Binary elementwise ops accept equal shapes or a scalar (1-element) operand.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor abs(const Tensor& a);  // subgradient 0 at the kink
Tensor square(const Tensor& a);
Tensor sqrt_eps(const Tensor& a, double eps = kSqrtEps);

Tensor matmul(const Tensor& a, const Tensor& b);  // rank-2 only
Tensor transpose(const Tensor& a);                // rank-2 only
Tensor reshape(const Tensor& a, const Shape& shape);

Tensor softmax(const Tensor& a, std::size_t axis);
// Normalizes over the last axis (length >= 2) with per-row mean/variance,
// then applies elementwise gain and bias (both rank-1 of that length).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = kLayerNormEps);

Tensor sum(const Tensor& a);   // scalar
Tensor mean(const Tensor& a);  // scalar

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1);  // [r0, r1)
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);  // [c0, c1)
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);

// out[i, j] = x[i, j] + bias[j]; bias is rank-1 of the column count.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// out.data[i] = a.data[src_index[i]] where src_index is a permutation of the
// element range; exact inverse in backward. Used for patch <-> frame layout.
Tensor permute_elements(const Tensor& a, const std::vector<std::size_t>& src_index,
                        const Shape& out_shape);

// Copies one slice along the leading axis (data path only; rejects inputs
// that require grad since no backward rule is registered).
Tensor slice_outer(const Tensor& a, std::size_t index);
// Same, but keeps `count` consecutive slices starting at `begin`.
Tensor slice_outer_range(const Tensor& a, std::size_t begin, std::size_t count);

// Fills a leaf in place with uniform draws from [lo, hi) (initialization).
void fill_uniform(Tensor& t, class Rng& rng, double lo, double hi);

namespace detail {
// Helpers for modules that define their own taped operations (e.g. the
// spectral transform): allocate an output and attach a backward rule.
Tensor make_output(const Shape& shape, Dtype dtype, bool inputs_require_grad);
void record_backward(const Tensor& out, std::function<void()> backward_fn);

template <typename F>
decltype(auto) dispatch(Dtype dtype, F&& f) {
  if (dtype == Dtype::f64) return f(double{});
  return f(float{});
}
}  // namespace detail

}  // namespace s2kd
