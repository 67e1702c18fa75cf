#include "s2kd/tensor.hpp"

#include <cmath>
#include <cstring>
#include <utility>

#include "s2kd/kernels/kernels.hpp"
#include "s2kd/rng.hpp"

namespace s2kd {

using detail::dispatch;

namespace {

thread_local std::vector<Tape*> g_tape_stack;

bool shapes_equal(const Shape& a, const Shape& b) { return a == b; }

void check_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype())
    throw ContractError(std::string(op) + ": operand dtypes differ (" + dtype_name(a.dtype()) +
                        " vs " + dtype_name(b.dtype()) + ")");
}

std::shared_ptr<TensorImpl> make_impl(const Shape& shape, Dtype dtype) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->dtype = dtype;
  impl->data.assign(numel(shape) * dtype_size(dtype), std::byte{0});
  return impl;
}

}  // namespace

void TensorImpl::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), std::byte{0});
}

// --- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(const Shape& shape, Dtype dtype) { return Tensor(make_impl(shape, dtype)); }

Tensor Tensor::full(const Shape& shape, double value, Dtype dtype) {
  Tensor t(make_impl(shape, dtype));
  dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    T* p = t.impl()->data_as<T>();
    const T v = static_cast<T>(value);
    for (std::size_t i = 0; i < t.numel(); ++i) p[i] = v;
  });
  return t;
}

Tensor Tensor::from_values(const Shape& shape, const std::vector<double>& values, Dtype dtype) {
  if (values.size() != s2kd::numel(shape))
    throw DimensionError("from_values: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(shape));
  Tensor t(make_impl(shape, dtype));
  dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    T* p = t.impl()->data_as<T>();
    for (std::size_t i = 0; i < values.size(); ++i) p[i] = static_cast<T>(values[i]);
  });
  return t;
}

Tensor Tensor::scalar(double value, Dtype dtype) { return full({1}, value, dtype); }

double Tensor::value_at(std::size_t i) const {
  if (i >= numel()) throw ContractError("value_at: index out of range");
  return dispatch(dtype(), [&](auto tag) {
    using T = decltype(tag);
    return static_cast<double>(impl_->data_as<T>()[i]);
  });
}

void Tensor::set_value_at(std::size_t i, double v) {
  if (i >= numel()) throw ContractError("set_value_at: index out of range");
  dispatch(dtype(), [&](auto tag) {
    using T = decltype(tag);
    impl_->data_as<T>()[i] = static_cast<T>(v);
  });
}

double Tensor::scalar_value() const {
  if (numel() != 1)
    throw ContractError("scalar_value: tensor has shape " + shape_str(shape()));
  return value_at(0);
}

std::vector<double> Tensor::to_values() const {
  std::vector<double> out(numel());
  dispatch(dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* p = impl_->data_as<T>();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(p[i]);
  });
  return out;
}

double Tensor::grad_at(std::size_t i) const {
  if (!has_grad()) throw ContractError("grad_at: no gradient present");
  if (i >= numel()) throw ContractError("grad_at: index out of range");
  return dispatch(dtype(), [&](auto tag) {
    using T = decltype(tag);
    return static_cast<double>(reinterpret_cast<const T*>(impl_->grad.data())[i]);
  });
}

std::vector<double> Tensor::grad_to_values() const {
  std::vector<double> out(numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = grad_at(i);
  return out;
}

Tensor Tensor::detached() const {
  auto impl = make_impl(shape(), dtype());
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor Tensor::astype(Dtype target) const {
  if (target == dtype()) return detached();
  Tensor out(make_impl(shape(), target));
  const std::vector<double> vals = to_values();
  dispatch(target, [&](auto tag) {
    using T = decltype(tag);
    T* p = out.impl()->data_as<T>();
    for (std::size_t i = 0; i < vals.size(); ++i) p[i] = static_cast<T>(vals[i]);
  });
  return out;
}

// --- Tape ------------------------------------------------------------------

Tape* Tape::active() { return g_tape_stack.empty() ? nullptr : g_tape_stack.back(); }

bool tape_active() { return Tape::active() != nullptr; }

void Tape::record(std::shared_ptr<TensorImpl> out, std::function<void()> backward_fn) {
  nodes_.push_back(Node{std::move(out), std::move(backward_fn)});
}

void Tape::backward(const Tensor& root) {
  if (root.numel() != 1)
    throw ContractError("backward: root must be a scalar, got shape " + shape_str(root.shape()));
  if (root.impl()->producer != this)
    throw ContractError("backward: root was not produced on this tape");
  root.impl()->ensure_grad();
  dispatch(root.dtype(), [&](auto tag) {
    using T = decltype(tag);
    root.impl()->grad_as<T>()[0] += T(1);
  });
  // Records are in topological order, so one reverse sweep suffices; nodes
  // whose output never received a gradient are unreachable from the root.
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if (it->out->has_grad()) it->backward_fn();
}

TapeScope::TapeScope(Tape& tape) { g_tape_stack.push_back(&tape); }
TapeScope::~TapeScope() { g_tape_stack.pop_back(); }
NoTapeScope::NoTapeScope() { g_tape_stack.push_back(nullptr); }
NoTapeScope::~NoTapeScope() { g_tape_stack.pop_back(); }

namespace detail {

Tensor make_output(const Shape& shape, Dtype dtype, bool inputs_require_grad) {
  Tensor out(make_impl(shape, dtype));
  out.impl()->requires_grad = inputs_require_grad && tape_active();
  return out;
}

void record_backward(const Tensor& out, std::function<void()> backward_fn) {
  Tape* tape = Tape::active();
  if (tape == nullptr || !out.requires_grad()) return;
  out.impl()->producer = tape;
  tape->record(out.impl(), std::move(backward_fn));
}

}  // namespace detail

// --- Elementwise -------------------------------------------------------------

namespace {

enum class BinKind { Add, Sub, Mul };

const char* bin_name(BinKind k) {
  switch (k) {
    case BinKind::Add: return "add";
    case BinKind::Sub: return "sub";
    default: return "mul";
  }
}

Tensor binary_elementwise(BinKind kind, const Tensor& a, const Tensor& b) {
  check_same_dtype(a, b, bin_name(kind));
  const bool a_scalar = a.numel() == 1;
  const bool b_scalar = b.numel() == 1;
  if (!shapes_equal(a.shape(), b.shape()) && !a_scalar && !b_scalar)
    throw DimensionError(std::string(bin_name(kind)) + ": incompatible shapes " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const Shape& out_shape = (a_scalar && !b_scalar) ? b.shape() : a.shape();

  Tensor out = detail::make_output(out_shape, a.dtype(), a.requires_grad() || b.requires_grad());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pa = a.impl()->data_as<T>();
    const T* pb = b.impl()->data_as<T>();
    T* po = out.impl()->data_as<T>();
    const std::size_t n = out.numel();
    if (a.numel() == n && b.numel() == n) {
      switch (kind) {
        case BinKind::Add: kernels::add(po, pa, pb, n); break;
        case BinKind::Sub: kernels::sub(po, pa, pb, n); break;
        case BinKind::Mul: kernels::mul(po, pa, pb, n); break;
      }
    } else if (b_scalar) {
      const T s = pb[0];
      switch (kind) {
        case BinKind::Add: for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + s; break;
        case BinKind::Sub: for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] - s; break;
        case BinKind::Mul: kernels::scale(po, pa, s, n); break;
      }
    } else {
      const T s = pa[0];
      switch (kind) {
        case BinKind::Add: for (std::size_t i = 0; i < n; ++i) po[i] = s + pb[i]; break;
        case BinKind::Sub: for (std::size_t i = 0; i < n; ++i) po[i] = s - pb[i]; break;
        case BinKind::Mul: kernels::scale(po, pb, s, n); break;
      }
    }
  });

  detail::record_backward(out, [kind, ai = a.impl(), bi = b.impl(), oi = out.impl()]() {
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      const T* g = oi->grad_as<T>();
      const std::size_t n = oi->numel();
      if (ai->requires_grad) {
        ai->ensure_grad();
        T* ga = ai->grad_as<T>();
        if (ai->numel() == n) {
          switch (kind) {
            case BinKind::Add: kernels::axpy(ga, T(1), g, n); break;
            case BinKind::Sub: kernels::axpy(ga, T(1), g, n); break;
            case BinKind::Mul: {
              const T* pb = bi->data_as<T>();
              if (bi->numel() == n)
                for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * pb[i];
              else
                kernels::axpy(ga, pb[0], g, n);
              break;
            }
          }
        } else {  // scalar a gathers the reduced gradient
          switch (kind) {
            case BinKind::Add: ga[0] += kernels::sum(g, n); break;
            case BinKind::Sub: ga[0] += kernels::sum(g, n); break;
            case BinKind::Mul: ga[0] += kernels::dot(g, bi->data_as<T>(), n); break;
          }
        }
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        T* gb = bi->grad_as<T>();
        if (bi->numel() == n) {
          switch (kind) {
            case BinKind::Add: kernels::axpy(gb, T(1), g, n); break;
            case BinKind::Sub: kernels::axpy(gb, T(-1), g, n); break;
            case BinKind::Mul: {
              const T* pa = ai->data_as<T>();
              if (ai->numel() == n)
                for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * pa[i];
              else
                kernels::axpy(gb, pa[0], g, n);
              break;
            }
          }
        } else {
          switch (kind) {
            case BinKind::Add: gb[0] += kernels::sum(g, n); break;
            case BinKind::Sub: gb[0] -= kernels::sum(g, n); break;
            case BinKind::Mul: gb[0] += kernels::dot(g, ai->data_as<T>(), n); break;
          }
        }
      }
    });
  });
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_elementwise(BinKind::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_elementwise(BinKind::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_elementwise(BinKind::Mul, a, b); }

Tensor scale(const Tensor& a, double s) {
  Tensor out = detail::make_output(a.shape(), a.dtype(), a.requires_grad());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    kernels::scale(out.impl()->data_as<T>(), a.impl()->data_as<T>(), static_cast<T>(s),
                   a.numel());
  });
  detail::record_backward(out, [s, ai = a.impl(), oi = out.impl()]() {
    if (!ai->requires_grad) return;
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      ai->ensure_grad();
      kernels::axpy(ai->grad_as<T>(), static_cast<T>(s), oi->grad_as<T>(), oi->numel());
    });
  });
  return out;
}

Tensor abs(const Tensor& a) {
  Tensor out = detail::make_output(a.shape(), a.dtype(), a.requires_grad());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    kernels::vabs(out.impl()->data_as<T>(), a.impl()->data_as<T>(), a.numel());
  });
  detail::record_backward(out, [ai = a.impl(), oi = out.impl()]() {
    if (!ai->requires_grad) return;
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      ai->ensure_grad();
      const T* g = oi->grad_as<T>();
      const T* x = ai->data_as<T>();
      T* ga = ai->grad_as<T>();
      for (std::size_t i = 0; i < oi->numel(); ++i)
        ga[i] += x[i] > T(0) ? g[i] : (x[i] < T(0) ? -g[i] : T(0));
    });
  });
  return out;
}

Tensor square(const Tensor& a) {
  Tensor out = detail::make_output(a.shape(), a.dtype(), a.requires_grad());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* x = a.impl()->data_as<T>();
    kernels::mul(out.impl()->data_as<T>(), x, x, a.numel());
  });
  detail::record_backward(out, [ai = a.impl(), oi = out.impl()]() {
    if (!ai->requires_grad) return;
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      ai->ensure_grad();
      const T* g = oi->grad_as<T>();
      const T* x = ai->data_as<T>();
      T* ga = ai->grad_as<T>();
      for (std::size_t i = 0; i < oi->numel(); ++i) ga[i] += T(2) * x[i] * g[i];
    });
  });
  return out;
}

Tensor sqrt_eps(const Tensor& a, double eps) {
  Tensor out = detail::make_output(a.shape(), a.dtype(), a.requires_grad());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    kernels::sqrt_eps(out.impl()->data_as<T>(), a.impl()->data_as<T>(), static_cast<T>(eps),
                      a.numel());
  });
  detail::record_backward(out, [ai = a.impl(), oi = out.impl()]() {
    if (!ai->requires_grad) return;
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      ai->ensure_grad();
      const T* g = oi->grad_as<T>();
      const T* y = oi->data_as<T>();
      T* ga = ai->grad_as<T>();
      for (std::size_t i = 0; i < oi->numel(); ++i) ga[i] += g[i] * T(0.5) / y[i];
    });
  });
  return out;
}

// --- Linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_same_dtype(a, b, "matmul");
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul: expected rank-2 operands, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k)
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));

  Tensor out = detail::make_output({m, n}, a.dtype(), a.requires_grad() || b.requires_grad());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pa = a.impl()->data_as<T>();
    const T* pb = b.impl()->data_as<T>();
    T* po = out.impl()->data_as<T>();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t kk = 0; kk < k; ++kk)
        kernels::axpy(po + i * n, pa[i * k + kk], pb + kk * n, n);
  });

  detail::record_backward(out, [m, k, n, ai = a.impl(), bi = b.impl(), oi = out.impl()]() {
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      const T* g = oi->grad_as<T>();
      if (ai->requires_grad) {
        ai->ensure_grad();
        T* ga = ai->grad_as<T>();
        const T* pb = bi->data_as<T>();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t kk = 0; kk < k; ++kk)
            ga[i * k + kk] += kernels::dot(g + i * n, pb + kk * n, n);
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        T* gb = bi->grad_as<T>();
        const T* pa = ai->data_as<T>();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t kk = 0; kk < k; ++kk)
            kernels::axpy(gb + kk * n, pa[i * k + kk], g + i * n, n);
      }
    });
  });
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2)
    throw DimensionError("transpose: expected rank-2, got " + shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor out = detail::make_output({n, m}, a.dtype(), a.requires_grad());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pa = a.impl()->data_as<T>();
    T* po = out.impl()->data_as<T>();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) po[j * m + i] = pa[i * n + j];
  });
  detail::record_backward(out, [m, n, ai = a.impl(), oi = out.impl()]() {
    if (!ai->requires_grad) return;
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      ai->ensure_grad();
      const T* g = oi->grad_as<T>();
      T* ga = ai->grad_as<T>();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
  });
  return out;
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (numel(shape) != a.numel())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(shape));
  Tensor out = detail::make_output(shape, a.dtype(), a.requires_grad());
  out.impl()->data = a.impl()->data;
  detail::record_backward(out, [ai = a.impl(), oi = out.impl()]() {
    if (!ai->requires_grad) return;
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      ai->ensure_grad();
      kernels::axpy(ai->grad_as<T>(), T(1), oi->grad_as<T>(), oi->numel());
    });
  });
  return out;
}

// --- Normalizations ----------------------------------------------------------

Tensor softmax(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank())
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(a.shape()));
  const Shape& shape = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];

  Tensor out = detail::make_output(shape, a.dtype(), a.requires_grad());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pa = a.impl()->data_as<T>();
    T* po = out.impl()->data_as<T>();
    std::vector<T> fiber(len);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        for (std::size_t t = 0; t < len; ++t) fiber[t] = pa[base + t * inner];
        const T mx = kernels::maxv(fiber.data(), len);
        T total = T(0);
        for (std::size_t t = 0; t < len; ++t) {
          fiber[t] = std::exp(fiber[t] - mx);
          total += fiber[t];
        }
        const T inv = T(1) / total;
        for (std::size_t t = 0; t < len; ++t) po[base + t * inner] = fiber[t] * inv;
      }
  });

  detail::record_backward(out, [outer, inner, len, ai = a.impl(), oi = out.impl()]() {
    if (!ai->requires_grad) return;
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      ai->ensure_grad();
      const T* g = oi->grad_as<T>();
      const T* s = oi->data_as<T>();
      T* ga = ai->grad_as<T>();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * len * inner + in;
          T gs = T(0);
          for (std::size_t t = 0; t < len; ++t) gs += g[base + t * inner] * s[base + t * inner];
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t idx = base + t * inner;
            ga[idx] += s[idx] * (g[idx] - gs);
          }
        }
    });
  });
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  check_same_dtype(x, gain, "layer_norm");
  check_same_dtype(x, bias, "layer_norm");
  if (x.rank() < 1) throw DimensionError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (d < 2)
    throw ConfigError("layer_norm: last-axis width " + std::to_string(d) +
                      " is degenerate; need at least 2");
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d})
    throw DimensionError("layer_norm: gain/bias shapes " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match feature width " +
                         std::to_string(d));
  const std::size_t rows = x.numel() / d;

  Tensor out = detail::make_output(
      x.shape(), x.dtype(), x.requires_grad() || gain.requires_grad() || bias.requires_grad());

  // xhat and the per-row inverse stddev are needed again in backward.
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = x.impl()->data_as<T>();
    const T* pg = gain.impl()->data_as<T>();
    const T* pb = bias.impl()->data_as<T>();
    T* po = out.impl()->data_as<T>();
    auto xhat = std::make_shared<std::vector<T>>(rows * d);
    auto inv_sd = std::make_shared<std::vector<T>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* row = px + r * d;
      const T mu = kernels::sum(row, d) / static_cast<T>(d);
      const T var = kernels::sum_sq_dev(row, mu, d) / static_cast<T>(d);
      const T inv = T(1) / std::sqrt(var + static_cast<T>(eps));
      (*inv_sd)[r] = inv;
      for (std::size_t j = 0; j < d; ++j) {
        const T xh = (row[j] - mu) * inv;
        (*xhat)[r * d + j] = xh;
        po[r * d + j] = pg[j] * xh + pb[j];
      }
    }
    detail::record_backward(out, [rows, d, xhat, inv_sd, xi = x.impl(), gi = gain.impl(),
                                  bi = bias.impl(), oi = out.impl()]() {
      const T* g = oi->grad_as<T>();
      const T* pgain = gi->data_as<T>();
      if (xi->requires_grad) {
        xi->ensure_grad();
        T* gx = xi->grad_as<T>();
        std::vector<T> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* xh = xhat->data() + r * d;
          const T* gr = g + r * d;
          T m1 = T(0), m2 = T(0);
          for (std::size_t j = 0; j < d; ++j) {
            dxhat[j] = gr[j] * pgain[j];
            m1 += dxhat[j];
            m2 += dxhat[j] * xh[j];
          }
          m1 /= static_cast<T>(d);
          m2 /= static_cast<T>(d);
          const T inv = (*inv_sd)[r];
          for (std::size_t j = 0; j < d; ++j)
            gx[r * d + j] += inv * (dxhat[j] - m1 - xh[j] * m2);
        }
      }
      if (gi->requires_grad) {
        gi->ensure_grad();
        T* gg = gi->grad_as<T>();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) gg[j] += g[r * d + j] * (*xhat)[r * d + j];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        T* gb = bi->grad_as<T>();
        for (std::size_t r = 0; r < rows; ++r) kernels::axpy(gb, T(1), g + r * d, d);
      }
    });
  });
  return out;
}

// --- Reductions ---------------------------------------------------------------

Tensor sum(const Tensor& a) {
  Tensor out = detail::make_output({1}, a.dtype(), a.requires_grad());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    out.impl()->data_as<T>()[0] = kernels::sum(a.impl()->data_as<T>(), a.numel());
  });
  detail::record_backward(out, [ai = a.impl(), oi = out.impl()]() {
    if (!ai->requires_grad) return;
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      ai->ensure_grad();
      const T g = oi->grad_as<T>()[0];
      T* ga = ai->grad_as<T>();
      for (std::size_t i = 0; i < ai->numel(); ++i) ga[i] += g;
    });
  });
  return out;
}

Tensor mean(const Tensor& a) {
  const double inv_n = 1.0 / static_cast<double>(a.numel());
  Tensor out = detail::make_output({1}, a.dtype(), a.requires_grad());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    out.impl()->data_as<T>()[0] =
        kernels::sum(a.impl()->data_as<T>(), a.numel()) * static_cast<T>(inv_n);
  });
  detail::record_backward(out, [inv_n, ai = a.impl(), oi = out.impl()]() {
    if (!ai->requires_grad) return;
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      ai->ensure_grad();
      const T g = oi->grad_as<T>()[0] * static_cast<T>(inv_n);
      T* ga = ai->grad_as<T>();
      for (std::size_t i = 0; i < ai->numel(); ++i) ga[i] += g;
    });
  });
  return out;
}

// --- Structure ops --------------------------------------------------------------

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
  if (a.rank() != 2)
    throw DimensionError("slice_rows: expected rank-2, got " + shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (r0 >= r1 || r1 > m)
    throw DimensionError("slice_rows: range [" + std::to_string(r0) + ", " + std::to_string(r1) +
                         ") invalid for " + shape_str(a.shape()));
  Tensor out = detail::make_output({r1 - r0, n}, a.dtype(), a.requires_grad());
  const std::size_t w = dtype_size(a.dtype());
  std::memcpy(out.impl()->data.data(), a.impl()->data.data() + r0 * n * w, (r1 - r0) * n * w);
  detail::record_backward(out, [r0, n, ai = a.impl(), oi = out.impl()]() {
    if (!ai->requires_grad) return;
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      ai->ensure_grad();
      kernels::axpy(ai->grad_as<T>() + r0 * n, T(1), oi->grad_as<T>(), oi->numel());
    });
  });
  return out;
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
  if (a.rank() != 2)
    throw DimensionError("slice_cols: expected rank-2, got " + shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (c0 >= c1 || c1 > n)
    throw DimensionError("slice_cols: range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                         ") invalid for " + shape_str(a.shape()));
  const std::size_t w = c1 - c0;
  Tensor out = detail::make_output({m, w}, a.dtype(), a.requires_grad());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pa = a.impl()->data_as<T>();
    T* po = out.impl()->data_as<T>();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) po[i * w + j] = pa[i * n + c0 + j];
  });
  detail::record_backward(out, [m, n, c0, w, ai = a.impl(), oi = out.impl()]() {
    if (!ai->requires_grad) return;
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      ai->ensure_grad();
      const T* g = oi->grad_as<T>();
      T* ga = ai->grad_as<T>();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) ga[i * n + c0 + j] += g[i * w + j];
    });
  });
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts[0].shape().at(1);
  std::size_t m = 0;
  bool needs_grad = false;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.shape()[1] != n)
      throw DimensionError("concat_rows: incompatible part shape " + shape_str(p.shape()));
    check_same_dtype(parts[0], p, "concat_rows");
    m += p.shape()[0];
    needs_grad = needs_grad || p.requires_grad();
  }
  Tensor out = detail::make_output({m, n}, parts[0].dtype(), needs_grad);
  const std::size_t w = dtype_size(out.dtype());
  std::size_t row = 0;
  std::vector<std::pair<std::shared_ptr<TensorImpl>, std::size_t>> placed;
  for (const Tensor& p : parts) {
    std::memcpy(out.impl()->data.data() + row * n * w, p.impl()->data.data(),
                p.impl()->data.size());
    placed.emplace_back(p.impl(), row);
    row += p.shape()[0];
  }
  detail::record_backward(out, [n, placed, oi = out.impl()]() {
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      const T* g = oi->grad_as<T>();
      for (const auto& [pi, at] : placed) {
        if (!pi->requires_grad) continue;
        pi->ensure_grad();
        kernels::axpy(pi->template grad_as<T>(), T(1), g + at * n, pi->numel());
      }
    });
  });
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts[0].shape().at(0);
  std::size_t n = 0;
  bool needs_grad = false;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.shape()[0] != m)
      throw DimensionError("concat_cols: incompatible part shape " + shape_str(p.shape()));
    check_same_dtype(parts[0], p, "concat_cols");
    n += p.shape()[1];
    needs_grad = needs_grad || p.requires_grad();
  }
  Tensor out = detail::make_output({m, n}, parts[0].dtype(), needs_grad);
  dispatch(out.dtype(), [&](auto tag) {
    using T = decltype(tag);
    T* po = out.impl()->data_as<T>();
    std::size_t col = 0;
    for (const Tensor& p : parts) {
      const T* pp = p.impl()->data_as<T>();
      const std::size_t pw = p.shape()[1];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < pw; ++j) po[i * n + col + j] = pp[i * pw + j];
      col += pw;
    }
  });
  std::vector<std::pair<std::shared_ptr<TensorImpl>, std::size_t>> placed;
  {
    std::size_t col = 0;
    for (const Tensor& p : parts) {
      placed.emplace_back(p.impl(), col);
      col += p.shape()[1];
    }
  }
  detail::record_backward(out, [m, n, placed, oi = out.impl()]() {
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      const T* g = oi->grad_as<T>();
      for (const auto& [pi, col] : placed) {
        if (!pi->requires_grad) continue;
        pi->ensure_grad();
        T* gp = pi->template grad_as<T>();
        const std::size_t pw = pi->shape[1];
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < pw; ++j) gp[i * pw + j] += g[i * n + col + j];
      }
    });
  });
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  check_same_dtype(x, bias, "add_bias");
  if (x.rank() != 2 || bias.rank() != 1 || bias.shape()[0] != x.shape()[1])
    throw DimensionError("add_bias: shapes " + shape_str(x.shape()) + " and " +
                         shape_str(bias.shape()) + " do not align");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  Tensor out = detail::make_output(x.shape(), x.dtype(),
                                   x.requires_grad() || bias.requires_grad());
  dispatch(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* px = x.impl()->data_as<T>();
    const T* pb = bias.impl()->data_as<T>();
    T* po = out.impl()->data_as<T>();
    for (std::size_t i = 0; i < m; ++i) kernels::add(po + i * n, px + i * n, pb, n);
  });
  detail::record_backward(out, [m, n, xi = x.impl(), bi = bias.impl(), oi = out.impl()]() {
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      const T* g = oi->grad_as<T>();
      if (xi->requires_grad) {
        xi->ensure_grad();
        kernels::axpy(xi->grad_as<T>(), T(1), g, oi->numel());
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        T* gb = bi->grad_as<T>();
        for (std::size_t i = 0; i < m; ++i) kernels::axpy(gb, T(1), g + i * n, n);
      }
    });
  });
  return out;
}

Tensor permute_elements(const Tensor& a, const std::vector<std::size_t>& src_index,
                        const Shape& out_shape) {
  if (numel(out_shape) != src_index.size())
    throw DimensionError("permute_elements: index map size " + std::to_string(src_index.size()) +
                         " does not match output shape " + shape_str(out_shape));
  for (std::size_t s : src_index)
    if (s >= a.numel())
      throw ContractError("permute_elements: index " + std::to_string(s) +
                          " out of range for input " + shape_str(a.shape()));
  auto map = std::make_shared<std::vector<std::size_t>>(src_index);
  Tensor out = detail::make_output(out_shape, a.dtype(), a.requires_grad());
  dispatch(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* pa = a.impl()->data_as<T>();
    T* po = out.impl()->data_as<T>();
    for (std::size_t i = 0; i < map->size(); ++i) po[i] = pa[(*map)[i]];
  });
  detail::record_backward(out, [map, ai = a.impl(), oi = out.impl()]() {
    if (!ai->requires_grad) return;
    dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      ai->ensure_grad();
      const T* g = oi->grad_as<T>();
      T* ga = ai->grad_as<T>();
      for (std::size_t i = 0; i < map->size(); ++i) ga[(*map)[i]] += g[i];
    });
  });
  return out;
}

Tensor slice_outer(const Tensor& a, std::size_t index) {
  if (a.rank() < 1)
    throw DimensionError("slice_outer: scalar input");
  if (index >= a.shape()[0])
    throw DimensionError("slice_outer: index " + std::to_string(index) + " out of range for " +
                         shape_str(a.shape()));
  if (a.requires_grad())
    throw ContractError("slice_outer: data-path helper, input must not require grad");
  Shape out_shape(a.shape().begin() + 1, a.shape().end());
  if (out_shape.empty()) out_shape = {1};
  Tensor out = Tensor::zeros(out_shape, a.dtype());
  const std::size_t block = out.numel() * dtype_size(a.dtype());
  std::memcpy(out.impl()->data.data(), a.impl()->data.data() + index * block, block);
  return out;
}

Tensor slice_outer_range(const Tensor& a, std::size_t begin, std::size_t count) {
  if (a.rank() < 1)
    throw DimensionError("slice_outer_range: scalar input");
  if (begin + count > a.shape()[0])
    throw DimensionError("slice_outer_range: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " +
                         shape_str(a.shape()));
  if (a.requires_grad())
    throw ContractError("slice_outer_range: data-path helper, input must not require grad");
  Shape out_shape = a.shape();
  out_shape[0] = count;
  Tensor out = Tensor::zeros(out_shape, a.dtype());
  const std::size_t block =
      (a.numel() / a.shape()[0]) * dtype_size(a.dtype());
  std::memcpy(out.impl()->data.data(), a.impl()->data.data() + begin * block, count * block);
  return out;
}

void fill_uniform(Tensor& t, Rng& rng, double lo, double hi) {
  // Draws in double regardless of storage width so the stream advances the
  // same way in both float modes.
  for (std::size_t i = 0; i < t.numel(); ++i) t.set_value_at(i, rng.uniform(lo, hi));
}

}  // namespace s2kd
