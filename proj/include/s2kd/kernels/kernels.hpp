#pragma once

#include <cmath>
#include <cstddef>

// Data-parallel inner loops used by the tensor engine, the optimizer and the
// metrics. Each kernel exists twice: a scalar reference implementation
// (kernels::scalar) and an AVX2 variant picked at runtime when the CPU
// supports it. The two are equivalence-tested against each other; everything
// above this layer only calls the dispatched entry points.

namespace s2kd::kernels {

bool avx2_available();

// Dispatch control. SIMD is on by default when available; tests flip it off
// to compare code paths on identical inputs.
bool simd_enabled();
void set_simd_enabled(bool on);

// dst[i] = a[i] op b[i]
void add(float* dst, const float* a, const float* b, std::size_t n);
void add(double* dst, const double* a, const double* b, std::size_t n);
void sub(float* dst, const float* a, const float* b, std::size_t n);
void sub(double* dst, const double* a, const double* b, std::size_t n);
void mul(float* dst, const float* a, const float* b, std::size_t n);
void mul(double* dst, const double* a, const double* b, std::size_t n);

// dst[i] = a[i] * s
void scale(float* dst, const float* a, float s, std::size_t n);
void scale(double* dst, const double* a, double s, std::size_t n);

// y[i] += alpha * x[i]
void axpy(float* y, float alpha, const float* x, std::size_t n);
void axpy(double* y, double alpha, const double* x, std::size_t n);

float dot(const float* a, const float* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);

float sum(const float* a, std::size_t n);
double sum(const double* a, std::size_t n);

// Maximum element; n must be >= 1.
float maxv(const float* a, std::size_t n);
double maxv(const double* a, std::size_t n);

void vabs(float* dst, const float* a, std::size_t n);
void vabs(double* dst, const double* a, std::size_t n);

// dst[i] = sqrt(a[i] + eps)
void sqrt_eps(float* dst, const float* a, float eps, std::size_t n);
void sqrt_eps(double* dst, const double* a, double eps, std::size_t n);

// sum_i (a[i] - b[i])^2  /  sum_i |a[i] - b[i]|
float diff_sumsq(const float* a, const float* b, std::size_t n);
double diff_sumsq(const double* a, const double* b, std::size_t n);
float diff_sumabs(const float* a, const float* b, std::size_t n);
double diff_sumabs(const double* a, const double* b, std::size_t n);

// sum_i (a[i] - mu)^2
float sum_sq_dev(const float* a, float mu, std::size_t n);
double sum_sq_dev(const double* a, double mu, std::size_t n);

// Fused Adam update with bias correction:
//   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
//   p -= lr * (m/bc1) / (sqrt(v/bc2) + eps)
void adam_update(float* p, float* m, float* v, const float* g, std::size_t n, float lr,
                 float beta1, float beta2, float eps, float bc1, float bc2);
void adam_update(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
                 double beta1, double beta2, double eps, double bc1, double bc2);

// ---------------------------------------------------------------------------
// Scalar reference kernels. These define the semantics; the AVX2 variants
// must agree with them within summation-reordering tolerance.
// ---------------------------------------------------------------------------
namespace scalar {

template <typename T>
void add(T* dst, const T* a, const T* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

template <typename T>
void sub(T* dst, const T* a, const T* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] - b[i];
}

template <typename T>
void mul(T* dst, const T* a, const T* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

template <typename T>
void scale(T* dst, const T* a, T s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * s;
}

template <typename T>
void axpy(T* y, T alpha, const T* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T sum(const T* a, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

template <typename T>
T maxv(const T* a, std::size_t n) {
  T m = a[0];
  for (std::size_t i = 1; i < n; ++i) m = a[i] > m ? a[i] : m;
  return m;
}

template <typename T>
void vabs(T* dst, const T* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] < T(0) ? -a[i] : a[i];
}

template <typename T>
void sqrt_eps(T* dst, const T* a, T eps, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = std::sqrt(a[i] + eps);
}

template <typename T>
T diff_sumsq(const T* a, const T* b, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    T d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

template <typename T>
T diff_sumabs(const T* a, const T* b, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    T d = a[i] - b[i];
    acc += d < T(0) ? -d : d;
  }
  return acc;
}

template <typename T>
T sum_sq_dev(const T* a, T mu, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    T d = a[i] - mu;
    acc += d * d;
  }
  return acc;
}

template <typename T>
void adam_update(T* p, T* m, T* v, const T* g, std::size_t n, T lr, T beta1, T beta2, T eps,
                 T bc1, T bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    T mhat = m[i] / bc1;
    T vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace scalar
}  // namespace s2kd::kernels
