#include "s2kd/kernels/kernels.hpp"

#ifdef S2KD_WITH_AVX2
#include "kernels_avx2.hpp"
#endif

#include <atomic>

namespace s2kd::kernels {

namespace {

bool detect_avx2() {
#ifdef S2KD_WITH_AVX2
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<bool> g_simd_enabled{true};

}  // namespace

bool avx2_available() {
  static const bool available = detect_avx2();
  return available;
}

bool simd_enabled() { return g_simd_enabled.load(std::memory_order_relaxed); }

void set_simd_enabled(bool on) { g_simd_enabled.store(on, std::memory_order_relaxed); }

namespace {

inline bool use_avx2() { return simd_enabled() && avx2_available(); }

}  // namespace

// Each entry point forwards to the AVX2 variant when the CPU supports it and
// SIMD has not been switched off, otherwise to the scalar reference.
#ifdef S2KD_WITH_AVX2
#define S2KD_TRY_AVX2(call) \
  do {                      \
    if (use_avx2()) return avx2::call; \
  } while (0)
#else
#define S2KD_TRY_AVX2(call) \
  do {                      \
  } while (0)
#endif

void add(float* dst, const float* a, const float* b, std::size_t n) {
  S2KD_TRY_AVX2(add(dst, a, b, n));
  scalar::add(dst, a, b, n);
}

void add(double* dst, const double* a, const double* b, std::size_t n) {
  S2KD_TRY_AVX2(add(dst, a, b, n));
  scalar::add(dst, a, b, n);
}

void sub(float* dst, const float* a, const float* b, std::size_t n) {
  S2KD_TRY_AVX2(sub(dst, a, b, n));
  scalar::sub(dst, a, b, n);
}

void sub(double* dst, const double* a, const double* b, std::size_t n) {
  S2KD_TRY_AVX2(sub(dst, a, b, n));
  scalar::sub(dst, a, b, n);
}

void mul(float* dst, const float* a, const float* b, std::size_t n) {
  S2KD_TRY_AVX2(mul(dst, a, b, n));
  scalar::mul(dst, a, b, n);
}

void mul(double* dst, const double* a, const double* b, std::size_t n) {
  S2KD_TRY_AVX2(mul(dst, a, b, n));
  scalar::mul(dst, a, b, n);
}

void scale(float* dst, const float* a, float s, std::size_t n) {
  S2KD_TRY_AVX2(scale(dst, a, s, n));
  scalar::scale(dst, a, s, n);
}

void scale(double* dst, const double* a, double s, std::size_t n) {
  S2KD_TRY_AVX2(scale(dst, a, s, n));
  scalar::scale(dst, a, s, n);
}

void axpy(float* y, float alpha, const float* x, std::size_t n) {
  S2KD_TRY_AVX2(axpy(y, alpha, x, n));
  scalar::axpy(y, alpha, x, n);
}

void axpy(double* y, double alpha, const double* x, std::size_t n) {
  S2KD_TRY_AVX2(axpy(y, alpha, x, n));
  scalar::axpy(y, alpha, x, n);
}

float dot(const float* a, const float* b, std::size_t n) {
  S2KD_TRY_AVX2(dot(a, b, n));
  return scalar::dot(a, b, n);
}

double dot(const double* a, const double* b, std::size_t n) {
  S2KD_TRY_AVX2(dot(a, b, n));
  return scalar::dot(a, b, n);
}

float sum(const float* a, std::size_t n) {
  S2KD_TRY_AVX2(sum(a, n));
  return scalar::sum(a, n);
}

double sum(const double* a, std::size_t n) {
  S2KD_TRY_AVX2(sum(a, n));
  return scalar::sum(a, n);
}

float maxv(const float* a, std::size_t n) {
  S2KD_TRY_AVX2(maxv(a, n));
  return scalar::maxv(a, n);
}

double maxv(const double* a, std::size_t n) {
  S2KD_TRY_AVX2(maxv(a, n));
  return scalar::maxv(a, n);
}

void vabs(float* dst, const float* a, std::size_t n) {
  S2KD_TRY_AVX2(vabs(dst, a, n));
  scalar::vabs(dst, a, n);
}

void vabs(double* dst, const double* a, std::size_t n) {
  S2KD_TRY_AVX2(vabs(dst, a, n));
  scalar::vabs(dst, a, n);
}

void sqrt_eps(float* dst, const float* a, float eps, std::size_t n) {
  S2KD_TRY_AVX2(sqrt_eps(dst, a, eps, n));
  scalar::sqrt_eps(dst, a, eps, n);
}

void sqrt_eps(double* dst, const double* a, double eps, std::size_t n) {
  S2KD_TRY_AVX2(sqrt_eps(dst, a, eps, n));
  scalar::sqrt_eps(dst, a, eps, n);
}

float diff_sumsq(const float* a, const float* b, std::size_t n) {
  S2KD_TRY_AVX2(diff_sumsq(a, b, n));
  return scalar::diff_sumsq(a, b, n);
}

double diff_sumsq(const double* a, const double* b, std::size_t n) {
  S2KD_TRY_AVX2(diff_sumsq(a, b, n));
  return scalar::diff_sumsq(a, b, n);
}

float diff_sumabs(const float* a, const float* b, std::size_t n) {
  S2KD_TRY_AVX2(diff_sumabs(a, b, n));
  return scalar::diff_sumabs(a, b, n);
}

double diff_sumabs(const double* a, const double* b, std::size_t n) {
  S2KD_TRY_AVX2(diff_sumabs(a, b, n));
  return scalar::diff_sumabs(a, b, n);
}

float sum_sq_dev(const float* a, float mu, std::size_t n) {
  S2KD_TRY_AVX2(sum_sq_dev(a, mu, n));
  return scalar::sum_sq_dev(a, mu, n);
}

double sum_sq_dev(const double* a, double mu, std::size_t n) {
  S2KD_TRY_AVX2(sum_sq_dev(a, mu, n));
  return scalar::sum_sq_dev(a, mu, n);
}

void adam_update(float* p, float* m, float* v, const float* g, std::size_t n, float lr,
                 float beta1, float beta2, float eps, float bc1, float bc2) {
  S2KD_TRY_AVX2(adam_update(p, m, v, g, n, lr, beta1, beta2, eps, bc1, bc2));
  scalar::adam_update(p, m, v, g, n, lr, beta1, beta2, eps, bc1, bc2);
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
                 double beta1, double beta2, double eps, double bc1, double bc2) {
  S2KD_TRY_AVX2(adam_update(p, m, v, g, n, lr, beta1, beta2, eps, bc1, bc2));
  scalar::adam_update(p, m, v, g, n, lr, beta1, beta2, eps, bc1, bc2);
}

#undef S2KD_TRY_AVX2

}  // namespace s2kd::kernels
