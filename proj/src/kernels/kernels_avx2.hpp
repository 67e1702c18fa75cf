#pragma once

#include <cstddef>

// AVX2 kernel variants, compiled in their own translation unit with
// -mavx2 -mfma. Only the dispatcher includes this header.

namespace s2kd::kernels::avx2 {

void add(float* dst, const float* a, const float* b, std::size_t n);
void add(double* dst, const double* a, const double* b, std::size_t n);
void sub(float* dst, const float* a, const float* b, std::size_t n);
void sub(double* dst, const double* a, const double* b, std::size_t n);
void mul(float* dst, const float* a, const float* b, std::size_t n);
void mul(double* dst, const double* a, const double* b, std::size_t n);
void scale(float* dst, const float* a, float s, std::size_t n);
void scale(double* dst, const double* a, double s, std::size_t n);
void axpy(float* y, float alpha, const float* x, std::size_t n);
void axpy(double* y, double alpha, const double* x, std::size_t n);
float dot(const float* a, const float* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
float sum(const float* a, std::size_t n);
double sum(const double* a, std::size_t n);
float maxv(const float* a, std::size_t n);
double maxv(const double* a, std::size_t n);
void vabs(float* dst, const float* a, std::size_t n);
void vabs(double* dst, const double* a, std::size_t n);
void sqrt_eps(float* dst, const float* a, float eps, std::size_t n);
void sqrt_eps(double* dst, const double* a, double eps, std::size_t n);
float diff_sumsq(const float* a, const float* b, std::size_t n);
double diff_sumsq(const double* a, const double* b, std::size_t n);
float diff_sumabs(const float* a, const float* b, std::size_t n);
double diff_sumabs(const double* a, const double* b, std::size_t n);
float sum_sq_dev(const float* a, float mu, std::size_t n);
double sum_sq_dev(const double* a, double mu, std::size_t n);
void adam_update(float* p, float* m, float* v, const float* g, std::size_t n, float lr,
                 float beta1, float beta2, float eps, float bc1, float bc2);
void adam_update(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
                 double beta1, double beta2, double eps, double bc1, double bc2);

}  // namespace s2kd::kernels::avx2
