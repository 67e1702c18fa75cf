#pragma once

#include <complex>
#include <vector>

#include "s2kd/tensor.hpp"

// Frequency-domain machinery for the spectral alignment loss: a radix-2 FFT
// with a naive-DFT fallback for arbitrary lengths, real-input magnitude
// spectra differentiable through the transform, and the L1 loss between two
// magnitude spectra.

namespace s2kd {

// Smoothing inside the magnitude sqrt so zero bins stay differentiable.
inline constexpr double kMagnitudeEps = 1e-12;

// Unnormalized forward transform X_k = sum_n x_n e^{-2pi i k n / L}; inverse
// applies the conjugate twiddles and divides by L.

// Iterative Cooley-Tukey; length must be a power of two.
std::vector<std::complex<double>> fft_radix2(std::vector<std::complex<double>> x, bool inverse);

// Direct O(L^2) evaluation, any length.
std::vector<std::complex<double>> dft_naive(const std::vector<std::complex<double>>& x,
                                            bool inverse);

// Radix-2 when the length is a power of two, naive otherwise.
std::vector<std::complex<double>> dft(const std::vector<std::complex<double>>& x, bool inverse);

struct MagnitudeSpectrum {
  Tensor values;                  // [F_bins x D], F_bins = L/2 + 1
  std::size_t source_length = 0;  // L, the token count of the input
};

// Transforms each feature channel along the token axis of z [L x D] and
// returns per-bin magnitudes sqrt(Re^2 + Im^2 + eps_mag), recorded on the
// tape when z requires grad. L must be at least 2.
MagnitudeSpectrum rfft_magnitude(const Tensor& z, double eps_mag = kMagnitudeEps);

// Mean absolute difference between the magnitude spectra of two equally
// shaped [L x D] latents.
Tensor spectral_loss(const Tensor& student_proj, const Tensor& teacher_fused,
                     double eps_mag = kMagnitudeEps);

// Same loss with the teacher side already transformed: a frozen teacher's
// spectrum is constant, so training loops compute it once per sample.
Tensor spectral_loss(const Tensor& student_proj, const MagnitudeSpectrum& teacher_spectrum,
                     double eps_mag = kMagnitudeEps);

}  // namespace s2kd
