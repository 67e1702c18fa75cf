#include "s2kd/spectral.hpp"

#include <cmath>
#include <memory>
#include <numbers>

namespace s2kd {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// cos/sin of 2*pi*m/L for m in [0, L): one table serves every twiddle since
// exponents only matter modulo L.
struct TwiddleTable {
  std::vector<double> c, s;
  explicit TwiddleTable(std::size_t length) : c(length), s(length) {
    for (std::size_t m = 0; m < length; ++m) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(m) /
                           static_cast<double>(length);
      c[m] = std::cos(theta);
      s[m] = std::sin(theta);
    }
  }
};

}  // namespace

std::vector<std::complex<double>> fft_radix2(std::vector<std::complex<double>> x, bool inverse) {
  const std::size_t n = x.size();
  if (!is_pow2(n))
    throw ConfigError("fft_radix2: length " + std::to_string(n) + " is not a power of two");
  if (n == 1) return x;

  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }

  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double theta = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(theta), std::sin(theta));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = x[i + j];
        const std::complex<double> v = x[i + j + len / 2] * w;
        x[i + j] = u + v;
        x[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& v : x) v /= static_cast<double>(n);
  return x;
}

std::vector<std::complex<double>> dft_naive(const std::vector<std::complex<double>>& x,
                                            bool inverse) {
  const std::size_t n = x.size();
  const TwiddleTable tw(n);
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
      const std::size_t idx = (k * m) % n;
      acc += x[m] * std::complex<double>(tw.c[idx], sign * tw.s[idx]);
    }
    out[k] = acc;
  }
  if (inverse)
    for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

std::vector<std::complex<double>> dft(const std::vector<std::complex<double>>& x, bool inverse) {
  return is_pow2(x.size()) ? fft_radix2(x, inverse) : dft_naive(x, inverse);
}

MagnitudeSpectrum rfft_magnitude(const Tensor& z, double eps_mag) {
  if (z.rank() != 2)
    throw DimensionError("rfft_magnitude: expected [tokens x channels], got " +
                         shape_str(z.shape()));
  const std::size_t l = z.shape()[0], d = z.shape()[1];
  if (l < 2)
    throw ConfigError("rfft_magnitude: token count " + std::to_string(l) +
                      " too short to transform (need at least 2)");
  const std::size_t f_bins = l / 2 + 1;

  Tensor out = detail::make_output({f_bins, d}, z.dtype(), z.requires_grad());
  // Real/imaginary parts and smoothed magnitudes are kept in double for the
  // backward pass regardless of the tensor width.
  auto re = std::make_shared<std::vector<double>>(f_bins * d);
  auto im = std::make_shared<std::vector<double>>(f_bins * d);
  auto mag = std::make_shared<std::vector<double>>(f_bins * d);

  const std::vector<double> zv = z.to_values();
  if (is_pow2(l)) {
    std::vector<std::complex<double>> col(l);
    for (std::size_t ch = 0; ch < d; ++ch) {
      for (std::size_t n = 0; n < l; ++n) col[n] = std::complex<double>(zv[n * d + ch], 0.0);
      const auto spec = fft_radix2(col, false);
      for (std::size_t k = 0; k < f_bins; ++k) {
        (*re)[k * d + ch] = spec[k].real();
        (*im)[k * d + ch] = spec[k].imag();
      }
    }
  } else {
    // Direct transform restricted to the bins actually kept, accumulating
    // across the contiguous channel axis so the inner loop vectorizes. Terms
    // are summed in the same token order as dft_naive, so the two agree bit
    // for bit.
    const TwiddleTable tw(l);
    for (std::size_t k = 0; k < f_bins; ++k) {
      double* re_k = re->data() + k * d;
      double* im_k = im->data() + k * d;
      for (std::size_t n = 0; n < l; ++n) {
        const std::size_t idx = (k * n) % l;
        const double c = tw.c[idx], s = -tw.s[idx];
        const double* zn = zv.data() + n * d;
        for (std::size_t ch = 0; ch < d; ++ch) {
          re_k[ch] += zn[ch] * c;
          im_k[ch] += zn[ch] * s;
        }
      }
    }
  }
  for (std::size_t i = 0; i < f_bins * d; ++i) {
    const double m = std::sqrt((*re)[i] * (*re)[i] + (*im)[i] * (*im)[i] + eps_mag);
    (*mag)[i] = m;
    out.set_value_at(i, m);
  }

  detail::record_backward(out, [l, d, f_bins, re, im, mag, zi = z.impl(), oi = out.impl()]() {
    if (!zi->requires_grad) return;
    zi->ensure_grad();
    const TwiddleTable tw(l);
    detail::dispatch(oi->dtype, [&](auto tag) {
      using T = decltype(tag);
      const T* g = oi->grad_as<T>();
      T* gz = zi->grad_as<T>();
      // d|X_k|/dx_n = (Re_k cos(2pi k n/L) - Im_k sin(2pi k n/L)) / |X_k|
      for (std::size_t n = 0; n < l; ++n)
        for (std::size_t ch = 0; ch < d; ++ch) {
          double acc = 0.0;
          for (std::size_t k = 0; k < f_bins; ++k) {
            const std::size_t idx = k * d + ch;
            const std::size_t m = (k * n) % l;
            acc += static_cast<double>(g[idx]) *
                   ((*re)[idx] * tw.c[m] - (*im)[idx] * tw.s[m]) / (*mag)[idx];
          }
          gz[n * d + ch] += static_cast<T>(acc);
        }
    });
  });
  return MagnitudeSpectrum{out, l};
}

Tensor spectral_loss(const Tensor& student_proj, const MagnitudeSpectrum& teacher_spectrum,
                     double eps_mag) {
  if (student_proj.rank() != 2 ||
      student_proj.shape()[0] != teacher_spectrum.source_length ||
      student_proj.shape()[1] != teacher_spectrum.values.shape()[1])
    throw DimensionError("spectral_loss: student latent " + shape_str(student_proj.shape()) +
                         " does not match a spectrum taken over [" +
                         std::to_string(teacher_spectrum.source_length) + " x " +
                         std::to_string(teacher_spectrum.values.shape()[1]) + "] tokens");
  const MagnitudeSpectrum ms = rfft_magnitude(student_proj, eps_mag);
  return mean(abs(sub(ms.values, teacher_spectrum.values)));
}

Tensor spectral_loss(const Tensor& student_proj, const Tensor& teacher_fused, double eps_mag) {
  if (student_proj.shape() != teacher_fused.shape())
    throw DimensionError("spectral_loss: latent shapes differ: " +
                         shape_str(student_proj.shape()) + " vs " +
                         shape_str(teacher_fused.shape()));
  return spectral_loss(student_proj, rfft_magnitude(teacher_fused, eps_mag), eps_mag);
}

}  // namespace s2kd
