#include "s2kd/metrics.hpp"

#include <cmath>
#include <vector>

#include "s2kd/kernels/kernels.hpp"

namespace s2kd {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
}

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;
constexpr double kRange = 1.0;

// Normalized 11x11 Gaussian weights, built once.
const std::vector<double>& gaussian_window() {
  static const std::vector<double> w = [] {
    std::vector<double> out(kWindow * kWindow);
    const double c = (kWindow - 1) / 2.0;
    double total = 0.0;
    for (std::size_t y = 0; y < kWindow; ++y)
      for (std::size_t x = 0; x < kWindow; ++x) {
        const double dy = y - c, dx = x - c;
        out[y * kWindow + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
        total += out[y * kWindow + x];
      }
    for (double& v : out) v /= total;
    return out;
  }();
  return w;
}

// SSIM of one window given weights over the same support.
double windowed_term(const double* a, const double* b, const double* w, std::size_t n,
                     std::size_t stride_a, std::size_t row_len) {
  double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = (i / row_len) * stride_a + (i % row_len);
    const double x = a[idx], y = b[idx], wi = w[i];
    mu_a += wi * x;
    mu_b += wi * y;
    aa += wi * x * x;
    bb += wi * y * y;
    ab += wi * x * y;
  }
  const double var_a = aa - mu_a * mu_a;
  const double var_b = bb - mu_b * mu_b;
  const double cov = ab - mu_a * mu_b;
  const double c1 = (kK1 * kRange) * (kK1 * kRange);
  const double c2 = (kK2 * kRange) * (kK2 * kRange);
  return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

// One 2-D frame held as contiguous doubles.
double ssim_frame(const std::vector<double>& a, const std::vector<double>& b, std::size_t h,
                  std::size_t w) {
  if (h < kWindow || w < kWindow) {
    // Global fallback: one uniform window over the whole frame.
    std::vector<double> uniform(h * w, 1.0 / static_cast<double>(h * w));
    return windowed_term(a.data(), b.data(), uniform.data(), h * w, w, w);
  }
  const auto& win = gaussian_window();
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + kWindow <= h; ++y)
    for (std::size_t x = 0; x + kWindow <= w; ++x) {
      acc += windowed_term(a.data() + y * w + x, b.data() + y * w + x, win.data(),
                           kWindow * kWindow, w, kWindow);
      ++count;
    }
  return acc / static_cast<double>(count);
}

}  // namespace

double mse_value(const Tensor& pred, const Tensor& truth) {
  require_same_shape(pred, truth, "mse");
  const std::size_t n = pred.numel();
  if (n == 0) return 0.0;
  if (pred.dtype() == truth.dtype()) {
    double total = 0.0;
    detail::dispatch(pred.dtype(), [&](auto tag) {
      using T = decltype(tag);
      total = kernels::diff_sumsq(pred.impl()->data_as<T>(), truth.impl()->data_as<T>(), n);
    });
    return total / static_cast<double>(n);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred.value_at(i) - truth.value_at(i);
    total += d * d;
  }
  return total / static_cast<double>(n);
}

double mae_value(const Tensor& pred, const Tensor& truth) {
  require_same_shape(pred, truth, "mae");
  const std::size_t n = pred.numel();
  if (n == 0) return 0.0;
  if (pred.dtype() == truth.dtype()) {
    double total = 0.0;
    detail::dispatch(pred.dtype(), [&](auto tag) {
      using T = decltype(tag);
      total = kernels::diff_sumabs(pred.impl()->data_as<T>(), truth.impl()->data_as<T>(), n);
    });
    return total / static_cast<double>(n);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += std::fabs(pred.value_at(i) - truth.value_at(i));
  return total / static_cast<double>(n);
}

double ssim_value(const Tensor& pred, const Tensor& truth) {
  require_same_shape(pred, truth, "ssim");
  const Shape& s = pred.shape();
  std::size_t h = 0, w = 0, frames = 1, channels = 1;
  if (s.size() == 2) {
    h = s[0];
    w = s[1];
  } else if (s.size() == 3) {  // [T, H, W]
    frames = s[0];
    h = s[1];
    w = s[2];
  } else if (s.size() == 4) {  // [T, H, W, C]
    frames = s[0];
    h = s[1];
    w = s[2];
    channels = s[3];
  } else {
    throw DimensionError("ssim: expected rank 2, 3 or 4, got " + shape_str(s));
  }
  if (h == 0 || w == 0) throw DimensionError("ssim: empty frame");

  std::vector<double> a(h * w), b(h * w);
  double acc = 0.0;
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const std::size_t idx = ((f * h + y) * w + x) * channels + c;
          a[y * w + x] = pred.value_at(idx);
          b[y * w + x] = truth.value_at(idx);
        }
      acc += ssim_frame(a, b, h, w);
    }
  return acc / static_cast<double>(frames * channels);
}

}  // namespace s2kd
