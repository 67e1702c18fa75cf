#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cmath>
#include <vector>

#include "s2kd/metrics.hpp"
#include "s2kd/rng.hpp"

using namespace s2kd;

int main(int argc, char** argv) {
  set_default_dtype(Dtype::f64);
  return doctest::Context(argc, argv).run();
}

namespace {

// Independent SSIM recomputation: its own window construction and window
// sweep, written against the published formula rather than the implementation.
double oracle_ssim_2d(const std::vector<double>& img_a, const std::vector<double>& img_b,
                      std::size_t h, std::size_t w) {
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  auto one_window = [&](std::size_t y0, std::size_t x0, std::size_t wh, std::size_t ww,
                        bool gaussian) {
    double mu_a = 0, mu_b = 0, va = 0, vb = 0, cov = 0, wsum = 0;
    std::vector<double> weights(wh * ww, 1.0);
    if (gaussian) {
      for (std::size_t y = 0; y < wh; ++y)
        for (std::size_t x = 0; x < ww; ++x) {
          const double dy = static_cast<double>(y) - 5.0;
          const double dx = static_cast<double>(x) - 5.0;
          weights[y * ww + x] = std::exp(-(dx * dx + dy * dy) / 4.5);  // 2 * 1.5^2
        }
    }
    for (double v : weights) wsum += v;
    for (auto& v : weights) v /= wsum;
    for (std::size_t y = 0; y < wh; ++y)
      for (std::size_t x = 0; x < ww; ++x) {
        const double wi = weights[y * ww + x];
        mu_a += wi * img_a[(y0 + y) * w + x0 + x];
        mu_b += wi * img_b[(y0 + y) * w + x0 + x];
      }
    for (std::size_t y = 0; y < wh; ++y)
      for (std::size_t x = 0; x < ww; ++x) {
        const double wi = weights[y * ww + x];
        const double da = img_a[(y0 + y) * w + x0 + x] - mu_a;
        const double db = img_b[(y0 + y) * w + x0 + x] - mu_b;
        va += wi * da * da;
        vb += wi * db * db;
        cov += wi * da * db;
      }
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
           ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
  };

  if (h < 11 || w < 11) return one_window(0, 0, h, w, false);
  double acc = 0;
  std::size_t n = 0;
  for (std::size_t y = 0; y + 11 <= h; ++y)
    for (std::size_t x = 0; x + 11 <= w; ++x) {
      acc += one_window(y, x, 11, 11, true);
      ++n;
    }
  return acc / static_cast<double>(n);
}

Tensor frame(std::size_t h, std::size_t w, Rng& rng) {
  Tensor t = Tensor::zeros({h, w});
  fill_uniform(t, rng, 0.0, 1.0);
  return t;
}

std::vector<double> values_of(const Tensor& t) { return t.to_values(); }

}  // namespace

TEST_CASE("mse and mae basics") {
  Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  CHECK(mse_value(a, a) == 0.0);
  CHECK(mae_value(a, a) == 0.0);

  Tensor zero = Tensor::zeros({2, 3});
  Tensor minus3 = Tensor::full({2, 3}, -3.0);
  CHECK(mse_value(minus3, zero) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(mae_value(minus3, zero) == doctest::Approx(3.0).epsilon(1e-12));

  CHECK_THROWS_AS(mse_value(a, zero), DimensionError);
  CHECK_THROWS_AS(mae_value(a, zero), DimensionError);
}

TEST_CASE("mse and mae match naive accumulation on random pairs") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 4 + rng.below(8), w = 4 + rng.below(8);
    Tensor a = frame(h, w, rng), b = frame(h, w, rng);
    double se = 0.0, ae = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
      const double d = a.value_at(i) - b.value_at(i);
      se += d * d;
      ae += std::fabs(d);
    }
    const double n = static_cast<double>(a.numel());
    CHECK(mse_value(a, b) == doctest::Approx(se / n).epsilon(1e-9));
    CHECK(mae_value(a, b) == doctest::Approx(ae / n).epsilon(1e-9));
    // Jensen: mean |d| is at most sqrt(mean d^2).
    CHECK(mae_value(a, b) <= std::sqrt(mse_value(a, b)) + 1e-9);
  }
}

TEST_CASE("ssim of identical frames is one") {
  Rng rng(37);
  Tensor a = frame(16, 16, rng);
  CHECK(ssim_value(a, a) >= 1.0 - 1e-9);
  CHECK(ssim_value(a, a) <= 1.0 + 1e-12);
  Tensor small = frame(7, 9, rng);
  CHECK(ssim_value(small, small) >= 1.0 - 1e-9);
}

TEST_CASE("ssim matches the straight-line oracle") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a = frame(16, 16, rng), b = frame(16, 16, rng);
    const double got = ssim_value(a, b);
    const double want = oracle_ssim_2d(values_of(a), values_of(b), 16, 16);
    CHECK(got == doctest::Approx(want).epsilon(1e-6));
    CHECK(got >= -1.0 - 1e-12);
    CHECK(got <= 1.0 + 1e-12);
  }
}

TEST_CASE("ssim falls back to one global window on small frames") {
  Rng rng(43);
  Tensor a = frame(8, 8, rng), b = frame(8, 8, rng);
  CHECK(ssim_value(a, b) ==
        doctest::Approx(oracle_ssim_2d(values_of(a), values_of(b), 8, 8)).epsilon(1e-9));
}

TEST_CASE("ssim is symmetric") {
  Rng rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a = frame(16, 16, rng), b = frame(16, 16, rng);
    CHECK(std::fabs(ssim_value(a, b) - ssim_value(b, a)) <= 1e-9);
  }
}

TEST_CASE("inverted checkerboard scores strongly negative") {
  Tensor a = Tensor::zeros({16, 16});
  Tensor b = Tensor::zeros({16, 16});
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      const double v = static_cast<double>((x + y) % 2);
      a.set_value_at(y * 16 + x, v);
      b.set_value_at(y * 16 + x, 1.0 - v);
    }
  CHECK(ssim_value(a, b) < -0.5);
}

TEST_CASE("multi-frame input averages per frame-channel slice") {
  Rng rng(53);
  Tensor seq_a = Tensor::zeros({3, 16, 16, 2});
  Tensor seq_b = Tensor::zeros({3, 16, 16, 2});
  fill_uniform(seq_a, rng, 0.0, 1.0);
  fill_uniform(seq_b, rng, 0.0, 1.0);

  double want = 0.0;
  for (std::size_t f = 0; f < 3; ++f)
    for (std::size_t c = 0; c < 2; ++c) {
      std::vector<double> a(16 * 16), b(16 * 16);
      for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x) {
          const std::size_t idx = ((f * 16 + y) * 16 + x) * 2 + c;
          a[y * 16 + x] = seq_a.value_at(idx);
          b[y * 16 + x] = seq_b.value_at(idx);
        }
      want += oracle_ssim_2d(a, b, 16, 16);
    }
  want /= 6.0;
  CHECK(ssim_value(seq_a, seq_b) == doctest::Approx(want).epsilon(1e-6));

  CHECK_THROWS_AS(ssim_value(Tensor::zeros({2, 2, 2, 2, 2}), Tensor::zeros({2, 2, 2, 2, 2})),
                  DimensionError);
}
