#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "s2kd/gradcheck.hpp"
#include "s2kd/rng.hpp"
#include "s2kd/spectral.hpp"

using namespace s2kd;

int main(int argc, char** argv) {
  set_default_dtype(Dtype::f64);
  return doctest::Context(argc, argv).run();
}

namespace {

// Oracle: the defining DFT sum evaluated term by term with std::polar.
// Deliberately shares no code with the implementation under test.
std::vector<std::complex<double>> oracle_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n, {0.0, 0.0});
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t m = 0; m < n; ++m) {
      const double theta =
          -2.0 * std::numbers::pi * static_cast<double>(k * m) / static_cast<double>(n);
      out[k] += x[m] * std::polar(1.0, theta);
    }
  return out;
}

std::vector<double> random_signal(Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

std::vector<std::complex<double>> to_complex(const std::vector<double>& x) {
  std::vector<std::complex<double>> c(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) c[i] = {x[i], 0.0};
  return c;
}

double max_abs_diff(const std::vector<std::complex<double>>& a,
                    const std::vector<std::complex<double>>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("radix-2 basics") {
  std::vector<std::complex<double>> one = {{3.5, -1.25}};
  auto r = fft_radix2(one, false);
  CHECK(r[0] == one[0]);

  CHECK_THROWS_AS(fft_radix2(std::vector<std::complex<double>>(6), false), ConfigError);

  Rng rng(31);
  auto x = to_complex(random_signal(rng, 16));
  auto round = fft_radix2(fft_radix2(x, false), true);
  CHECK(max_abs_diff(round, x) < 1e-9);

  auto x8 = random_signal(rng, 8);
  CHECK(max_abs_diff(fft_radix2(to_complex(x8), false), oracle_dft(x8)) < 1e-10);
}

TEST_CASE("transform matches the oracle on 100 inputs of lengths 2..64") {
  Rng rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(63);  // [2, 64]
    auto x = random_signal(rng, n);
    CHECK(max_abs_diff(dft(to_complex(x), false), oracle_dft(x)) < 1e-9);
  }
}

TEST_CASE("Parseval and round trip at arbitrary lengths") {
  Rng rng(41);
  for (std::size_t n : {2, 3, 5, 8, 12, 16, 33, 64}) {
    auto x = random_signal(rng, n);
    auto spec = dft(to_complex(x), false);
    double lhs = 0.0, rhs = 0.0;
    for (const auto& v : spec) lhs += std::norm(v);
    for (double v : x) rhs += v * v;
    rhs *= static_cast<double>(n);
    CHECK(std::fabs(lhs - rhs) / rhs < 1e-5);

    auto round = dft(dft(to_complex(x), false), true);
    CHECK(max_abs_diff(round, to_complex(x)) < 1e-9);
  }
}

TEST_CASE("magnitude spectrum values") {
  // Constant channel: all energy in the DC bin.
  const double c = 0.5;
  Tensor zc = Tensor::full({4, 1}, c);
  auto ms = rfft_magnitude(zc);
  CHECK(ms.values.shape() == Shape{3, 1});
  CHECK(ms.source_length == 4);
  CHECK(ms.values.value_at(0) == doctest::Approx(4.0 * c).epsilon(1e-9));
  CHECK(ms.values.value_at(1) < 2e-6);
  CHECK(ms.values.value_at(2) < 2e-6);

  // Pure alternating-pair signal concentrates in bin 1.
  Tensor zp = Tensor::from_values({4, 1}, {1.0, 0.0, -1.0, 0.0});
  auto mp = rfft_magnitude(zp);
  CHECK(mp.values.value_at(0) < 2e-6);
  CHECK(mp.values.value_at(1) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(mp.values.value_at(2) < 2e-6);

  CHECK_THROWS_AS(rfft_magnitude(Tensor::zeros({1, 4})), ConfigError);
  CHECK_THROWS_AS(rfft_magnitude(Tensor::zeros({4})), DimensionError);
}

TEST_CASE("magnitude spectrum matches the oracle per channel") {
  Rng rng(43);
  for (std::size_t l : {5, 6, 8, 12, 80}) {
    const std::size_t d = 3;
    Tensor z = Tensor::zeros({l, d});
    fill_uniform(z, rng, -1.0, 1.0);
    auto ms = rfft_magnitude(z);
    for (std::size_t ch = 0; ch < d; ++ch) {
      std::vector<double> col(l);
      for (std::size_t n = 0; n < l; ++n) col[n] = z.value_at(n * d + ch);
      auto spec = oracle_dft(col);
      for (std::size_t k = 0; k < l / 2 + 1; ++k) {
        const double want = std::sqrt(std::norm(spec[k]) + kMagnitudeEps);
        CHECK(std::fabs(ms.values.value_at(k * d + ch) - want) < 1e-9);
      }
    }
  }
}

TEST_CASE("positive scaling scales every bin") {
  Rng rng(47);
  Tensor z = Tensor::zeros({8, 2});
  fill_uniform(z, rng, 0.2, 1.0);
  const double a = 2.75;
  auto m1 = rfft_magnitude(z);
  auto m2 = rfft_magnitude(scale(z, a));
  for (std::size_t i = 0; i < m1.values.numel(); ++i)
    CHECK(m2.values.value_at(i) == doctest::Approx(a * m1.values.value_at(i)).epsilon(1e-6));
}

TEST_CASE("spectral loss values") {
  Rng rng(53);
  Tensor z = Tensor::zeros({6, 4});
  fill_uniform(z, rng, -1.0, 1.0);
  CHECK(spectral_loss(z, z.detached()).scalar_value() == 0.0);

  // Reversing the token order leaves a real signal's magnitudes unchanged.
  const std::size_t l = 6, d = 4;
  Tensor rev = Tensor::zeros({l, d});
  for (std::size_t n = 0; n < l; ++n)
    for (std::size_t ch = 0; ch < d; ++ch)
      rev.set_value_at(n * d + ch, z.value_at((l - 1 - n) * d + ch));
  CHECK(spectral_loss(z, rev).scalar_value() < 1e-9);

  // Constant-vs-zero: one DC bin of 4c against three near-zero bins.
  const double c = 0.5;
  Tensor cz = Tensor::full({4, 1}, c);
  Tensor zz = Tensor::zeros({4, 1});
  CHECK(spectral_loss(cz, zz).scalar_value() == doctest::Approx(4.0 * c / 3.0).epsilon(1e-4));

  CHECK_THROWS_AS(spectral_loss(z, Tensor::zeros({6, 5})), DimensionError);
}

TEST_CASE("spectral loss gradient vs central differences") {
  Rng rng(59);
  const std::size_t l = 6, d = 3;
  // Resample until every bin of both spectra clears the kink neighborhood
  // and the per-bin difference does too.
  Tensor x, target;
  for (;;) {
    x = Tensor::zeros({l, d});
    target = Tensor::zeros({l, d});
    fill_uniform(x, rng, -1.0, 1.0);
    fill_uniform(target, rng, -1.0, 1.0);
    auto mx = rfft_magnitude(x), mt = rfft_magnitude(target);
    bool ok = true;
    for (std::size_t i = 0; i < mx.values.numel(); ++i) {
      const double a = mx.values.value_at(i), b = mt.values.value_at(i);
      if (a < 1e-3 || b < 1e-3 || std::fabs(a - b) < 1e-3) ok = false;
    }
    if (ok) break;
  }
  auto f = [&](const Tensor& v) { return spectral_loss(v, target); };
  auto report = grad_check(f, x, 1e-4, 1e-5);
  CHECK(report.passed);
}
