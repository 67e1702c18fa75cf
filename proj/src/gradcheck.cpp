#include "s2kd/gradcheck.hpp"

#include <cmath>

namespace s2kd {

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0,
                           double h, double tol) {
  DtypeGuard guard(Dtype::f64);
  Tensor x = x0.astype(Dtype::f64);
  x.set_requires_grad(true);

  GradCheckReport report;
  report.tol = tol;
  const std::size_t n = x.numel();

  {
    Tape tape;
    TapeScope scope(tape);
    Tensor y = f(x);
    if (y.numel() != 1)
      throw ContractError("grad_check: function output must be a scalar, got shape " +
                          shape_str(y.shape()));
    tape.backward(y);
  }
  report.analytic = x.has_grad() ? x.grad_to_values() : std::vector<double>(n, 0.0);

  report.numeric.resize(n);
  {
    NoTapeScope no_tape;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x.value_at(i);
      x.set_value_at(i, v + h);
      const double fp = f(x).scalar_value();
      x.set_value_at(i, v - h);
      const double fm = f(x).scalar_value();
      x.set_value_at(i, v);
      report.numeric[i] = (fp - fm) / (2.0 * h);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const double a = report.analytic[i], num = report.numeric[i];
    const double denom = std::max({std::fabs(a), std::fabs(num), 1.0});
    const double rel = std::fabs(a - num) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_index = i;
    }
  }
  report.passed = report.max_rel_err <= tol;
  return report;
}

}  // namespace s2kd
