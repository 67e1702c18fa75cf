#pragma once

#include <functional>
#include <vector>

#include "s2kd/tensor.hpp"

// Central-difference verification of analytic gradients. Always runs in
// 64-bit mode: finite differences in 32-bit lose too many digits to separate
// a wrong gradient from rounding noise.

namespace s2kd {

struct GradCheckReport {
  std::vector<double> analytic;  // per coordinate of x
  std::vector<double> numeric;   // (f(x + h e_i) - f(x - h e_i)) / 2h
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double tol = 0.0;
  bool passed = false;
};

// f must map x to a scalar tensor. x is copied to 64-bit internally; the
// default dtype is also forced to 64-bit while f runs so constants created
// inside f match. Relative error uses max(|analytic|, |numeric|, 1) as the
// denominator so near-zero gradients are judged on absolute error.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double h = 1e-4, double tol = 1e-5);

// Registered suite covering every differentiable op plus the composite
// losses (semantic, spectral, and the full student objective). Each entry
// probes every input of its op with fixed seeded data, so repeated runs and
// filtered runs see identical numbers.
struct SuiteResult {
  std::string op;     // registered name
  std::string input;  // which argument of the op was probed
  GradCheckReport report;
};

std::vector<std::string> gradcheck_suite_names();

// Empty filter runs everything; an unknown name raises UsageError listing
// the registered names. Forces 64-bit mode for the duration.
std::vector<SuiteResult> run_gradcheck_suite(const std::string& filter, double tol = 1e-5);

}  // namespace s2kd
