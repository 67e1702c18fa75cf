#include <algorithm>
#include <cmath>

#include "s2kd/distill.hpp"
#include "s2kd/gradcheck.hpp"
#include "s2kd/rng.hpp"
#include "s2kd/spectral.hpp"

namespace s2kd {

namespace {

Tensor probe(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor t = Tensor::zeros(shape, Dtype::f64);
  fill_uniform(t, rng, lo, hi);
  return t;
}

// Values bounded away from zero so |x| and sqrt are smooth across the
// finite-difference step.
Tensor signed_probe(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(numel(shape));
  for (double& x : v) {
    const double mag = rng.uniform(0.3, 1.2);
    x = rng.uniform() < 0.5 ? -mag : mag;
  }
  return Tensor::from_values(shape, v, Dtype::f64);
}

// Scalarizes an op output with fixed random weights; a plain sum would hand
// every element the same gradient and hide layout mistakes.
Tensor weigh(const Tensor& out, std::uint64_t seed) {
  return mean(mul(out, probe(out.shape(), seed).detached()));
}

using CaseFn = std::function<std::vector<SuiteResult>(double tol)>;

struct SuiteCase {
  std::string name;
  CaseFn run;
};

SuiteResult check_one(const std::string& op, const std::string& input,
                      const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                      double tol) {
  return {op, input, grad_check(f, x, 1e-4, tol)};
}

std::vector<SuiteCase> build_registry() {
  std::vector<SuiteCase> cases;
  auto binary = [&](const std::string& name, Tensor (*op)(const Tensor&, const Tensor&)) {
    cases.push_back({name, [name, op](double tol) {
                       Tensor a = probe({3, 4}, 11);
                       Tensor b = probe({3, 4}, 12);
                       auto via_a = [&](const Tensor& v) { return weigh(op(v, b), 13); };
                       auto via_b = [&](const Tensor& v) { return weigh(op(a, v), 13); };
                       return std::vector<SuiteResult>{
                           check_one(name, "lhs", via_a, a, tol),
                           check_one(name, "rhs", via_b, b, tol)};
                     }});
  };
  binary("add", add);
  binary("sub", sub);
  binary("mul", mul);

  cases.push_back({"scale", [](double tol) {
                     Tensor a = probe({3, 4}, 21);
                     auto f = [](const Tensor& v) { return weigh(scale(v, 1.7), 22); };
                     return std::vector<SuiteResult>{check_one("scale", "input", f, a, tol)};
                   }});
  cases.push_back({"abs", [](double tol) {
                     Tensor a = signed_probe({3, 4}, 31);
                     auto f = [](const Tensor& v) { return weigh(abs(v), 32); };
                     return std::vector<SuiteResult>{check_one("abs", "input", f, a, tol)};
                   }});
  cases.push_back({"square", [](double tol) {
                     Tensor a = probe({3, 4}, 41);
                     auto f = [](const Tensor& v) { return weigh(square(v), 42); };
                     return std::vector<SuiteResult>{
                         check_one("square", "input", f, a, tol)};
                   }});
  cases.push_back({"sqrt_eps", [](double tol) {
                     Tensor a = probe({3, 4}, 51, 0.2, 2.0);
                     auto f = [](const Tensor& v) { return weigh(sqrt_eps(v), 52); };
                     return std::vector<SuiteResult>{
                         check_one("sqrt_eps", "input", f, a, tol)};
                   }});
  cases.push_back({"matmul", [](double tol) {
                     Tensor a = probe({3, 4}, 61);
                     Tensor b = probe({4, 2}, 62);
                     auto via_a = [&](const Tensor& v) { return weigh(matmul(v, b), 63); };
                     auto via_b = [&](const Tensor& v) { return weigh(matmul(a, v), 63); };
                     return std::vector<SuiteResult>{
                         check_one("matmul", "lhs", via_a, a, tol),
                         check_one("matmul", "rhs", via_b, b, tol)};
                   }});
  cases.push_back({"transpose", [](double tol) {
                     Tensor a = probe({3, 5}, 71);
                     auto f = [](const Tensor& v) { return weigh(transpose(v), 72); };
                     return std::vector<SuiteResult>{
                         check_one("transpose", "input", f, a, tol)};
                   }});
  cases.push_back({"reshape", [](double tol) {
                     Tensor a = probe({3, 4}, 81);
                     auto f = [](const Tensor& v) {
                       return weigh(reshape(v, {2, 6}), 82);
                     };
                     return std::vector<SuiteResult>{
                         check_one("reshape", "input", f, a, tol)};
                   }});
  cases.push_back({"softmax", [](double tol) {
                     Tensor a = probe({3, 5}, 91, -2.0, 2.0);
                     auto rows = [](const Tensor& v) { return weigh(softmax(v, 1), 92); };
                     auto cols = [](const Tensor& v) { return weigh(softmax(v, 0), 93); };
                     return std::vector<SuiteResult>{
                         check_one("softmax", "input (axis 1)", rows, a, tol),
                         check_one("softmax", "input (axis 0)", cols, a, tol)};
                   }});
  cases.push_back({"layer_norm", [](double tol) {
                     Tensor x = probe({3, 5}, 101);
                     Tensor g = probe({5}, 102, 0.5, 1.5);
                     Tensor b = probe({5}, 103);
                     auto via_x = [&](const Tensor& v) {
                       return weigh(layer_norm(v, g, b), 104);
                     };
                     auto via_g = [&](const Tensor& v) {
                       return weigh(layer_norm(x, v, b), 104);
                     };
                     auto via_b = [&](const Tensor& v) {
                       return weigh(layer_norm(x, g, v), 104);
                     };
                     return std::vector<SuiteResult>{
                         check_one("layer_norm", "input", via_x, x, tol),
                         check_one("layer_norm", "gain", via_g, g, tol),
                         check_one("layer_norm", "bias", via_b, b, tol)};
                   }});
  cases.push_back({"sum", [](double tol) {
                     Tensor a = probe({4, 3}, 111);
                     auto f = [](const Tensor& v) { return sum(v); };
                     return std::vector<SuiteResult>{check_one("sum", "input", f, a, tol)};
                   }});
  cases.push_back({"mean", [](double tol) {
                     Tensor a = probe({4, 3}, 121);
                     auto f = [](const Tensor& v) { return mean(v); };
                     return std::vector<SuiteResult>{check_one("mean", "input", f, a, tol)};
                   }});
  cases.push_back({"slice_rows", [](double tol) {
                     Tensor a = probe({5, 3}, 131);
                     auto f = [](const Tensor& v) {
                       return weigh(slice_rows(v, 1, 4), 132);
                     };
                     return std::vector<SuiteResult>{
                         check_one("slice_rows", "input", f, a, tol)};
                   }});
  cases.push_back({"slice_cols", [](double tol) {
                     Tensor a = probe({3, 6}, 141);
                     auto f = [](const Tensor& v) {
                       return weigh(slice_cols(v, 2, 5), 142);
                     };
                     return std::vector<SuiteResult>{
                         check_one("slice_cols", "input", f, a, tol)};
                   }});
  cases.push_back({"concat_rows", [](double tol) {
                     Tensor a = probe({2, 3}, 151);
                     Tensor b = probe({3, 3}, 152);
                     auto via_a = [&](const Tensor& v) {
                       return weigh(concat_rows({v, b}), 153);
                     };
                     auto via_b = [&](const Tensor& v) {
                       return weigh(concat_rows({a, v}), 153);
                     };
                     return std::vector<SuiteResult>{
                         check_one("concat_rows", "first part", via_a, a, tol),
                         check_one("concat_rows", "second part", via_b, b, tol)};
                   }});
  cases.push_back({"concat_cols", [](double tol) {
                     Tensor a = probe({3, 2}, 161);
                     Tensor b = probe({3, 4}, 162);
                     auto via_a = [&](const Tensor& v) {
                       return weigh(concat_cols({v, b}), 163);
                     };
                     auto via_b = [&](const Tensor& v) {
                       return weigh(concat_cols({a, v}), 163);
                     };
                     return std::vector<SuiteResult>{
                         check_one("concat_cols", "first part", via_a, a, tol),
                         check_one("concat_cols", "second part", via_b, b, tol)};
                   }});
  cases.push_back({"add_bias", [](double tol) {
                     Tensor x = probe({3, 4}, 171);
                     Tensor b = probe({4}, 172);
                     auto via_x = [&](const Tensor& v) { return weigh(add_bias(v, b), 173); };
                     auto via_b = [&](const Tensor& v) { return weigh(add_bias(x, v), 173); };
                     return std::vector<SuiteResult>{
                         check_one("add_bias", "input", via_x, x, tol),
                         check_one("add_bias", "bias", via_b, b, tol)};
                   }});
  cases.push_back({"permute_elements", [](double tol) {
                     Tensor a = probe({2, 6}, 181);
                     Rng rng(182);
                     std::vector<std::size_t> perm(12);
                     for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
                     for (std::size_t i = perm.size(); i > 1; --i)
                       std::swap(perm[i - 1], perm[rng.below(i)]);
                     auto f = [&](const Tensor& v) {
                       return weigh(permute_elements(v, perm, {3, 4}), 183);
                     };
                     return std::vector<SuiteResult>{
                         check_one("permute_elements", "input", f, a, tol)};
                   }});

  cases.push_back({"semantic_loss", [](double tol) {
                     Tensor zp = probe({4, 6}, 191);
                     Tensor zf = probe({4, 6}, 192);
                     auto f = [&](const Tensor& v) { return semantic_loss(v, zf); };
                     return std::vector<SuiteResult>{
                         check_one("semantic_loss", "student latent", f, zp, tol)};
                   }});
  cases.push_back({"spectral_loss", [](double tol) {
                     Tensor zp8 = probe({8, 4}, 201);
                     Tensor zf8 = probe({8, 4}, 202);
                     Tensor zp6 = probe({6, 3}, 203);
                     Tensor zf6 = probe({6, 3}, 204);
                     auto f8 = [&](const Tensor& v) { return spectral_loss(v, zf8); };
                     auto f6 = [&](const Tensor& v) { return spectral_loss(v, zf6); };
                     return std::vector<SuiteResult>{
                         check_one("spectral_loss", "student latent (radix-2 length)", f8,
                                   zp8, tol),
                         check_one("spectral_loss", "student latent (general length)", f6,
                                   zp6, tol)};
                   }});
  cases.push_back(
      {"student_objective", [](double tol) {
         Tensor truth = probe({2, 8}, 211);
         Tensor pred = probe({2, 8}, 212);
         Tensor zp = probe({8, 4}, 213);
         Tensor zf = probe({8, 4}, 214);
         DistillConfig dc;  // full mode, lambda 1.0, beta 0.5
         auto total = [&](const Tensor& p, const Tensor& z) {
           return add(pred_loss(p, truth), scale(distill_loss(z, zf, dc), dc.lambda));
         };
         auto via_pred = [&](const Tensor& v) { return total(v, zp); };
         auto via_proj = [&](const Tensor& v) { return total(pred, v); };
         return std::vector<SuiteResult>{
             check_one("student_objective", "prediction", via_pred, pred, tol),
             check_one("student_objective", "student latent", via_proj, zp, tol)};
       }});
  return cases;
}

const std::vector<SuiteCase>& registry() {
  static const std::vector<SuiteCase> cases = build_registry();
  return cases;
}

}  // namespace

std::vector<std::string> gradcheck_suite_names() {
  std::vector<std::string> names;
  names.reserve(registry().size());
  for (const SuiteCase& c : registry()) names.push_back(c.name);
  return names;
}

std::vector<SuiteResult> run_gradcheck_suite(const std::string& filter, double tol) {
  DtypeGuard guard(Dtype::f64);
  if (!filter.empty()) {
    const auto& reg = registry();
    const auto it = std::find_if(reg.begin(), reg.end(),
                                 [&](const SuiteCase& c) { return c.name == filter; });
    if (it == reg.end()) {
      std::string names;
      for (const std::string& n : gradcheck_suite_names())
        names += (names.empty() ? "" : ", ") + n;
      throw UsageError("unknown op '" + filter + "'; registered ops: " + names);
    }
    return it->run(tol);
  }
  std::vector<SuiteResult> all;
  for (const SuiteCase& c : registry()) {
    std::vector<SuiteResult> part = c.run(tol);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

}  // namespace s2kd
