#include "dbpae/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dbpae {

namespace {
Tensor shifted(const Tensor& x, std::size_t i, double delta) {
  std::vector<double> d(x.data().begin(), x.data().end());
  d[i] += delta;
  return Tensor(x.shape(), std::move(d));
}

Tensor axpy(const Tensor& x, double a, const Tensor& v) {
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] + a * v[i];
  return Tensor(x.shape(), std::move(d));
}
}  // namespace

Tensor grad_central_difference(const ScalarFn& f, const Tensor& x, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("grad_central_difference: eps must be positive");
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double fp = f(shifted(x, i, eps));
    double fm = f(shifted(x, i, -eps));
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return Tensor(x.shape(), std::move(g));
}

Tensor hvp_finite_difference(const GradFn& grad, const Tensor& x, const Tensor& v, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("hvp_finite_difference: eps must be positive");
  if (v.shape() != x.shape())
    throw std::invalid_argument("hvp_finite_difference: v shape " + shape_str(v.shape()) +
                                " does not match x shape " + shape_str(x.shape()));
  Tensor gp = grad(axpy(x, eps, v));
  Tensor gm = grad(axpy(x, -eps, v));
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (gp[i] - gm[i]) / (2.0 * eps);
  return Tensor(x.shape(), std::move(out));
}

Tensor hvp_finite_difference(const ScalarFn& f, const Tensor& x, const Tensor& v, double eps) {
  GradFn grad = [&](const Tensor& p) { return grad_central_difference(f, p, eps); };
  return hvp_finite_difference(grad, x, v, eps);
}

double relative_error(const Tensor& a, const Tensor& b, double norm_floor) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double max_diff = 0.0, max_ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(a[i] - b[i]));
    max_ref = std::max(max_ref, std::abs(b[i]));
  }
  return max_diff / std::max(norm_floor, max_ref);
}

}  // namespace dbpae
