#pragma once

#include <functional>

#include "dbpae/tensor.hpp"

// Central-difference derivative oracles. These never touch the tape; they only
// re-evaluate caller-supplied functions, so they stay independent of the
// reverse-mode path they are used to check.

namespace dbpae {

using ScalarFn = std::function<double(const Tensor&)>;
using GradFn = std::function<Tensor(const Tensor&)>;

// (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) per component.
Tensor grad_central_difference(const ScalarFn& f, const Tensor& x, double eps);

// (grad(x + eps v) - grad(x - eps v)) / (2 eps).
Tensor hvp_finite_difference(const GradFn& grad, const Tensor& x, const Tensor& v, double eps);

// Same, with the inner gradient itself taken by central differences of f.
Tensor hvp_finite_difference(const ScalarFn& f, const Tensor& x, const Tensor& v, double eps);

// max_i |a_i - b_i| / max(norm_floor, max_i |b_i|), with b the reference.
double relative_error(const Tensor& a, const Tensor& b, double norm_floor = 1e-8);

}  // namespace dbpae
