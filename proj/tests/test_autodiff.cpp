#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dbpae/finite_diff.hpp"
#include "dbpae/tape.hpp"
#include "graph_gen.hpp"

using namespace dbpae;

TEST_CASE("recorded op values") {
  Tape t;
  Var a = t.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  Var b = t.constant(Tensor({2, 1}, {1, 1}));
  Var c = t.matmul(a, b);
  CHECK(c.value() == Tensor({2, 1}, {3, 7}));

  CHECK(t.sigmoid(t.constant(Tensor::scalar(0.0))).value().item() == 0.5);
  CHECK(t.log(t.exp(t.constant(Tensor::scalar(2.5)))).value().item() ==
        doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("shape errors name the op and shapes") {
  Tape t;
  Var a = t.constant(Tensor::zeros({2, 3}));
  Var b = t.constant(Tensor::zeros({3}));
  CHECK_THROWS_WITH_AS(t.add(a, b), "add: shape mismatch [2 3] vs [3]", ShapeError);
  CHECK_THROWS_AS(t.matmul(a, a), ShapeError);
  CHECK_THROWS_AS(t.transpose(b), ShapeError);
  CHECK_THROWS_AS(t.slice_cols(a, 2, 2), ShapeError);
  CHECK_THROWS_AS(t.broadcast_to(a, {4, 3}), ShapeError);
}

TEST_CASE("backward of sum of squares") {
  Tape t;
  Var x = t.leaf(Tensor({3}, {1, 2, 3}), true);
  Var loss = t.sum(t.square(x));
  auto gm = t.backward(loss, {x}, false);
  CHECK(gm.value(x) == Tensor({3}, {2, 4, 6}));
}

TEST_CASE("backward preconditions") {
  Tape t;
  Var x = t.leaf(Tensor({3}, {1, 2, 3}), true);
  Var y = t.square(x);
  CHECK_THROWS_AS(t.backward(y, {x}, false), ShapeError);  // non-scalar loss
  Tape other;
  Var z = other.leaf(Tensor::scalar(1.0), true);
  Var loss = t.sum(y);
  CHECK_THROWS_AS(t.backward(loss, {z}, false), std::logic_error);  // not on this tape
}

TEST_CASE("constant loss gives zero gradients") {
  Tape t;
  Var x = t.leaf(Tensor({4}, {1, 2, 3, 4}), true);
  Var loss = t.sum(t.constant(Tensor({2}, {5, 6})));
  auto gm = t.backward(loss, {x}, false);
  CHECK(gm.value(x) == Tensor::zeros({4}));
}

TEST_CASE("double backward of a squared gradient norm") {
  // f = x1^2 x2; L2 = |grad_x f|^2 = 4 x1^2 x2^2 + x1^4; dL2/dx = (12, 8) at (1,1)
  Tape t;
  Var x = t.leaf(Tensor({2}, {1, 1}), true);
  Var x1 = t.slice_cols(x, 0, 1);
  Var x2 = t.slice_cols(x, 1, 2);
  Var f = t.sum(t.mul(t.square(x1), x2));
  auto gm = t.backward(f, {x}, true);
  CHECK(gm.value(x) == Tensor({2}, {2, 1}));  // (2 x1 x2, x1^2)
  Var l2 = t.sum(t.square(gm.node(x)));
  CHECK(l2.value().item() == doctest::Approx(5.0));
  auto gm2 = t.backward(l2, {x}, false);
  CHECK(gm2.value(x)[0] == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(gm2.value(x)[1] == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("create_graph=false truncates backward bookkeeping") {
  Tape t;
  Var x = t.leaf(Tensor({3}, {1, 2, 3}), true);
  Var loss = t.mean(t.square(x));
  std::size_t before = t.size();
  auto gm = t.backward(loss, {x}, false);
  CHECK(t.size() == before);
  CHECK(gm.value(x)[2] == doctest::Approx(2.0));
  CHECK_THROWS_AS(gm.node(x), std::logic_error);
}

TEST_CASE("first-order gradcheck on random graphs") {
  Rng rng(2024);
  const double eps = 1e-5, tol = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<Tensor> leaves;
    auto prog = testgen::random_program(rng, leaves);
    Tape tape;
    auto vals = testgen::replay(prog, tape, leaves);
    Var loss = vals.back();
    Var x0 = vals[0], x1 = vals[1];
    auto gm = tape.backward(loss, {x0, x1}, false);
    for (int slot = 0; slot < 2; ++slot) {
      ScalarFn f = [&, slot](const Tensor& p) {
        std::vector<Tensor> lv = leaves;
        lv[static_cast<std::size_t>(slot)] = p;
        return testgen::eval_program(prog, lv);
      };
      Tensor fd = grad_central_difference(f, leaves[static_cast<std::size_t>(slot)], eps);
      Tensor ad = gm.value(slot == 0 ? x0 : x1);
      CAPTURE(trial);
      CAPTURE(slot);
      CHECK(relative_error(ad, fd) <= tol);
      ++checked;
    }
  }
  CHECK(checked == 120);
}

TEST_CASE("second-order gradcheck against finite-difference HVP") {
  Rng rng(77);
  const double tol = 1e-4;
  for (int trial = 0; trial < 15; ++trial) {
    std::vector<Tensor> leaves;
    auto prog = testgen::random_program(rng, leaves);
    Tape tape;
    auto vals = testgen::replay(prog, tape, leaves);
    Var loss = vals.back();
    Var x = vals[0];
    auto g1 = tape.backward(loss, {x}, true);
    Var l2 = tape.sum(tape.square(g1.node(x)));
    auto g2 = tape.backward(l2, {x}, false);

    GradFn grad = [&](const Tensor& p) {
      std::vector<Tensor> lv = leaves;
      lv[0] = p;
      Tape t;
      auto vs = testgen::replay(prog, t, lv);
      return t.backward(vs.back(), {vs[0]}, false).value(vs[0]);
    };
    Tensor hv = hvp_finite_difference(grad, leaves[0], g1.value(x), 1e-5);
    std::vector<double> want(hv.size());
    for (std::size_t i = 0; i < want.size(); ++i) want[i] = 2.0 * hv[i];
    CAPTURE(trial);
    CHECK(relative_error(g2.value(x), Tensor(hv.shape(), std::move(want))) <= tol);
  }
}

TEST_CASE("backward is linear in the loss") {
  Tape t;
  Var x = t.leaf(Tensor({3}, {0.3, -0.7, 1.1}), true);
  Var f = t.sum(t.square(x));
  Var g = t.sum(t.sigmoid(x));
  double a = 2.5, b = -0.75;
  Var h = t.add(t.scalar_mul(f, a), t.scalar_mul(g, b));
  Tensor gh = t.backward(h, {x}, false).value(x);
  Tensor gf = t.backward(f, {x}, false).value(x);
  Tensor gg = t.backward(g, {x}, false).value(x);
  for (std::size_t i = 0; i < gh.size(); ++i)
    CHECK(gh[i] == doctest::Approx(a * gf[i] + b * gg[i]).epsilon(1e-14));
}

TEST_CASE("gradients are deterministic bit for bit") {
  auto run = [] {
    Rng rng(5150);
    std::vector<Tensor> leaves;
    auto prog = testgen::random_program(rng, leaves);
    Tape tape;
    auto vals = testgen::replay(prog, tape, leaves);
    return tape.backward(vals.back(), {vals[0], vals[1]}, false).value(vals[0]);
  };
  CHECK(run() == run());
}

TEST_CASE("finite-difference HVP oracle") {
  // f = 0.5 |x|^2 has identity Hessian: HVP returns v for any v.
  ScalarFn half_sq = [](const Tensor& p) {
    double s = 0.0;
    for (double v : p.data()) s += v * v;
    return 0.5 * s;
  };
  Tensor x({3}, {0.4, -1.0, 2.0});
  Tensor v({3}, {1.0, -2.0, 0.5});
  Tensor hv = hvp_finite_difference(half_sq, x, v, 1e-5);
  CHECK(relative_error(hv, v) < 1e-5);

  // f = x1^2 x2 at (1,1), v = (1,0): H v = (2, 2)
  ScalarFn f = [](const Tensor& p) { return p[0] * p[0] * p[1]; };
  Tensor x2({2}, {1, 1});
  Tensor hv2 = hvp_finite_difference(f, x2, Tensor({2}, {1, 0}), 1e-4);
  CHECK(hv2[0] == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(hv2[1] == doctest::Approx(2.0).epsilon(1e-4));

  CHECK_THROWS_AS(hvp_finite_difference(f, x2, Tensor({3}, {1, 0, 0}), 1e-4),
                  std::invalid_argument);
  CHECK_THROWS_AS(hvp_finite_difference(f, x2, Tensor({2}, {1, 0}), 0.0), std::invalid_argument);
}

TEST_CASE("HVP error shrinks quadratically in eps for smooth f") {
  // f = sum(exp(x/2)); compare successive halvings of eps
  ScalarFn f = [](const Tensor& p) {
    double s = 0.0;
    for (double v : p.data()) s += std::exp(0.5 * v);
    return s;
  };
  Tensor x({3}, {0.2, -0.4, 0.9});
  Tensor v({3}, {1.0, 0.5, -1.0});
  // exact gradient is cheap here, use it inside the HVP
  GradFn grad = [](const Tensor& p) {
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.5 * std::exp(0.5 * p[i]);
    return Tensor(p.shape(), std::move(g));
  };
  auto diff_norm = [&](double e1, double e2) {
    Tensor a = hvp_finite_difference(grad, x, v, e1);
    Tensor b = hvp_finite_difference(grad, x, v, e2);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  double d1 = diff_norm(2e-3, 1e-3);
  double d2 = diff_norm(1e-3, 5e-4);
  CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.25));
}
