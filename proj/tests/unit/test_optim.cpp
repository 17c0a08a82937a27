#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "sottac/optim.hpp"
#include "sottac/oracle.hpp"
#include "test_support.hpp"

using namespace sottac;

namespace {

FunctionOperator dense_op(const oracle::Matrix& m) {
  return FunctionOperator(static_cast<std::size_t>(m.rows()), [m](std::span<const double> v) {
    const Eigen::Map<const Eigen::VectorXd> ve(v.data(), v.size());
    const Eigen::VectorXd r = m * ve;
    return ParamVector(r.data(), r.data() + r.size());
  });
}

oracle::Matrix random_spd(std::size_t d, Rng& rng, double shift) {
  oracle::Matrix a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a(i, j) = rng.normal();
  return a * a.transpose() / double(d) + shift * oracle::Matrix::Identity(d, d);
}

double angle(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i];
  return std::acos(std::clamp(ab / (test::norm(a) * test::norm(b)), -1.0, 1.0));
}

}  // namespace

TEST_CASE("step-size bound") {
  CHECK(step_size_bound({1.0, 2.0, 0, true}, 4.0) == 2.0 / 7.0);
  CHECK(step_size_bound({1.0, 1.0, 0, true}, 1.0) == std::numeric_limits<double>::infinity());
  const double approx = step_size_bound({0.01, 100.0, 0, true}, 100.0);
  CHECK(approx == doctest::Approx(2.0 * 1e-4 / (1e4)).epsilon(1e-7));
  CHECK_THROWS_AS(step_size_bound({0.0, 1.0, 0, true}, 1.0), ContractViolation);
}

TEST_CASE("policy gradient with zero weights is zero") {
  Rng rng(1);
  test::SoftmaxFixture fx(3, 2, 10, rng);
  const std::vector<double> w(fx.batch.size(), 0.0);
  CHECK(test::norm(policy_gradient(fx.batch, fx.policy, w)) == 0.0);
}

TEST_CASE("P = lambda I gives d = g / lambda for natural and Newton rules") {
  Rng rng(2);
  const auto g = test::random_vector(7, rng);
  FunctionOperator op(7, [](std::span<const double> v) {
    ParamVector r(v.begin(), v.end());
    for (double& x : r) x *= 4.0;
    return r;
  });
  for (const UpdateRule& rule : {UpdateRule{NaturalRule{}}, UpdateRule{NewtonRule{}}}) {
    const auto dir = solve_direction(rule, &op, g, &rng);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(dir.d[i] - g[i] / 4.0) < 1e-10);
    CHECK_FALSE(dir.report.screening_triggered);
  }
  NewtonRule fp;
  fp.solver = Solver::FixedPoint;
  const auto dir = solve_direction(fp, &op, g, &rng);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(dir.d[i] - g[i] / 4.0) < 1e-10);
}

TEST_CASE("isotropic natural rule keeps the gradient direction") {
  Rng rng(3);
  const auto g = test::random_vector(5, rng);
  const auto op = dense_op(2.5 * oracle::Matrix::Identity(5, 5));
  const auto dir = solve_direction(NaturalRule{}, &op, g);
  CHECK(angle(dir.d, g) < 1e-6);
}

TEST_CASE("CG matches a dense solve within 1e-6 relative") {
  Rng rng(4);
  for (std::size_t d : {2u, 5u, 8u}) {
    const auto m = random_spd(d, rng, 0.2);
    const auto op = dense_op(m);
    const auto b = test::random_vector(d, rng);
    const auto cg = conjugate_gradient(op, b, static_cast<int>(d) + 2, 1e-12);
    CHECK(test::rel_error(cg.x, oracle::dense_solve(m, b)) < 1e-6);
    CHECK_FALSE(cg.negative_curvature);
    CHECK(cg.iterations <= static_cast<int>(d) + 2);
  }
}

TEST_CASE("screening falls back to the gradient on an indefinite operator") {
  Rng rng(5);
  oracle::Matrix m = oracle::Matrix::Identity(4, 4);
  m(0, 0) = -3.0;
  const auto op = dense_op(m);
  const std::vector<double> g = {1.0, 0.0, 0.0, 0.0};
  NewtonRule rule;
  rule.fallback_alpha = 1e-3;
  const auto dir = solve_direction(rule, &op, g, &rng);
  CHECK(dir.report.screening_triggered);
  CHECK(dir.report.fallback_used);
  CHECK(dir.report.alpha_used == 1e-3);
  CHECK(dir.d == g);
  CHECK(dir.report.m_hat < 0.0);
}

TEST_CASE("every accepted Newton direction has positive curvature") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_spd(6, rng, trial % 2 == 0 ? 0.05 : -0.3);
    const auto op = dense_op(m);
    const auto g = test::random_vector(6, rng);
    const auto dir = solve_direction(NewtonRule{}, &op, g, &rng);
    if (!dir.report.screening_triggered) {
      const auto pd = op.apply(dir.d);
      double q = 0.0;
      for (std::size_t i = 0; i < pd.size(); ++i) q += dir.d[i] * pd[i];
      CHECK(q > 0.0);
      CHECK(dir.report.min_cg_curvature > 0.0);
    }
  }
}

TEST_CASE("Newton step on a concave quadratic reaches the maximizer; gradient steps climb") {
  // f(theta) = -1/2 theta^T A theta + b^T theta, maximizer A^{-1} b.
  Rng rng(7);
  const auto a = random_spd(4, rng, 0.5);
  const auto b = test::random_vector(4, rng);
  SoftmaxLinearPolicy carrier(2, 2);  // 4 parameters, only used as a theta holder
  carrier.set_params(test::random_vector(4, rng));
  auto value = [&](std::span<const double> th) {
    const Eigen::Map<const Eigen::VectorXd> t(th.data(), th.size());
    const Eigen::Map<const Eigen::VectorXd> be(b.data(), b.size());
    return -0.5 * t.dot(a * t) + be.dot(t);
  };
  auto grad = [&](std::span<const double> th) {
    const Eigen::Map<const Eigen::VectorXd> t(th.data(), th.size());
    const Eigen::Map<const Eigen::VectorXd> be(b.data(), b.size());
    const Eigen::VectorXd g = be - a * t;
    return ParamVector(g.data(), g.data() + g.size());
  };

  // Vanilla, small alpha: monotone ascent.
  SoftmaxLinearPolicy pv(2, 2);
  pv.set_params(carrier.params());
  double prev = value(pv.params());
  for (int k = 0; k < 20; ++k) {
    const auto g = grad(pv.params());
    const auto dir = solve_direction(VanillaRule{1e-2}, nullptr, g);
    pv.set_params(apply_update(pv, dir.d, 1e-2));
    const double now = value(pv.params());
    CHECK(now >= prev);
    prev = now;
  }

  // P = lambda I - H with H = -A and lambda = 0 is A itself.
  const auto op = dense_op(a);
  NewtonRule rule;
  rule.alpha = 1.0;
  rule.damping = 0.0;
  rule.cg_tol = 1e-14;
  const auto dir = solve_direction(rule, &op, grad(carrier.params()), &rng);
  const auto theta = apply_update(carrier, dir.d, 1.0);
  const auto opt = oracle::dense_solve(a, b);
  CHECK(test::max_abs_diff(theta, opt) < 1e-8);
}

TEST_CASE("apply_update with alpha = 0 leaves theta unchanged and rejects non-finite steps") {
  Rng rng(8);
  SoftmaxLinearPolicy pi(2, 2);
  pi.set_params(test::random_vector(4, rng));
  const std::vector<double> before(pi.params().begin(), pi.params().end());
  CHECK(apply_update(pi, test::random_vector(4, rng), 0.0) == before);
  CHECK_THROWS_AS(apply_update(pi, std::vector<double>{NAN, 0, 0, 0}, 1.0), NumericalError);
  CHECK_THROWS_AS(apply_update(pi, std::vector<double>{1e308, 0, 0, 0}, 1e10), NumericalError);
}

TEST_CASE("non-finite gradients are rejected") {
  CHECK_THROWS_AS(solve_direction(VanillaRule{}, nullptr, std::vector<double>{NAN}),
                  NumericalError);
  CHECK_THROWS_AS(solve_direction(NewtonRule{}, nullptr, std::vector<double>{1.0}),
                  ContractViolation);
}

TEST_CASE("rule validation") {
  CHECK_THROWS_AS(validate_rule(VanillaRule{-1.0}), ContractViolation);
  NewtonRule r;
  r.cg_iters = 0;
  CHECK_THROWS_AS(validate_rule(r), ContractViolation);
  CHECK(rule_alpha(NaturalRule{}) == 5e-2);
}

TEST_CASE("same inputs give bitwise identical directions") {
  Rng rng(9);
  test::SoftmaxFixture fx(3, 2, 30, rng);
  const auto w = test::random_vector(fx.batch.size(), rng);
  const auto g = policy_gradient(fx.batch, fx.policy, w);
  CurvatureOperator op(CurvatureKind::Acgn2, fx.policy, fx.batch, std::vector<double>(w.size(), 1.0),
                       0.1);
  Rng r1(5), r2(5);
  const auto a = solve_direction(NewtonRule{}, &op, g, &r1);
  const auto b = solve_direction(NewtonRule{}, &op, g, &r2);
  CHECK(a.d == b.d);
  CHECK(a.report.m_hat == b.report.m_hat);
}

TEST_CASE("reported wall clock is positive and grows with the CG budget") {
  Rng rng(10);
  test::SoftmaxFixture fx(4, 3, 400, rng);
  const std::vector<double> w(fx.batch.size(), 1.0);
  const auto g = policy_gradient(fx.batch, fx.policy, test::random_vector(fx.batch.size(), rng));
  CurvatureOperator op(CurvatureKind::Fisher, fx.policy, fx.batch, w, 0.5);
  auto median_ns = [&](int iters) {
    NaturalRule rule;
    rule.cg_iters = iters;
    rule.cg_tol = 1e-300;  // never stop on the residual
    std::vector<std::int64_t> t;
    for (int r = 0; r < 21; ++r) {
      const auto dir = solve_direction(rule, &op, g);
      CHECK(dir.report.wall_clock_ns > 0);
      t.push_back(dir.report.wall_clock_ns);
    }
    std::nth_element(t.begin(), t.begin() + 10, t.end());
    return t[10];
  };
  const auto t1 = median_ns(1);
  const auto t4 = median_ns(4);
  const auto t12 = median_ns(12);
  MESSAGE("median ns at 1/4/12 CG iterations: " << t1 << " " << t4 << " " << t12);
  CHECK(t1 <= t4);
  CHECK(t4 <= t12);
}
