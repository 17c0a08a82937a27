#include <doctest.h>

#include <cmath>

#include "sottac/checks.hpp"
#include "sottac/oracle.hpp"
#include "test_support.hpp"

using namespace sottac;
namespace o = sottac::oracle;

TEST_CASE("fd_gradient of a quadratic and of a constant") {
  const std::vector<double> th = {1.0, 2.0};
  const auto g = o::fd_gradient([](std::span<const double> t) { return t[0] * t[0] + t[1] * t[1]; },
                                th);
  CHECK(std::abs(g[0] - 2.0) < 1e-8);
  CHECK(std::abs(g[1] - 4.0) < 1e-8);
  const auto z = o::fd_gradient([](std::span<const double>) { return 3.0; }, th);
  CHECK(z == std::vector<double>{0.0, 0.0});
}

TEST_CASE("fd_gradient names the coordinate of a non-finite evaluation") {
  const std::vector<double> th = {0.0, 0.0};
  try {
    o::fd_gradient([](std::span<const double> t) { return t[1] > 0 ? NAN : 0.0; }, th);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("fd_hessian_dense of a quadratic form is A + A^T; linear gives zero") {
  Rng rng(1);
  const std::size_t d = 5;
  o::Matrix a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a(i, j) = rng.normal();
  auto f = [&](std::span<const double> t) {
    const Eigen::Map<const Eigen::VectorXd> v(t.data(), t.size());
    return v.dot(a * v);
  };
  const auto th = test::random_vector(d, rng);
  const auto h = o::fd_hessian_dense(f, th, o::FdSpec{1e-4, false});
  CHECK((h - (a + a.transpose())).norm() < 1e-6 * a.norm());
  const auto lin = o::fd_hessian_dense([](std::span<const double> t) { return 2.0 * t[0] - t[3]; },
                                       th);
  CHECK(lin.norm() < 1e-6);
  CHECK_THROWS_AS(o::fd_hessian_dense(f, std::vector<double>(33, 0.0)), ContractViolation);
}

TEST_CASE("exact_q_v examples") {
  Rng rng(2);
  TinyMdp m = TinyMdp::random(rng, 2, 3, 0.9);
  for (auto& row : m.reward) row[0] = row[1] = 1.0;
  SoftmaxLinearPolicy pi(2, 2);
  const auto theta = test::random_vector(pi.dim(), rng);
  auto tables = o::exact_q_v(m, pi, theta);
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a) CHECK(tables.q[0][s][a] == doctest::Approx(2.71).epsilon(1e-14));

  TinyMdp g0 = TinyMdp::random(rng, 2, 3, 0.0);
  tables = o::exact_q_v(g0, pi, theta);
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a) CHECK(tables.q[0][s][a] == g0.reward[s][a]);

  TinyMdp r = TinyMdp::random(rng, 3, 4, 0.8);
  SoftmaxLinearPolicy pr(3, 2);
  const auto tr = test::random_vector(pr.dim(), rng);
  tables = o::exact_q_v(r, pr, tr);
  const auto p = policy_table(r, pr, tr);
  REQUIRE(tables.q.size() == 5);
  for (int t = 0; t < 4; ++t)
    for (int s = 0; s < 2; ++s)
      CHECK(std::abs(tables.v[t][s] - (p[s][0] * tables.q[t][s][0] + p[s][1] * tables.q[t][s][1])) <
            1e-12);
  double j = 0.0;
  for (int s = 0; s < 2; ++s) j += r.initial[s] * tables.v[0][s];
  CHECK(j == doctest::Approx(enumerate_exact_J(r, pr, tr)).epsilon(1e-14));
}

TEST_CASE("dense_operator of an empty-batch operator is lambda I") {
  SoftmaxLinearPolicy pi(2, 3);
  CurvatureOperator op(CurvatureKind::Acgn1, pi, SampleBatch(2), {}, 0.7);
  const auto m = o::dense_operator(op);
  CHECK((m - 0.7 * o::Matrix::Identity(6, 6)).norm() == 0.0);
}

TEST_CASE("exact gradient matches the finite-difference gradient of J") {
  Rng rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    const TinyMdp m = TinyMdp::random(rng, 4, 3, 0.9);
    SoftmaxLinearPolicy pi(4, 2);
    const auto theta = test::random_vector(pi.dim(), rng);
    const auto fd = o::fd_gradient(
        [&](std::span<const double> t) { return enumerate_exact_J(m, pi, t); }, theta);
    CHECK(test::rel_error(o::exact_gradient(m, pi, theta), fd) < 1e-6);
  }
}

TEST_CASE("dense helpers") {
  o::Matrix m(2, 2);
  m << 2.0, 1.0, 1.0, 2.0;
  const auto e = o::dense_extremes(m);
  CHECK(e.min == doctest::Approx(1.0));
  CHECK(e.max == doctest::Approx(3.0));
  const auto x = o::dense_solve(m, std::vector<double>{3.0, 3.0});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(o::max_abs(m) == 2.0);
  m(0, 1) = 1.5;
  CHECK(o::symmetry_error(m) == doctest::Approx(0.5));
}

TEST_CASE("every named check passes at the default size") {
  checks::CheckOptions opt;
  opt.trials = 3;
  opt.probes = 100;
  for (const auto& r : checks::run_checks(opt)) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
  }
  CHECK_THROWS_AS(checks::run_check("nope", opt), ContractViolation);
  opt.d = 3;
  CHECK_THROWS_AS(checks::run_check("gradient-fd", opt), ContractViolation);
}
