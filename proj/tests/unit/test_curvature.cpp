#include <doctest.h>

#include <cmath>

#include "sottac/curvature.hpp"
#include "sottac/oracle.hpp"
#include "test_support.hpp"

using namespace sottac;

namespace {

double quad(const std::vector<double>& v, const std::vector<double>& hv) {
  double q = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) q += v[i] * hv[i];
  return q;
}

std::vector<double> nonnegative(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (double& x : w) x = 2.0 * rng.uniform();
  return w;
}

}  // namespace

TEST_CASE("zero probes give zero products") {
  Rng rng(1);
  test::SoftmaxFixture fx(3, 2, 10, rng);
  const auto w = test::random_vector(fx.batch.size(), rng);
  const std::vector<double> zero(fx.policy.dim(), 0.0);
  CHECK(test::norm(fisher_vp(fx.batch, fx.policy, zero)) == 0.0);
  CHECK(test::norm(h1_vp(fx.batch, fx.policy, w, zero)) == 0.0);
  CHECK(test::norm(h2_vp(fx.batch, fx.policy, w, zero)) == 0.0);
}

TEST_CASE("Fisher is a Gram form and H1 with unit weights equals it") {
  Rng rng(2);
  test::SoftmaxFixture fx(4, 3, 25, rng);
  const std::vector<double> ones(fx.batch.size(), 1.0);
  for (int k = 0; k < 50; ++k) {
    const auto v = test::random_vector(fx.policy.dim(), rng);
    const auto fv = fisher_vp(fx.batch, fx.policy, v);
    CHECK(quad(v, fv) >= -1e-10);
    CHECK(fv == h1_vp(fx.batch, fx.policy, ones, v));
  }
}

TEST_CASE("sign structure with nonnegative weights") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    test::SoftmaxFixture fx(3, 2 + trial % 3, 15, rng);
    const auto w = nonnegative(fx.batch.size(), rng);
    for (int k = 0; k < 20; ++k) {
      const auto v = test::random_vector(fx.policy.dim(), rng);
      CHECK(quad(v, h1_vp(fx.batch, fx.policy, w, v)) >= -1e-10);
      CHECK(quad(v, h2_vp(fx.batch, fx.policy, w, v)) <= 1e-10);
    }
  }
}

TEST_CASE("H1 and H2 products match dense assemblies") {
  Rng rng(4);
  test::SoftmaxFixture fx(2, 3, 12, rng);  // d = 6
  const auto w = test::random_vector(fx.batch.size(), rng);
  const auto h1 = oracle::dense_outer_product(fx.batch, fx.policy, w);
  const auto h2 = oracle::dense_intrinsic_fd(fx.batch, fx.policy, w);
  for (int k = 0; k < 5; ++k) {
    const auto v = test::random_vector(fx.policy.dim(), rng);
    const Eigen::Map<const Eigen::VectorXd> ve(v.data(), v.size());
    const Eigen::VectorXd h1v = h1 * ve, h2v = h2 * ve;
    CHECK(test::max_abs_diff(h1_vp(fx.batch, fx.policy, w, v),
                             std::vector<double>(h1v.data(), h1v.data() + h1v.size())) < 1e-8);
    CHECK(test::rel_error(h2_vp(fx.batch, fx.policy, w, v),
                          std::vector<double>(h2v.data(), h2v.data() + h2v.size())) < 1e-4);
  }
}

TEST_CASE("ACGN1 with zero advantages is the zero map") {
  Rng rng(5);
  test::SoftmaxFixture fx(3, 2, 10, rng);
  const std::vector<double> zero_w(fx.batch.size(), 0.0);
  const auto v = test::random_vector(fx.policy.dim(), rng);
  CHECK(test::norm(acgn_vp(CurvatureKind::Acgn1, fx.batch, fx.policy, zero_w, v)) == 0.0);
}

TEST_CASE("operator P = lambda I - H is symmetric and linear") {
  Rng rng(6);
  test::SoftmaxFixture fx(3, 3, 20, rng);
  const auto w = test::random_vector(fx.batch.size(), rng);
  for (auto kind : {CurvatureKind::Fisher, CurvatureKind::Acgn1, CurvatureKind::Acgn2}) {
    CurvatureOperator op(kind, fx.policy, fx.batch, w, 0.3);
    const auto dense = oracle::dense_operator(op);
    CHECK(oracle::symmetry_error(dense) < 1e-8);
    const auto u = test::random_vector(op.dim(), rng);
    const auto v = test::random_vector(op.dim(), rng);
    CHECK(quad(u, op.apply(v)) == doctest::Approx(quad(v, op.apply(u))).epsilon(1e-10));
  }
}

TEST_CASE("Fisher operator is lambda I + F") {
  Rng rng(7);
  test::SoftmaxFixture fx(2, 2, 10, rng);
  CurvatureOperator op(CurvatureKind::Fisher, fx.policy, fx.batch, {}, 0.5);
  const auto v = test::random_vector(op.dim(), rng);
  auto want = fisher_vp(fx.batch, fx.policy, v);
  for (std::size_t i = 0; i < v.size(); ++i) want[i] += 0.5 * v[i];
  CHECK(test::max_abs_diff(op.apply(v), want) < 1e-14);
  CHECK(op.product_count() == 1);
}

TEST_CASE("empty batch gives P = lambda I with exact spectrum") {
  SoftmaxLinearPolicy pi(3, 2);
  SampleBatch empty(3);
  CurvatureOperator op(CurvatureKind::Acgn2, pi, empty, {}, 2.0);
  const auto dense = oracle::dense_operator(op);
  CHECK((dense - 2.0 * oracle::Matrix::Identity(6, 6)).norm() == 0.0);
  Rng rng(8);
  for (auto method : {SpectrumMethod::Lanczos, SpectrumMethod::Power}) {
    const auto est = estimate_spectrum(op, rng, 10, method);
    CHECK(est.m_hat == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(est.M_hat == doctest::Approx(2.0).epsilon(1e-6));
  }
}

TEST_CASE("Lanczos extremes match the dense eigensolver within 1%") {
  Rng rng(9);
  for (int trial = 0; trial < 6; ++trial) {
    test::SoftmaxFixture fx(2 + trial % 3, 2, 30, rng);
    const auto w = nonnegative(fx.batch.size(), rng);
    const auto kind = trial % 2 == 0 ? CurvatureKind::Acgn2 : CurvatureKind::Fisher;
    CurvatureOperator op(kind, fx.policy, fx.batch, w, 0.1);
    const auto exact = oracle::dense_extremes(oracle::dense_operator(op));
    const auto est = estimate_spectrum(op, rng, 20);
    CHECK(std::abs(est.m_hat - exact.min) <= 0.01 * std::abs(exact.min));
    CHECK(std::abs(est.M_hat - exact.max) <= 0.01 * std::abs(exact.max));
  }
}

TEST_CASE("ACGN2 softmax with lambda = 0.1 has m_hat >= 0.1") {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    test::SoftmaxFixture fx(4, 2, 40, rng);
    const auto w = nonnegative(fx.batch.size(), rng);
    CurvatureOperator op(CurvatureKind::Acgn2, fx.policy, fx.batch, w, 0.1);
    CHECK(estimate_spectrum(op, rng, 20).m_hat >= 0.1 - 1e-6);
  }
}

TEST_CASE("Bernoulli Fisher eigenvalue along the logit difference") {
  // theta = 0, 1-D state s = 1: F = p (1 - p) u u^T with u = (1, -1), so the
  // eigenvalue along u / |u| is p (1 - p) |u|^2 = 0.5.
  SoftmaxLinearPolicy pi(1, 2);
  SampleBatch batch(1);
  Rng rng(11);
  const std::vector<double> s = {1.0};
  for (int i = 0; i < 20000; ++i) batch.add(s, pi.sample(s, rng));
  batch.set_uniform_measure();
  const double r = 1.0 / std::sqrt(2.0);
  const std::vector<double> u = {r, -r};
  // Every sample has score +-(1/2, -1/2), so the estimate is exact.
  CHECK(quad(u, fisher_vp(batch, pi, u)) == doctest::Approx(0.5).epsilon(1e-12));
  const auto dense = oracle::dense_outer_product(batch, pi, std::vector<double>(batch.size(), 1.0));
  CHECK(oracle::dense_extremes(dense).max == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("constructor contracts") {
  Rng rng(12);
  test::SoftmaxFixture fx(2, 2, 5, rng);
  CHECK_THROWS_AS(CurvatureOperator(CurvatureKind::Acgn2, fx.policy, fx.batch, {1.0}, 0.1),
                  ContractViolation);
  CHECK_THROWS_AS(CurvatureOperator(CurvatureKind::Acgn2, fx.policy, fx.batch, {}, -1.0),
                  ContractViolation);
  CurvatureOperator op(CurvatureKind::Acgn2, fx.policy, fx.batch, {}, 0.1);
  CHECK_THROWS_AS(op.apply(std::vector<double>{1.0}), ContractViolation);
  CHECK_THROWS_AS(estimate_spectrum(op, rng, 3), ContractViolation);
}

TEST_CASE("H12 diagnostic vanishes for a frozen critic and is finite otherwise") {
  Rng rng(13);
  test::SoftmaxFixture fx(2, 2, 10, rng);
  ValueCritic critic(2, 4, rng);
  const std::vector<double> omega(critic.params().begin(), critic.params().end());
  const CriticRefit frozen = [&](std::span<const double>) { return std::optional(omega); };
  const auto d0 = h12_diagnostic(fx.batch, fx.policy, critic, fx.policy.params(), frozen, rng);
  CHECK(d0.available);
  CHECK(d0.bound == 0.0);
  CHECK(d0.critic_jacobian == 0.0);
  CHECK(std::isfinite(d0.g_pi));
  CHECK(d0.g_pi > 0.0);

  const CriticRefit moving = [&](std::span<const double> theta) {
    auto w = omega;
    for (std::size_t i = 0; i < theta.size(); ++i) w[i] += 0.1 * theta[i];
    return std::optional(w);
  };
  const auto d1 = h12_diagnostic(fx.batch, fx.policy, critic, fx.policy.params(), moving, rng);
  CHECK(d1.bound > 0.0);
  CHECK(std::isfinite(d1.bound));

  const CriticRefit failing = [](std::span<const double>) { return std::optional<ParamVector>(); };
  CHECK_FALSE(h12_diagnostic(fx.batch, fx.policy, critic, fx.policy.params(), failing, rng).available);
}
