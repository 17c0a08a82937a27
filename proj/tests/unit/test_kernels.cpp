#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sottac/kernels.hpp"
#include "test_support.hpp"

using namespace sottac;
namespace k = sottac::kernels;

namespace {

// Lengths around the 4-wide vector width and its tails.
const std::vector<std::size_t> kLengths = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 130};

double rel(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
  const auto& s = k::scalar_table();
  Rng rng(11);
  for (std::size_t n : kLengths) {
    const auto x = test::random_vector(n, rng);
    auto y = test::random_vector(n, rng);
    double ref = 0.0;
    for (std::size_t i = 0; i < n; ++i) ref += x[i] * y[i];
    CHECK(rel(s.dot(x.data(), y.data(), n), ref) < 1e-14);

    auto y2 = y;
    s.axpy(0.7, x.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y2[i] == doctest::Approx(y[i] + 0.7 * x[i]));
  }
}

TEST_CASE("gemv, gemv_t and ger agree with naive loops") {
  const auto& s = k::scalar_table();
  Rng rng(12);
  for (std::size_t rows : {1u, 3u, 4u, 5u, 9u}) {
    for (std::size_t cols : {1u, 2u, 4u, 7u, 13u}) {
      const auto w = test::random_vector(rows * cols, rng);
      const auto x = test::random_vector(cols, rng);
      std::vector<double> y(rows);
      s.gemv(w.data(), rows, cols, x.data(), y.data());
      for (std::size_t r = 0; r < rows; ++r) {
        double ref = 0.0;
        for (std::size_t c = 0; c < cols; ++c) ref += w[r * cols + c] * x[c];
        CHECK(rel(y[r], ref) < 1e-14);
      }
      const auto u = test::random_vector(rows, rng);
      std::vector<double> z(cols, 1.0);
      s.gemv_t(w.data(), rows, cols, u.data(), z.data());
      for (std::size_t c = 0; c < cols; ++c) {
        double ref = 1.0;
        for (std::size_t r = 0; r < rows; ++r) ref += w[r * cols + c] * u[r];
        CHECK(rel(z[c], ref) < 1e-14);
      }
    }
  }
}

TEST_CASE("bias_tanh scalar is tanh(x + b)") {
  const auto& s = k::scalar_table();
  std::vector<double> b = {0.0, 1.0, -2.0};
  std::vector<double> x = {0.5, -1.0, 30.0};
  s.bias_tanh(b.data(), x.data(), 3);
  CHECK(x[0] == std::tanh(0.5));
  CHECK(x[1] == 0.0);
  CHECK(x[2] == std::tanh(28.0));
}

TEST_CASE("AVX2 kernels are equivalent to the scalar reference") {
  const auto* v = k::avx2_table();
  if (v == nullptr) {
    MESSAGE("AVX2 unavailable in this build or CPU; equivalence not exercised");
    return;
  }
  const auto& s = k::scalar_table();
  Rng rng(13);
  for (std::size_t n : kLengths) {
    const auto x = test::random_vector(n, rng);
    const auto y = test::random_vector(n, rng);
    CHECK(rel(v->dot(x.data(), y.data(), n), s.dot(x.data(), y.data(), n)) < 1e-13);

    auto ya = y, yb = y;
    s.axpy(-1.3, x.data(), ya.data(), n);
    v->axpy(-1.3, x.data(), yb.data(), n);
    CHECK(test::max_abs_diff(ya, yb) < 1e-14);

    auto xa = x, xb = x;
    s.scal(2.5, xa.data(), n);
    v->scal(2.5, xb.data(), n);
    CHECK(xa == xb);

    // Small arguments, the main range and saturation.
    auto bias = test::random_vector(n, rng, 0.1);
    auto ta = test::random_vector(n, rng, 3.0);
    for (std::size_t i = 0; i < n; i += 5) ta[i] = 1e-4 * ta[i];
    for (std::size_t i = 2; i < n; i += 7) ta[i] = 40.0 * ta[i];
    auto tb = ta;
    s.bias_tanh(bias.data(), ta.data(), n);
    v->bias_tanh(bias.data(), tb.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::abs(ta[i] - tb[i]) <= 4e-15 * std::max(std::abs(ta[i]), 1e-300) + 1e-300);
  }
  for (std::size_t rows : {1u, 3u, 4u, 5u, 8u, 33u}) {
    for (std::size_t cols : {1u, 3u, 4u, 6u, 17u}) {
      const auto w = test::random_vector(rows * cols, rng);
      const auto x = test::random_vector(cols, rng);
      const auto u = test::random_vector(rows, rng);
      std::vector<double> ya(rows), yb(rows);
      s.gemv(w.data(), rows, cols, x.data(), ya.data());
      v->gemv(w.data(), rows, cols, x.data(), yb.data());
      CHECK(test::max_abs_diff(ya, yb) < 1e-13);

      std::vector<double> za(cols, 0.5), zb(cols, 0.5);
      s.gemv_t(w.data(), rows, cols, u.data(), za.data());
      v->gemv_t(w.data(), rows, cols, u.data(), zb.data());
      CHECK(test::max_abs_diff(za, zb) < 1e-13);

      auto wa = w, wb = w;
      s.ger(0.3, u.data(), rows, x.data(), cols, wa.data());
      v->ger(0.3, u.data(), rows, x.data(), cols, wb.data());
      CHECK(test::max_abs_diff(wa, wb) < 1e-14);
    }
  }
}

TEST_CASE("vector tanh at zero, small arguments and saturation") {
  const auto* v = k::avx2_table();
  if (v == nullptr) return;
  std::vector<double> x = {0.0, -0.0, 0.00999, 0.01, 0.01001, -0.01, 19.9, 20.0, 20.1, 1e3, -1e3,
                           1e-300, 0.5};
  std::vector<double> b(x.size(), 0.0);
  auto y = x;
  v->bias_tanh(b.data(), y.data(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double want = std::tanh(x[i]);
    CHECK(std::abs(y[i] - want) <= 4e-15 * std::abs(want));
  }
}

TEST_CASE("front-ends dispatch through the active table and force_isa works") {
  const auto before = k::active_isa();
  k::force_isa(k::Isa::Scalar);
  CHECK(k::active_isa() == k::Isa::Scalar);
  const std::vector<double> x = {1.0, 2.0, 3.0};
  CHECK(k::dot(x, x) == 14.0);
  CHECK(k::norm2(x) == doctest::Approx(std::sqrt(14.0)));
  if (k::avx2_table() != nullptr) {
    k::force_isa(k::Isa::Avx2);
    CHECK(k::active_isa() == k::Isa::Avx2);
    CHECK(k::dot(x, x) == 14.0);
  } else {
    CHECK_THROWS(k::force_isa(k::Isa::Avx2));
  }
  k::force_isa(before);
  CHECK(k::isa_name(k::Isa::Scalar) == "scalar");
}

TEST_CASE("vector tanh stays within 1e-15 relative over a dense sweep") {
  const auto* v = k::avx2_table();
  if (v == nullptr) return;
  std::vector<double> x;
  for (int i = -400000; i <= 400000; ++i) x.push_back(i * 5e-5);
  for (int e = -300; e <= 1; ++e)
    for (double m : {1.0, 3.7, -2.2}) x.push_back(m * std::pow(10.0, e));
  const std::vector<double> b(x.size(), 0.0);
  auto y = x;
  v->bias_tanh(b.data(), y.data(), y.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double want = std::tanh(x[i]);
    if (want == 0.0) {
      CHECK(y[i] == 0.0);
      continue;
    }
    worst = std::max(worst, std::abs(y[i] - want) / std::abs(want));
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst < 1e-15);
}
