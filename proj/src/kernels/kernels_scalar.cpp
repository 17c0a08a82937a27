#include <cmath>

#include "kernels_impl.hpp"

namespace sottac::kernels::detail {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal_scalar(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void gemv_scalar(const double* w, std::size_t rows, std::size_t cols, const double* x,
                 double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(w + r * cols, x, cols);
}

void gemv_t_scalar(const double* w, std::size_t rows, std::size_t cols, const double* x,
                   double* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(x[r], w + r * cols, y, cols);
}

void ger_scalar(double a, const double* x, std::size_t rows, const double* y, std::size_t cols,
                double* w) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(a * x[r], y, w + r * cols, cols);
}

void bias_tanh_scalar(const double* b, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::tanh(x[i] + b[i]);
}

}  // namespace

const KernelTable kScalarTable{
    Isa::Scalar, dot_scalar,    axpy_scalar, scal_scalar, gemv_scalar, gemv_t_scalar,
    ger_scalar,  bias_tanh_scalar,
};

}  // namespace sottac::kernels::detail
