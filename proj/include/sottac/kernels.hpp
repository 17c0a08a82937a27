#pragma once

// Dense double-precision vector kernels used by every inner loop in the
// library (policy/critic forward and backward passes, curvature products,
// Krylov solvers). Each kernel has a portable scalar reference and an
// AVX2/FMA variant; the variant is chosen once at startup from CPUID and can
// be overridden with SOTTAC_ISA=scalar|avx2 or force_isa().

#include <cstddef>
#include <span>
#include <string_view>

namespace sottac::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // x *= a
  void (*scal)(double a, double* x, std::size_t n);
  // y = W x, W row-major rows x cols
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y += W^T x
  void (*gemv_t)(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
  // W += a x y^T
  void (*ger)(double a, const double* x, std::size_t rows, const double* y, std::size_t cols,
              double* w);
  // x = tanh(x + b); the vector variant agrees with std::tanh to ~1e-15 relative
  void (*bias_tanh)(const double* b, double* x, std::size_t n);
};

const KernelTable& scalar_table();
/// Nullptr when the build or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

const KernelTable& active();
Isa active_isa();
/// Throws ContractViolation if the requested ISA is unavailable.
void force_isa(Isa isa);
std::string_view isa_name(Isa isa);

// Span front-ends over the active table.

double dot(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<double> y);
void scal(double a, std::span<double> x);
double norm2(std::span<const double> x);
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
void gemv_t(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);
void ger(double a, std::span<const double> x, std::span<const double> y, std::span<double> w);
void bias_tanh(std::span<const double> b, std::span<double> x);

}  // namespace sottac::kernels
