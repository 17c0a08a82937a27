#include "sottac/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "sottac/common.hpp"

namespace sottac::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(SOTTAC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* select_default() {
  const KernelTable* avx2 = avx2_table();
  if (const char* env = std::getenv("SOTTAC_ISA")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2" && avx2 != nullptr) return avx2;
  }
  return avx2 != nullptr ? avx2 : &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{select_default()};
  return table;
}

}  // namespace

const KernelTable& scalar_table() { return detail::kScalarTable; }

const KernelTable* avx2_table() {
#if defined(SOTTAC_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &detail::kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

Isa active_isa() { return active().isa; }

void force_isa(Isa isa) {
  if (isa == Isa::Scalar) {
    current().store(&scalar_table());
    return;
  }
  const KernelTable* t = avx2_table();
  if (t == nullptr) throw ContractViolation("AVX2 kernels are not available on this machine");
  current().store(t);
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}

void scal(double a, std::span<double> x) { active().scal(a, x.data(), x.size()); }

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  active().gemv(w.data(), rows, cols, x.data(), y.data());
}

void gemv_t(std::span<const double> w, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
  active().gemv_t(w.data(), rows, cols, x.data(), y.data());
}

void ger(double a, std::span<const double> x, std::span<const double> y, std::span<double> w) {
  active().ger(a, x.data(), x.size(), y.data(), y.size(), w.data());
}

void bias_tanh(std::span<const double> b, std::span<double> x) {
  active().bias_tanh(b.data(), x.data(), x.size());
}

}  // namespace sottac::kernels
