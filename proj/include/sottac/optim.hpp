#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "sottac/common.hpp"
#include "sottac/curvature.hpp"
#include "sottac/policy.hpp"

namespace sottac {

enum class Solver { Cg, FixedPoint };

/// theta += alpha * g
struct VanillaRule {
  double alpha = 5e-3;
};

/// theta += alpha * (lambda_F I + F)^{-1} g
struct NaturalRule {
  double alpha = 5e-2;
  double damping = 1e-3;
  int cg_iters = 10;
  double cg_tol = 1e-6;
};

/// theta += alpha * (lambda I - H~)^{-1} g with H~ from `kind`.
struct NewtonRule {
  CurvatureKind kind = CurvatureKind::Acgn2;
  double alpha = 1e-1;
  double damping = 0.1;
  int cg_iters = 10;
  double cg_tol = 1e-6;
  bool screening = true;
  Solver solver = Solver::Cg;
  /// Step size of the plain gradient step taken when screening rejects P.
  double fallback_alpha = 5e-3;
  /// Lanczos steps for the (m, M) estimate attached to every report.
  int spectrum_iters = 20;
};

using UpdateRule = std::variant<VanillaRule, NaturalRule, NewtonRule>;

double rule_alpha(const UpdateRule& rule);
void validate_rule(const UpdateRule& rule);

struct UpdateReport {
  double grad_norm = 0.0;
  double direction_norm = 0.0;
  int cg_iterations = 0;
  bool screening_triggered = false;
  bool fallback_used = false;
  bool cg_converged = true;  // false when the residual stayed above 10 x cg_tol
  double m_hat = std::numeric_limits<double>::quiet_NaN();
  double M_hat = std::numeric_limits<double>::quiet_NaN();
  /// Step bound 2 m^2 / (L M - m^2); NaN when no spectrum was estimated.
  double step_bound_alpha = std::numeric_limits<double>::quiet_NaN();
  double alpha_used = 0.0;
  /// Smallest p^T P p / |p|^2 seen by CG (NaN if no CG step ran).
  double min_cg_curvature = std::numeric_limits<double>::quiet_NaN();
  std::int64_t wall_clock_ns = 0;
};

/// sum_i m_i w_i grad log pi(a_i | s_i). Throws NumericalError if non-finite.
ParamVector policy_gradient(const SampleBatch& batch, const Policy& policy,
                            std::span<const double> weights);

struct CgResult {
  ParamVector x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool negative_curvature = false;
  double min_curvature = std::numeric_limits<double>::infinity();
};

/// Conjugate gradient on P x = b from x = 0. Stops at relative residual tol,
/// at max_iters, or when p^T P p <= 1e-12 |p|^2 (negative_curvature set, x is
/// the last iterate before that direction).
CgResult conjugate_gradient(const SymmetricOperator& op, std::span<const double> b, int max_iters,
                            double tol);

struct Direction {
  ParamVector d;
  UpdateReport report;
};

/// Vanilla: d = g. Natural/Newton: d solves P d = g (CG or the fixed-point
/// iteration d <- d + (g - P d) / M_hat). With screening on, a CG breakdown on
/// non-positive curvature falls back to d = g and the step uses
/// fallback_alpha. `op` may be null only for VanillaRule.
Direction solve_direction(const UpdateRule& rule, const SymmetricOperator* op,
                          std::span<const double> g, Rng* probe_rng = nullptr);

/// theta + alpha d; throws NumericalError if the result is non-finite.
ParamVector apply_update(const Policy& policy, std::span<const double> d, double alpha);

/// 2 m^2 / (L M - m^2), +inf when the denominator is not positive.
double step_size_bound(const SpectrumEstimate& spectrum, double L_hat);

}  // namespace sottac
