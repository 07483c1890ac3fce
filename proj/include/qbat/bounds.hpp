#pragma once

// Charging-power bounds for closed and open battery dynamics, the quantum
// Fisher information of the battery state, the kernel contribution that
// survives for rank-deficient states, and the eigenstate-case expressions.

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qbat/dynamics.hpp"
#include "qbat/operators.hpp"
#include "qbat/thermodynamics.hpp"

namespace qbat {

inline constexpr double kDefaultViolationTol = 1e-9;

enum class BoundKind {
  // |P|^2 <= 2 (sigma_F^2 sigma_V^2 - Re[Cov(F,V)^2])
  kClosed,
  // |P| <= sigma_F sqrt(I_Q) + |kernel sum|
  kOpen,
};

std::string_view to_string(BoundKind kind);

// One inequality evaluation. The right-hand side is always recomputed from
// the named terms, never stored.
struct BoundReport {
  BoundKind kind = BoundKind::kClosed;
  double lhs = 0.0;
  std::vector<std::pair<std::string, double>> rhs_terms;
  double tol_base = kDefaultViolationTol;
  std::string regularization;
  std::string meta;
  // Auxiliary values computed alongside the bound (decompositions, identities).
  std::map<std::string, double> diagnostics;

  double term(std::string_view name) const;
  double rhs() const;
  double slack() const { return rhs() - lhs; }
  // tol_base * max(1, |lhs|, |rhs|)
  double tol_violation() const;
  bool violated() const { return slack() < -tol_violation(); }
};

// delta F = F - <F>_rho
HermitianOperator centered_free_energy_operator(const ThermoContext& ctx,
                                                const DensityMatrix& rho,
                                                const RegularizationPolicy& reg);

// Evaluates the corrected closed-system bound at one instant. Also checks
// |P|^2 = |tr(rho [dF, dV])|^2 and records the conjugate-pair traces
// tr(sqrt(rho) dF dV sqrt(rho)) and tr(sqrt(rho) dV dF sqrt(rho)).
BoundReport closed_bound(const DensityMatrix& rho_full, const ThermoContext& ctx,
                         const RegularizationPolicy& reg, const ClosedModel& model,
                         double tol_base = kDefaultViolationTol);

struct QfiResult {
  double value = 0.0;
  Index rank_used = 0;          // eigenvalues of rho above rank_tol
  Index excluded_pairs = 0;     // ordered pairs with p_a + p_b <= rank_tol
};

// 2 sum' |<b|rho_dot|a>|^2 / (p_a + p_b), restricted to p_a + p_b > rank_tol.
QfiResult qfi_eigsum(const SpectralDecomposition& spec, const HermitianOperator& rho_dot,
                     double rank_tol = kDefaultSupportTol);

// tr(rho L^2) for the symmetric logarithmic derivative L solving
// rho_dot = (L rho + rho L)/2. Full-rank states only.
double qfi_sld(const DensityMatrix& rho, const HermitianOperator& rho_dot);

// |sum'' dF_ab <b|rho_dot|a>| over pairs with p_a + p_b <= rank_tol.
double kernel_term(const SpectralDecomposition& spec, const HermitianOperator& rho_dot,
                   const HermitianOperator& centered_f, double rank_tol = kDefaultSupportTol);

// Open-system bound for any battery state and derivative. `rho_dot` can come
// from a GKLS generator or from an exact reduction of closed dynamics.
BoundReport open_bound_from_derivative(const DensityMatrix& rho,
                                       const HermitianOperator& rho_dot,
                                       const ThermoContext& ctx,
                                       const RegularizationPolicy& reg,
                                       double rank_tol = kDefaultSupportTol,
                                       double tol_base = kDefaultViolationTol);

BoundReport open_bound(const LindbladModel& model, const DensityMatrix& rho,
                       const ThermoContext& ctx, const RegularizationPolicy& reg,
                       double rank_tol = kDefaultSupportTol,
                       double tol_base = kDefaultViolationTol);

// Column of `spec` best aligned with `psi`.
Index eigenstate_index(const SpectralDecomposition& spec, const Vector& psi);

// Battery in eigenstate n of delta F (which requires w_n = 0):
//   bound  = sum_j gamma_j sum_{m != n} |w_m| |<m|L_j|n>|^2
//   power  = sum_j gamma_j sum_{m != n}  w_m  |<m|L_j|n>|^2
double eigenstate_open_bound(const LindbladModel& model, const SpectralDecomposition& df_spec,
                             Index n);
double cusumano_power(const LindbladModel& model, const SpectralDecomposition& df_spec, Index n);

struct SingularityFit {
  std::vector<double> eps;
  std::vector<double> power;
  double a = 0.0;
  double b = 0.0;
  double residual = 0.0;  // max |P - (a + b log eps)|
  bool poor_fit = false;  // residual > max(0.05 |b log eps_min|, 1e-12)
};

// Charging power of the pure state |n><n| (computational basis) with the
// free energy operator built on (1 - eps)|n><n| + eps 1/d, fitted to
// a + b log eps. eps_grid: >= 4 points in (0, 0.1], descending, geometric.
SingularityFit singularity_probe(const LindbladModel& model, const ThermoContext& ctx,
                                 Index n, const std::vector<double>& eps_grid);

void validate_eps_grid(const std::vector<double>& eps_grid);

}  // namespace qbat
