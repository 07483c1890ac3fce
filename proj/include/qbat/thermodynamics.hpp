#pragma once

// Free energy operator, entropies, extractable work and second-moment
// statistics. Units: hbar = k_B = 1, beta in 1/energy, entropies in nats.

#include <string>
#include <string_view>

#include "qbat/operators.hpp"

namespace qbat {

class ThermoContext {
 public:
  ThermoContext(double beta, HermitianOperator hamiltonian);

  double beta() const { return beta_; }
  const HermitianOperator& hamiltonian() const { return hamiltonian_; }

 private:
  double beta_;
  HermitianOperator hamiltonian_;
};

enum class RegularizationMode { kSupportTruncate, kEpsilonMix, kReject };

std::string_view to_string(RegularizationMode mode);
RegularizationMode parse_regularization_mode(std::string_view name);

// How log(rho) is treated on the kernel of rho.
//  support-truncate: log restricted to the support (kernel contributes 0)
//  epsilon-mix:      log evaluated on (1 - eps) rho + eps 1/d
//  reject:           SingularLogarithm on any eigenvalue <= support_tol
struct RegularizationPolicy {
  RegularizationMode mode = RegularizationMode::kSupportTruncate;
  double epsilon = 0.0;
  double support_tol = kDefaultSupportTol;

  static RegularizationPolicy support_truncate(double tol = kDefaultSupportTol) {
    return {RegularizationMode::kSupportTruncate, 0.0, tol};
  }
  static RegularizationPolicy epsilon_mix(double eps, double tol = kDefaultSupportTol) {
    return {RegularizationMode::kEpsilonMix, eps, tol};
  }
  static RegularizationPolicy reject(double tol = kDefaultSupportTol) {
    return {RegularizationMode::kReject, 0.0, tol};
  }

  void validate() const;
  std::string describe() const;
  bool operator==(const RegularizationPolicy&) const = default;
};

// (1 - eps) rho + eps 1/d, sharing rho's eigenvectors.
DensityMatrix mix_with_identity(const DensityMatrix& rho, double eps);

double log_partition_function(const ThermoContext& ctx);
// Gibbs state exp(-beta H)/Z. Rejects beta * spectral range > 700.
DensityMatrix thermal_state(const ThermoContext& ctx);
// F(tau_beta) = -log(Z)/beta
double equilibrium_free_energy(const ThermoContext& ctx);

// H_W + log(rho_W)/beta under the given policy.
HermitianOperator free_energy_operator(const ThermoContext& ctx,
                                       const DensityMatrix& rho,
                                       const RegularizationPolicy& reg);

double mean_energy(const HermitianOperator& h, const DensityMatrix& rho);
double von_neumann_entropy(const DensityMatrix& rho);
// U(rho) - S(rho)/beta, from eigenvalues (finite for any rank).
double nonequilibrium_free_energy(const ThermoContext& ctx, const DensityMatrix& rho);

// S(rho||sigma) in nats. `infinite` is set when rho has weight outside the
// support of sigma; `value` is then meaningless.
struct RelativeEntropy {
  bool infinite = false;
  double value = 0.0;
};
RelativeEntropy relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma,
                                 double support_tol = kDefaultSupportTol);

// W_max = S(rho||tau)/beta, cross-checked against F(rho) - F(tau).
double max_extractable_work(const ThermoContext& ctx, const DensityMatrix& rho);

// tr(rho H) minus the energy of the passive rearrangement of rho.
double ergotropy(const HermitianOperator& h, const DensityMatrix& rho);

double variance(const DensityMatrix& rho, const HermitianOperator& a);
// tr(rho A B) - tr(rho A) tr(rho B)
Complex covariance(const DensityMatrix& rho, const HermitianOperator& a,
                   const HermitianOperator& b);

}  // namespace qbat
