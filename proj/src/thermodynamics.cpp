#include "qbat/thermodynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qbat/errors.hpp"

namespace qbat {

ThermoContext::ThermoContext(double beta, HermitianOperator hamiltonian)
    : beta_(beta), hamiltonian_(std::move(hamiltonian)) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw InvalidArgument("ThermoContext: beta must be > 0 and finite");
}

std::string_view to_string(RegularizationMode mode) {
  switch (mode) {
    case RegularizationMode::kSupportTruncate: return "support-truncate";
    case RegularizationMode::kEpsilonMix: return "epsilon-mix";
    case RegularizationMode::kReject: return "reject";
  }
  return "unknown";
}

RegularizationMode parse_regularization_mode(std::string_view name) {
  if (name == "support-truncate") return RegularizationMode::kSupportTruncate;
  if (name == "epsilon-mix") return RegularizationMode::kEpsilonMix;
  if (name == "reject") return RegularizationMode::kReject;
  throw InvalidArgument("unknown regularization mode '" + std::string(name) +
                        "' (expected support-truncate, epsilon-mix or reject)");
}

void RegularizationPolicy::validate() const {
  if (mode == RegularizationMode::kEpsilonMix && !(epsilon > 0.0 && epsilon < 1.0))
    throw InvalidArgument("RegularizationPolicy: epsilon must lie in (0, 1)");
  if (!(support_tol >= 0.0))
    throw InvalidArgument("RegularizationPolicy: support_tol must be >= 0");
}

std::string RegularizationPolicy::describe() const {
  std::ostringstream os;
  os << to_string(mode);
  if (mode == RegularizationMode::kEpsilonMix) os << "(eps=" << epsilon << ")";
  return os.str();
}

DensityMatrix mix_with_identity(const DensityMatrix& rho, double eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw InvalidArgument("mix_with_identity: epsilon must lie in (0, 1)");
  SpectralDecomposition spec = rho.spectral();
  const double floor = eps / static_cast<double>(rho.dim());
  spec.eigenvalues = ((1.0 - eps) * spec.eigenvalues).array() + floor;
  return DensityMatrix::from_spectrum(spec);
}

namespace {

// Ascending energies and the Gibbs log-weights -beta (e - e_min).
struct GibbsSpectrum {
  SpectralDecomposition spec;  // descending, as stored
  double e_min = 0.0;
  double log_z = 0.0;
};

GibbsSpectrum gibbs_spectrum(const ThermoContext& ctx) {
  GibbsSpectrum g;
  g.spec = eig_hermitian(ctx.hamiltonian());
  const RealVector& e = g.spec.eigenvalues;
  g.e_min = e.minCoeff();
  const double range = ctx.beta() * (e.maxCoeff() - g.e_min);
  if (range > 700.0) {
    std::ostringstream os;
    os << "thermal_state: beta * spectral range = " << range
       << " exceeds the representable limit 700";
    throw InvalidArgument(os.str());
  }
  double z_shifted = 0.0;
  for (Index i = 0; i < e.size(); ++i) z_shifted += std::exp(-ctx.beta() * (e(i) - g.e_min));
  g.log_z = std::log(z_shifted) - ctx.beta() * g.e_min;
  return g;
}

double entropy_from_eigenvalues(const RealVector& p) {
  double s = 0.0;
  for (Index i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) s -= p(i) * std::log(p(i));
  return s;
}

}  // namespace

double log_partition_function(const ThermoContext& ctx) {
  return gibbs_spectrum(ctx).log_z;
}

DensityMatrix thermal_state(const ThermoContext& ctx) {
  const GibbsSpectrum g = gibbs_spectrum(ctx);
  SpectralDecomposition spec = g.spec;
  // Energies are descending, so populations come out ascending; flip both.
  const Index n = spec.dim();
  RealVector pops(n);
  for (Index i = 0; i < n; ++i)
    pops(i) = std::exp(-ctx.beta() * spec.eigenvalues(n - 1 - i) - g.log_z);
  spec.eigenvalues = pops / pops.sum();
  spec.eigenvectors = Matrix(spec.eigenvectors.rowwise().reverse());
  return DensityMatrix::from_spectrum(spec);
}

double equilibrium_free_energy(const ThermoContext& ctx) {
  return -log_partition_function(ctx) / ctx.beta();
}

HermitianOperator free_energy_operator(const ThermoContext& ctx,
                                       const DensityMatrix& rho,
                                       const RegularizationPolicy& reg) {
  reg.validate();
  if (rho.dim() != ctx.hamiltonian().dim())
    throw InvalidArgument("free_energy_operator: state and Hamiltonian dimensions differ");
  HermitianOperator log_rho;
  switch (reg.mode) {
    case RegularizationMode::kSupportTruncate:
      log_rho = matrix_log(rho.spectral(), LogPolicy::kSupportTruncate, reg.support_tol);
      break;
    case RegularizationMode::kReject:
      log_rho = matrix_log(rho.spectral(), LogPolicy::kReject, reg.support_tol);
      break;
    case RegularizationMode::kEpsilonMix:
      log_rho = matrix_log(mix_with_identity(rho, reg.epsilon).spectral(),
                           LogPolicy::kReject, 0.0);
      break;
  }
  return ctx.hamiltonian() + log_rho * (1.0 / ctx.beta());
}

double mean_energy(const HermitianOperator& h, const DensityMatrix& rho) {
  return expectation(rho, h);
}

double von_neumann_entropy(const DensityMatrix& rho) {
  const double s = entropy_from_eigenvalues(rho.spectral().eigenvalues);
  return std::clamp(s, 0.0, std::log(static_cast<double>(rho.dim())));
}

double nonequilibrium_free_energy(const ThermoContext& ctx, const DensityMatrix& rho) {
  return mean_energy(ctx.hamiltonian(), rho) - von_neumann_entropy(rho) / ctx.beta();
}

RelativeEntropy relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma,
                                 double support_tol) {
  if (rho.dim() != sigma.dim())
    throw InvalidArgument("relative_entropy: dimension mismatch");
  const SpectralDecomposition& s = sigma.spectral();
  // Populations of rho in sigma's eigenbasis.
  const RealVector q = s.to_eigenbasis(rho.matrix()).diagonal().real();
  double cross = 0.0;
  double outside = 0.0;
  for (Index k = 0; k < s.dim(); ++k) {
    if (s.eigenvalues(k) > support_tol)
      cross += q(k) * std::log(s.eigenvalues(k));
    else
      outside += std::max(q(k), 0.0);
  }
  if (outside > support_tol) return {true, 0.0};
  const double value = -entropy_from_eigenvalues(rho.spectral().eigenvalues) - cross;
  if (value < -1e-10)
    throw ConsistencyError("relative_entropy: negative result beyond roundoff");
  return {false, std::max(value, 0.0)};
}

double max_extractable_work(const ThermoContext& ctx, const DensityMatrix& rho) {
  const DensityMatrix tau = thermal_state(ctx);
  // Gibbs populations are strictly positive, so no support cutoff applies.
  const RelativeEntropy d = relative_entropy(rho, tau, 0.0);
  if (d.infinite)
    throw ConsistencyError("max_extractable_work: Gibbs state lost full support");
  const double via_divergence = d.value / ctx.beta();
  const double f_rho = nonequilibrium_free_energy(ctx, rho);
  const double f_tau = equilibrium_free_energy(ctx);
  const double via_free_energy = f_rho - f_tau;
  const double scale = std::max({std::abs(via_divergence), std::abs(f_rho), std::abs(f_tau)});
  if (std::abs(via_divergence - via_free_energy) > 1e-9 * scale) {
    std::ostringstream os;
    os.precision(17);
    os << "max_extractable_work: relative-entropy route " << via_divergence
       << " disagrees with free-energy route " << via_free_energy;
    throw ConsistencyError(os.str());
  }
  return via_divergence;
}

double ergotropy(const HermitianOperator& h, const DensityMatrix& rho) {
  if (h.dim() != rho.dim()) throw InvalidArgument("ergotropy: dimension mismatch");
  const RealVector energies = eig_hermitian(h).eigenvalues.reverse();  // ascending
  const RealVector& r = rho.spectral().eigenvalues;                     // descending
  const double passive = r.dot(energies);
  return std::max(mean_energy(h, rho) - passive, 0.0);
}

double variance(const DensityMatrix& rho, const HermitianOperator& a) {
  if (rho.dim() != a.dim()) throw InvalidArgument("variance: dimension mismatch");
  const Matrix centered = a.shifted(expectation(rho, a)).matrix();
  return trace_product(rho.matrix(), centered * centered).real();
}

Complex covariance(const DensityMatrix& rho, const HermitianOperator& a,
                   const HermitianOperator& b) {
  if (rho.dim() != a.dim() || rho.dim() != b.dim())
    throw InvalidArgument("covariance: dimension mismatch");
  const Matrix da = a.shifted(expectation(rho, a)).matrix();
  const Matrix db = b.shifted(expectation(rho, b)).matrix();
  return trace_product(rho.matrix(), da * db);
}

}  // namespace qbat
