#include "qbat/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qbat/errors.hpp"

namespace qbat {

std::string_view to_string(BoundKind kind) {
  switch (kind) {
    case BoundKind::kClosed: return "closed";
    case BoundKind::kOpen: return "open";
  }
  return "unknown";
}

double BoundReport::term(std::string_view name) const {
  for (const auto& [key, value] : rhs_terms)
    if (key == name) return value;
  throw InvalidArgument("BoundReport: no term named '" + std::string(name) + "'");
}

double BoundReport::rhs() const {
  switch (kind) {
    case BoundKind::kClosed:
      return 2.0 * (term("sigma2_F") * term("sigma2_V") - term("re_cov_sq"));
    case BoundKind::kOpen:
      return term("sigma_F") * term("sqrt_qfi") + term("kernel_term");
  }
  return 0.0;
}

double BoundReport::tol_violation() const {
  return tol_base * std::max({1.0, std::abs(lhs), std::abs(rhs())});
}

HermitianOperator centered_free_energy_operator(const ThermoContext& ctx,
                                                const DensityMatrix& rho,
                                                const RegularizationPolicy& reg) {
  const HermitianOperator f = free_energy_operator(ctx, rho, reg);
  return f.shifted(expectation(rho, f));
}

// ---------------------------------------------------------------------------
// Closed systems

BoundReport closed_bound(const DensityMatrix& rho_full, const ThermoContext& ctx,
                         const RegularizationPolicy& reg, const ClosedModel& model,
                         double tol_base) {
  const CompositeSpace& space = model.space();
  const DensityMatrix rho_w = partial_trace(rho_full, space, space.battery_index());
  const HermitianOperator f_w = free_energy_operator(ctx, rho_w, reg);
  const HermitianOperator f = embed_battery_operator(f_w, space);
  const HermitianOperator& v = model.interaction();

  const Matrix df = f.shifted(expectation(rho_full, f)).matrix();
  const Matrix dv = v.shifted(expectation(rho_full, v)).matrix();
  const Matrix& rho = rho_full.matrix();

  const double power = power_closed(rho_full, ctx, reg, model);
  const Complex centered = trace_product(rho, commutator(df, dv));
  const double centered_power = (Complex(0.0, -1.0) * centered).real();
  const double lhs = power * power;
  if (std::abs(lhs - std::norm(centered)) > 1e-9 * std::max(1.0, lhs)) {
    std::ostringstream os;
    os.precision(17);
    os << "closed_bound: |P|^2 = " << lhs << " but |tr(rho [dF, dV])|^2 = "
       << std::norm(centered);
    throw ConsistencyError(os.str());
  }

  const double sigma2_f = variance(rho_w, f_w);
  const double sigma2_v = variance(rho_full, v);
  const Complex cov = covariance(rho_full, f, v);

  // Conjugate-pair traces with an explicit square root of rho.
  const Matrix sq = matrix_sqrt(rho_full.op()).matrix();
  const Complex first = trace_product(sq * df, dv * sq);
  const Complex second = trace_product(sq * dv, df * sq);
  const Complex cross = trace_product(rho, df * dv);

  BoundReport r;
  r.kind = BoundKind::kClosed;
  r.lhs = lhs;
  r.rhs_terms = {{"sigma2_F", sigma2_f}, {"sigma2_V", sigma2_v}, {"re_cov_sq", (cov * cov).real()}};
  r.tol_base = tol_base;
  r.regularization = reg.describe();
  r.diagnostics = {
      {"power", power},
      {"centered_power", centered_power},
      {"cov_re", cov.real()},
      {"cov_im", cov.imag()},
      {"pair_first_sq", std::norm(first)},
      {"pair_second_sq", std::norm(second)},
      {"cross_term", 2.0 * (cross * cross).real()},
      {"three_term_sum", std::norm(first) + std::norm(second) - 2.0 * (cross * cross).real()},
      {"conjugate_pair_gap", std::abs(first - std::conj(second))},
  };
  return r;
}

// ---------------------------------------------------------------------------
// Fisher information and kernel contribution

QfiResult qfi_eigsum(const SpectralDecomposition& spec, const HermitianOperator& rho_dot,
                     double rank_tol) {
  if (rho_dot.dim() != spec.dim()) throw InvalidArgument("qfi_eigsum: dimension mismatch");
  const Matrix rd = spec.to_eigenbasis(rho_dot.matrix());
  const RealVector& p = spec.eigenvalues;
  QfiResult out;
  out.rank_used = (p.array() > rank_tol).count();
  for (Index a = 0; a < spec.dim(); ++a)
    for (Index b = 0; b < spec.dim(); ++b) {
      const double s = p(a) + p(b);
      if (s > rank_tol)
        out.value += 2.0 * std::norm(rd(b, a)) / s;
      else
        ++out.excluded_pairs;
    }
  return out;
}

double qfi_sld(const DensityMatrix& rho, const HermitianOperator& rho_dot) {
  if (rho_dot.dim() != rho.dim()) throw InvalidArgument("qfi_sld: dimension mismatch");
  const SpectralDecomposition& spec = rho.spectral();
  const RealVector& p = spec.eigenvalues;
  if (p.minCoeff() <= 1e-10)
    throw InvalidArgument("qfi_sld: state must have full rank (all eigenvalues > 1e-10)");
  const Matrix rd = spec.to_eigenbasis(rho_dot.matrix());
  Matrix sld_eig(spec.dim(), spec.dim());
  for (Index a = 0; a < spec.dim(); ++a)
    for (Index b = 0; b < spec.dim(); ++b) sld_eig(a, b) = 2.0 * rd(a, b) / (p(a) + p(b));
  const Matrix& u = spec.eigenvectors;
  const Matrix sld = u * sld_eig * u.adjoint();
  const Matrix& r = rho.matrix();
  const double residual = max_abs(0.5 * (sld * r + r * sld) - rho_dot.matrix());
  if (residual > 1e-8 * std::max(1.0, max_abs(sld)))
    throw ConsistencyError("qfi_sld: symmetric logarithmic derivative does not solve its equation");
  return trace_product(r, sld * sld).real();
}

double kernel_term(const SpectralDecomposition& spec, const HermitianOperator& rho_dot,
                   const HermitianOperator& centered_f, double rank_tol) {
  if (rho_dot.dim() != spec.dim() || centered_f.dim() != spec.dim())
    throw InvalidArgument("kernel_term: dimension mismatch");
  const Matrix rd = spec.to_eigenbasis(rho_dot.matrix());
  const Matrix df = spec.to_eigenbasis(centered_f.matrix());
  const RealVector& p = spec.eigenvalues;
  Complex sum = 0.0;
  for (Index a = 0; a < spec.dim(); ++a)
    for (Index b = 0; b < spec.dim(); ++b)
      if (p(a) + p(b) <= rank_tol) sum += df(a, b) * rd(b, a);
  return std::abs(sum);
}

// ---------------------------------------------------------------------------
// Open systems

BoundReport open_bound_from_derivative(const DensityMatrix& rho,
                                       const HermitianOperator& rho_dot,
                                       const ThermoContext& ctx,
                                       const RegularizationPolicy& reg, double rank_tol,
                                       double tol_base) {
  const double power = power_from_derivative(rho, rho_dot, ctx, reg);
  const HermitianOperator df = centered_free_energy_operator(ctx, rho, reg);
  const SpectralDecomposition& spec = rho.spectral();

  const Matrix dfe = spec.to_eigenbasis(df.matrix());
  const RealVector& p = spec.eigenvalues;
  double weight_sum = 0.0;
  for (Index a = 0; a < spec.dim(); ++a)
    for (Index b = 0; b < spec.dim(); ++b) weight_sum += (p(a) + p(b)) * std::norm(dfe(a, b));
  const double sigma2 = std::max(trace_product(rho.matrix(), df.matrix() * df.matrix()).real(), 0.0);
  if (std::abs(weight_sum - 2.0 * sigma2) > 1e-9 * std::max(1.0, 2.0 * sigma2)) {
    std::ostringstream os;
    os.precision(17);
    os << "open_bound: sum (p_a + p_b)|dF_ab|^2 = " << weight_sum << " but 2 sigma_F^2 = "
       << 2.0 * sigma2;
    throw ConsistencyError(os.str());
  }

  const QfiResult qfi = qfi_eigsum(spec, rho_dot, rank_tol);
  BoundReport r;
  r.kind = BoundKind::kOpen;
  r.lhs = std::abs(power);
  r.rhs_terms = {{"sigma_F", std::sqrt(sigma2)},
                 {"sqrt_qfi", std::sqrt(qfi.value)},
                 {"kernel_term", kernel_term(spec, rho_dot, df, rank_tol)}};
  r.tol_base = tol_base;
  r.regularization = reg.describe();
  r.diagnostics = {
      {"power", power},
      {"qfi", qfi.value},
      {"qfi_rank_used", static_cast<double>(qfi.rank_used)},
      {"qfi_excluded_pairs", static_cast<double>(qfi.excluded_pairs)},
      {"fisher_weight_sum", weight_sum},
      {"twice_variance", 2.0 * sigma2},
  };
  return r;
}

BoundReport open_bound(const LindbladModel& model, const DensityMatrix& rho,
                       const ThermoContext& ctx, const RegularizationPolicy& reg,
                       double rank_tol, double tol_base) {
  return open_bound_from_derivative(rho, lindblad_rhs(model, rho), ctx, reg, rank_tol, tol_base);
}

// ---------------------------------------------------------------------------
// Eigenstate case

Index eigenstate_index(const SpectralDecomposition& spec, const Vector& psi) {
  if (psi.size() != spec.dim()) throw InvalidArgument("eigenstate_index: dimension mismatch");
  Index best = 0;
  (spec.eigenvectors.adjoint() * psi).cwiseAbs().maxCoeff(&best);
  return best;
}

namespace {

template <typename Weight>
double eigenstate_sum(const LindbladModel& model, const SpectralDecomposition& df_spec, Index n,
                      Weight weight) {
  if (df_spec.dim() != model.dim())
    throw InvalidArgument("eigenstate sum: spectral decomposition does not match model");
  if (n < 0 || n >= df_spec.dim()) throw InvalidArgument("eigenstate sum: index out of range");
  if (std::abs(df_spec.eigenvalues(n)) > 1e-9) {
    std::ostringstream os;
    os << "eigenstate sum: w_n = " << df_spec.eigenvalues(n)
       << " but a centered operator must vanish on the battery eigenstate";
    throw InvalidArgument(os.str());
  }
  double total = 0.0;
  for (const auto& c : model.channels()) {
    const Matrix le = df_spec.to_eigenbasis(c.jump);
    for (Index m = 0; m < df_spec.dim(); ++m)
      if (m != n) total += c.gamma * weight(df_spec.eigenvalues(m)) * std::norm(le(m, n));
  }
  return total;
}

}  // namespace

double eigenstate_open_bound(const LindbladModel& model, const SpectralDecomposition& df_spec,
                             Index n) {
  return eigenstate_sum(model, df_spec, n, [](double w) { return std::abs(w); });
}

double cusumano_power(const LindbladModel& model, const SpectralDecomposition& df_spec, Index n) {
  return eigenstate_sum(model, df_spec, n, [](double w) { return w; });
}

// ---------------------------------------------------------------------------
// Kernel singularity probe

void validate_eps_grid(const std::vector<double>& eps) {
  if (eps.size() < 4) throw InvalidArgument("eps grid needs at least 4 points");
  for (double e : eps)
    if (!(e > 0.0 && e <= 0.1)) throw InvalidArgument("eps grid values must lie in (0, 0.1]");
  for (std::size_t i = 1; i < eps.size(); ++i)
    if (!(eps[i] < eps[i - 1])) throw InvalidArgument("eps grid must be strictly descending");
  const double r0 = std::log(eps[1] / eps[0]);
  for (std::size_t i = 2; i < eps.size(); ++i)
    if (std::abs(std::log(eps[i] / eps[i - 1]) - r0) > 1e-6 * std::abs(r0))
      throw InvalidArgument("eps grid must be geometrically spaced");
}

SingularityFit singularity_probe(const LindbladModel& model, const ThermoContext& ctx, Index n,
                                 const std::vector<double>& eps_grid) {
  validate_eps_grid(eps_grid);
  const DensityMatrix pure = DensityMatrix::basis_state(model.dim(), n);
  SingularityFit fit;
  fit.eps = eps_grid;
  for (double e : eps_grid)
    fit.power.push_back(power_open(model, pure, ctx, RegularizationPolicy::epsilon_mix(e)));

  const auto k = static_cast<double>(eps_grid.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    mx += std::log(eps_grid[i]);
    my += fit.power[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    const double dx = std::log(eps_grid[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (fit.power[i] - my);
  }
  fit.b = sxy / sxx;
  fit.a = my - fit.b * mx;
  for (std::size_t i = 0; i < eps_grid.size(); ++i)
    fit.residual = std::max(fit.residual,
                            std::abs(fit.power[i] - (fit.a + fit.b * std::log(eps_grid[i]))));
  // Absolute floor so a flat, roundoff-level power is not flagged.
  fit.poor_fit = fit.residual > std::max(0.05 * std::abs(fit.b * std::log(eps_grid.back())), 1e-12);
  return fit;
}

}  // namespace qbat
