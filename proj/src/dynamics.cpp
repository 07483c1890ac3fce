#include "qbat/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qbat/errors.hpp"

namespace qbat {

namespace {

void require_increasing(const std::vector<double>& times, const char* who) {
  if (times.empty()) throw InvalidArgument(std::string(who) + ": empty time grid");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw InvalidArgument(std::string(who) + ": times must be strictly increasing");
}

double operator_norm(const HermitianOperator& h) {
  return eig_hermitian(h).eigenvalues.cwiseAbs().maxCoeff();
}

}  // namespace

LindbladModel::LindbladModel(HermitianOperator hamiltonian,
                             std::vector<LindbladChannel> channels)
    : hamiltonian_(std::move(hamiltonian)), channels_(std::move(channels)) {
  for (const auto& c : channels_) {
    if (!(c.gamma >= 0.0) || !std::isfinite(c.gamma))
      throw InvalidArgument("LindbladModel: rates must be finite and >= 0");
    if (c.jump.rows() != dim() || c.jump.cols() != dim())
      throw InvalidArgument("LindbladModel: jump operator dimension differs from H");
  }
}

double LindbladModel::max_rate() const {
  double g = 0.0;
  for (const auto& c : channels_) g = std::max(g, c.gamma);
  return g;
}

ClosedModel::ClosedModel(CompositeSpace space, HermitianOperator local,
                         HermitianOperator interaction)
    : space_(std::move(space)), local_(std::move(local)), interaction_(std::move(interaction)) {
  if (local_.dim() != space_.total_dim() || interaction_.dim() != space_.total_dim())
    throw InvalidArgument("ClosedModel: H0 and V must act on the full composite space");
}

// ---------------------------------------------------------------------------

Trajectory evolve_closed(const ClosedModel& model, const DensityMatrix& rho0,
                         const std::vector<double>& times) {
  require_increasing(times, "evolve_closed");
  const CompositeSpace& space = model.space();
  if (rho0.dim() != space.total_dim())
    throw InvalidArgument("evolve_closed: initial state does not match composite space");
  const SpectralDecomposition h = eig_hermitian(model.total());
  const Matrix rho0_eig = h.to_eigenbasis(rho0.matrix());
  const double purity0 = rho0.purity();

  Trajectory traj;
  traj.full_states.emplace();
  for (double t : times) {
    const double dt = t - times.front();
    const Vector phases = (h.eigenvalues * (-dt)).unaryExpr([](double a) {
      return Complex(std::cos(a), std::sin(a));
    });
    // In the energy basis the propagator is diagonal.
    const Matrix evolved = phases.asDiagonal() * rho0_eig * phases.conjugate().asDiagonal();
    DensityMatrix rho(Matrix(h.eigenvectors * evolved * h.eigenvectors.adjoint()));
    if (std::abs(rho.purity() - purity0) > 1e-10) {
      std::ostringstream os;
      os << "evolve_closed: purity drifted to " << rho.purity() << " at t = " << t;
      throw ConsistencyError(os.str());
    }
    traj.times.push_back(t);
    traj.states.push_back(partial_trace(rho, space, space.battery_index()));
    traj.full_states->push_back(std::move(rho));
  }
  return traj;
}

Matrix unitary_rhs(const HermitianOperator& h, const Matrix& rho) {
  return Complex(0.0, -1.0) * commutator(h.matrix(), rho);
}

HermitianOperator reduced_battery_rhs(const ClosedModel& model, const DensityMatrix& rho_full) {
  const Matrix full = unitary_rhs(model.total(), rho_full.matrix());
  return HermitianOperator::hermitian_part(
      partial_trace(full, model.space(), model.space().battery_index()));
}

Matrix lindblad_rhs(const LindbladModel& model, const Matrix& rho) {
  if (rho.rows() != model.dim() || rho.cols() != model.dim())
    throw InvalidArgument("lindblad_rhs: state dimension differs from model");
  Matrix out = unitary_rhs(model.hamiltonian(), rho);
  for (const auto& c : model.channels()) {
    if (c.gamma == 0.0) continue;
    const Matrix& l = c.jump;
    const Matrix ldl = l.adjoint() * l;
    out += c.gamma * (l * rho * l.adjoint() - 0.5 * (ldl * rho + rho * ldl));
  }
  return out;
}

HermitianOperator lindblad_rhs(const LindbladModel& model, const DensityMatrix& rho) {
  return HermitianOperator::hermitian_part(lindblad_rhs(model, rho.matrix()));
}

Trajectory evolve_lindblad(const LindbladModel& model, const DensityMatrix& rho0,
                           const std::vector<double>& times, const IntegratorOptions& opts) {
  require_increasing(times, "evolve_lindblad");
  if (rho0.dim() != model.dim())
    throw InvalidArgument("evolve_lindblad: initial state does not match model");
  if (!(opts.step > 0.0)) throw InvalidArgument("evolve_lindblad: step must be > 0");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (opts.step > (times[i] - times[i - 1]) * (1.0 + 1e-9))
      throw InvalidArgument("evolve_lindblad: step exceeds the sample spacing");
  const double stiffness = std::max(model.max_rate(), operator_norm(model.hamiltonian()));
  if (opts.step * stiffness > opts.stability_limit) {
    std::ostringstream os;
    os << "evolve_lindblad: step * max(gamma, ||H||) = " << opts.step * stiffness
       << " exceeds the stability limit " << opts.stability_limit;
    throw InvalidArgument(os.str());
  }

  auto rhs = [&model](const Matrix& r) { return lindblad_rhs(model, r); };

  Trajectory traj;
  Matrix rho = rho0.matrix();
  traj.times.push_back(times.front());
  traj.states.push_back(rho0);
  double t = times.front();
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double span = times[k] - times[k - 1];
    const auto n = static_cast<long>(std::ceil(span / opts.step - 1e-9));
    const double h = span / static_cast<double>(std::max(n, 1L));
    for (long s = 0; s < std::max(n, 1L); ++s) {
      const Matrix k1 = rhs(rho);
      const Matrix k2 = rhs(rho + 0.5 * h * k1);
      const Matrix k3 = rhs(rho + 0.5 * h * k2);
      const Matrix k4 = rhs(rho + h * k3);
      rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t = times[k - 1] + h * static_cast<double>(s + 1);

      rho = 0.5 * (rho + rho.adjoint());
      Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
      const double lowest = es.eigenvalues().minCoeff();
      if (lowest < -opts.negativity_abort) {
        std::ostringstream os;
        os << "evolve_lindblad: positivity lost (eigenvalue " << lowest << ") at t = " << t;
        throw IntegratorFailure(os.str(), t);
      }
      if (lowest < 0.0) {
        const RealVector clipped = es.eigenvalues().cwiseMax(0.0);
        rho = es.eigenvectors() * clipped.cast<Complex>().asDiagonal() *
              es.eigenvectors().adjoint();
        rho = 0.5 * (rho + rho.adjoint());
      }
      rho /= rho.trace().real();
    }
    traj.times.push_back(times[k]);
    traj.states.emplace_back(rho);
  }
  return traj;
}

// ---------------------------------------------------------------------------

double power_from_derivative(const DensityMatrix& rho, const HermitianOperator& rho_dot,
                             const ThermoContext& ctx, const RegularizationPolicy& reg) {
  if (rho_dot.dim() != rho.dim())
    throw InvalidArgument("power_from_derivative: derivative dimension mismatch");
  const HermitianOperator f = free_energy_operator(ctx, rho, reg);
  const double direct = trace_product(rho_dot.matrix(), f.matrix()).real();

  const SpectralDecomposition& spec = rho.spectral();
  const Matrix df = spec.to_eigenbasis(f.shifted(expectation(rho, f)).matrix());
  const Matrix rd = spec.to_eigenbasis(rho_dot.matrix());
  Complex eigsum = 0.0;
  for (Index a = 0; a < spec.dim(); ++a)
    for (Index b = 0; b < spec.dim(); ++b) eigsum += df(a, b) * rd(b, a);

  const double scale =
      std::max({1.0, std::abs(direct), max_abs(f.matrix()) * max_abs(rho_dot.matrix())});
  if (std::abs(eigsum.real() - direct) > 1e-9 * scale || std::abs(eigsum.imag()) > 1e-9 * scale) {
    std::ostringstream os;
    os.precision(17);
    os << "power: trace route " << direct << " disagrees with eigenbasis sum " << eigsum;
    throw ConsistencyError(os.str());
  }
  return direct;
}

double power_closed(const DensityMatrix& rho_full, const ThermoContext& ctx,
                    const RegularizationPolicy& reg, const ClosedModel& model) {
  const CompositeSpace& space = model.space();
  if (rho_full.dim() != space.total_dim())
    throw InvalidArgument("power_closed: state does not match composite space");
  const DensityMatrix rho_w = partial_trace(rho_full, space, space.battery_index());
  const Matrix f = embed(free_energy_operator(ctx, rho_w, reg).matrix(), space,
                         space.battery_index());
  const Matrix& v = model.interaction().matrix();
  // -i tr([rho, F] V) = -i tr(rho [F, V])
  const Complex c = trace_product(rho_full.matrix(), commutator(f, v));
  const Complex p = Complex(0.0, -1.0) * c;
  if (std::abs(p.imag()) > 1e-9 * std::max(1.0, max_abs(f) * max_abs(v)))
    throw ConsistencyError("power_closed: non-negligible imaginary part");
  return p.real();
}

double power_open(const LindbladModel& model, const DensityMatrix& rho,
                  const ThermoContext& ctx, const RegularizationPolicy& reg) {
  return power_from_derivative(rho, lindblad_rhs(model, rho), ctx, reg);
}

std::vector<double> power_finite_difference(const Trajectory& traj, const ThermoContext& ctx) {
  const std::size_t n = traj.size();
  if (n < 3 || traj.states.size() != n)
    throw InvalidArgument("power_finite_difference: need at least 3 samples");
  const double h = traj.times[1] - traj.times[0];
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs((traj.times[i] - traj.times[i - 1]) - h) > 1e-9 * h)
      throw InvalidArgument("power_finite_difference: time grid is not uniform");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = max_extractable_work(ctx, traj.states[i]);
  std::vector<double> p(n);
  p[0] = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h);
  p[n - 1] = (3.0 * w[n - 1] - 4.0 * w[n - 2] + w[n - 3]) / (2.0 * h);
  for (std::size_t i = 1; i + 1 < n; ++i) p[i] = (w[i + 1] - w[i - 1]) / (2.0 * h);
  return p;
}

}  // namespace qbat
