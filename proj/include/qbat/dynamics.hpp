#pragma once

// Closed (unitary, composite S B A W) and open (GKLS) battery dynamics and
// the instantaneous charging-power evaluators P(t) = d<F>_W/dt.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qbat/operators.hpp"
#include "qbat/thermodynamics.hpp"

namespace qbat {

struct LindbladChannel {
  double gamma = 0.0;  // rate, >= 0; 0 disables the channel
  Matrix jump;         // L_j, battery dimension
};

class LindbladModel {
 public:
  LindbladModel(HermitianOperator hamiltonian, std::vector<LindbladChannel> channels);

  Index dim() const { return hamiltonian_.dim(); }
  const HermitianOperator& hamiltonian() const { return hamiltonian_; }
  const std::vector<LindbladChannel>& channels() const { return channels_; }
  double max_rate() const;

 private:
  HermitianOperator hamiltonian_;
  std::vector<LindbladChannel> channels_;
};

// `local` must be a sum of single-subsystem terms (including the embedded
// battery Hamiltonian); only then does the commutator formula for the power
// equal d<F>_W/dt.
class ClosedModel {
 public:
  ClosedModel(CompositeSpace space, HermitianOperator local, HermitianOperator interaction);

  const CompositeSpace& space() const { return space_; }
  const HermitianOperator& local() const { return local_; }
  const HermitianOperator& interaction() const { return interaction_; }
  HermitianOperator total() const { return local_ + interaction_; }

 private:
  CompositeSpace space_;
  HermitianOperator local_;
  HermitianOperator interaction_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<DensityMatrix> states;  // battery states
  std::optional<std::vector<DensityMatrix>> full_states;  // closed runs only
  std::map<std::string, std::vector<double>> records;

  std::size_t size() const { return times.size(); }
};

// Exact propagation rho(t) = U rho0 U^dagger with U from the spectral
// decomposition of H0 + V.
Trajectory evolve_closed(const ClosedModel& model, const DensityMatrix& rho0,
                         const std::vector<double>& times);

// -i [H, rho]
Matrix unitary_rhs(const HermitianOperator& h, const Matrix& rho);
// d rho_W/dt = tr_SBA(-i [H0 + V, rho]) for a closed model.
HermitianOperator reduced_battery_rhs(const ClosedModel& model, const DensityMatrix& rho_full);

// -i[H, rho] + sum_j gamma_j (L rho L^dagger - {L^dagger L, rho}/2)
Matrix lindblad_rhs(const LindbladModel& model, const Matrix& rho);
HermitianOperator lindblad_rhs(const LindbladModel& model, const DensityMatrix& rho);

struct IntegratorOptions {
  double step = 1e-3;
  double stability_limit = 0.1;  // step * max(gamma_j, ||H||) must not exceed this
  double negativity_abort = 1e-8;
};

// Classical fixed-step RK4; each step is followed by re-Hermitization and
// trace renormalization. Eigenvalues in [-negativity_abort, 0) are projected
// to zero, anything below aborts with IntegratorFailure.
Trajectory evolve_lindblad(const LindbladModel& model, const DensityMatrix& rho0,
                           const std::vector<double>& times,
                           const IntegratorOptions& opts);
inline Trajectory evolve_lindblad(const LindbladModel& model, const DensityMatrix& rho0,
                                  const std::vector<double>& times, double step) {
  IntegratorOptions o;
  o.step = step;
  return evolve_lindblad(model, rho0, times, o);
}

// tr(rho_dot F) for a battery state and its time derivative, evaluated both
// as a trace and as the eigenbasis double sum over delta F_ab <b|rho_dot|a>;
// the two must agree to 1e-9 (scaled).
double power_from_derivative(const DensityMatrix& rho, const HermitianOperator& rho_dot,
                             const ThermoContext& ctx, const RegularizationPolicy& reg);

// -i tr([rho, F (x) 1] V) with F built from the reduced battery state.
double power_closed(const DensityMatrix& rho_full, const ThermoContext& ctx,
                    const RegularizationPolicy& reg, const ClosedModel& model);

// tr(L[rho] F) with the analytic GKLS derivative.
double power_open(const LindbladModel& model, const DensityMatrix& rho,
                  const ThermoContext& ctx, const RegularizationPolicy& reg);

// Central differences of W_max(t) along the battery states of `traj`;
// second-order one-sided differences at the two endpoints.
std::vector<double> power_finite_difference(const Trajectory& traj, const ThermoContext& ctx);

}  // namespace qbat
