#pragma once

// Seeded random instances. Every generator is a pure function of its
// arguments: the engine is std::mt19937_64 (its output sequence is fixed by
// the C++ standard), uniforms take the top 53 bits, normals use Box-Muller.
// No std::*_distribution is involved, so draws are reproducible across
// standard libraries.

#include <cstdint>
#include <random>
#include <string_view>

#include "qbat/dynamics.hpp"
#include "qbat/operators.hpp"

namespace qbat {

inline constexpr std::string_view kRngAlgorithm = "mt19937_64+box-muller/v1";

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();       // [0, 1)
  double normal();        // standard normal
  Complex complex_normal();  // (N1 + i N2)/sqrt(2), E|z|^2 = 1

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// rows x cols matrix of independent complex_normal entries.
Matrix ginibre(Index rows, Index cols, Rng& rng);

// G G^dagger / tr(G G^dagger) with G a dim x rank Ginibre matrix.
DensityMatrix random_density(Index dim, Index rank, Rng& rng);
DensityMatrix random_density(Index dim, Index rank, std::uint64_t seed);

// QR of a Ginibre matrix with the phases of diag(R) divided out.
Matrix haar_unitary(Index dim, Rng& rng);
Matrix haar_unitary(Index dim, std::uint64_t seed);

// (A + A^dagger)/2 with A = scale * Ginibre.
HermitianOperator random_hermitian(Index dim, double scale, Rng& rng);
HermitianOperator random_hermitian(Index dim, double scale, std::uint64_t seed);

// Random Hamiltonian (scale 1) plus `n_channels` Ginibre jump operators with
// rates uniform in (0, gamma_max].
LindbladModel random_lindblad(Index dim, Index n_channels, double gamma_max, Rng& rng);
LindbladModel random_lindblad(Index dim, Index n_channels, double gamma_max, std::uint64_t seed);

// A closed battery instance: local Hamiltonians on every nontrivial factor,
// a random global interaction V and a random full-rank state.
struct ClosedInstance {
  ClosedModel model;
  HermitianOperator battery_hamiltonian;
  DensityMatrix state;
};
ClosedInstance random_closed_instance(const CompositeSpace& space, std::uint64_t seed);

}  // namespace qbat
