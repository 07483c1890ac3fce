#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qbat/errors.hpp"
#include "qbat/random.hpp"
#include "qbat/thermodynamics.hpp"

using namespace qbat;

namespace {

HermitianOperator qubit_h() { return HermitianOperator(Matrix(0.5 * pauli::z())); }

// Conjugates every input by a random unitary.
Matrix rotate(const Matrix& u, const Matrix& m) { return u * m * u.adjoint(); }

}  // namespace

TEST_SUITE("thermodynamics") {

TEST_CASE("context rejects non-positive beta") {
  CHECK_THROWS_AS(ThermoContext(0.0, qubit_h()), InvalidArgument);
  CHECK_THROWS_AS(ThermoContext(-1.0, qubit_h()), InvalidArgument);
  CHECK_THROWS_AS(ThermoContext(INFINITY, qubit_h()), InvalidArgument);
}

TEST_CASE("thermal state") {
  SUBCASE("zero hamiltonian gives the maximally mixed state") {
    const auto tau = thermal_state(ThermoContext(3.0, HermitianOperator::zero(3)));
    CHECK(oracle::max_abs(tau.matrix() - Matrix::Identity(3, 3) / 3.0) < 1e-15);
  }
  SUBCASE("two-level partition function") {
    const double beta = 0.001;
    const auto tau = thermal_state(ThermoContext(beta, qubit_h()));
    const double z = std::exp(-beta / 2) + std::exp(beta / 2);
    CHECK(tau.matrix()(0, 0).real() == doctest::Approx(std::exp(-beta / 2) / z).epsilon(1e-14));
    CHECK(tau.matrix()(1, 1).real() == doctest::Approx(std::exp(beta / 2) / z).epsilon(1e-14));
    CHECK(tau.matrix()(0, 0).real() == doctest::Approx(0.49975).epsilon(1e-6));
    CHECK(log_partition_function(ThermoContext(beta, qubit_h())) ==
          doctest::Approx(std::log(z)).epsilon(1e-14));
  }
  SUBCASE("overflow guard") {
    CHECK_THROWS_AS(thermal_state(ThermoContext(800.0, qubit_h())), InvalidArgument);
  }
  SUBCASE("populations strictly positive and Gibbs W_max vanishes") {
    Rng rng(1);
    for (int k = 0; k < 20; ++k) {
      const ThermoContext ctx(10.0, random_hermitian(4, 1.0, rng));
      const auto tau = thermal_state(ctx);
      REQUIRE(tau.spectral().eigenvalues.minCoeff() > 0.0);
      REQUIRE(std::abs(max_extractable_work(ctx, tau)) < 1e-12);
    }
  }
}

TEST_CASE("free energy operator") {
  Rng rng(2);
  SUBCASE("gibbs cancellation") {
    for (double beta : {0.1, 1.0, 3.0}) {
      const ThermoContext ctx(beta, random_hermitian(3, 1.0, rng));
      const auto f = free_energy_operator(ctx, thermal_state(ctx), {});
      const double c = -log_partition_function(ctx) / beta;
      REQUIRE(oracle::max_abs(f.matrix() - c * Matrix::Identity(3, 3)) < 1e-9);
      REQUIRE(variance(thermal_state(ctx), f) < 1e-12);
    }
  }
  SUBCASE("maximally mixed state") {
    const ThermoContext ctx(2.0, random_hermitian(3, 1.0, rng));
    const auto f = free_energy_operator(ctx, DensityMatrix::maximally_mixed(3), {});
    const Matrix expected = ctx.hamiltonian().matrix() - std::log(3.0) / 2.0 * Matrix::Identity(3, 3);
    CHECK(oracle::max_abs(f.matrix() - expected) < 1e-13);
  }
  SUBCASE("expectation equals U - S/beta") {
    for (int k = 0; k < 50; ++k) {
      const ThermoContext ctx(0.7, random_hermitian(3, 1.0, rng));
      const auto rho = random_density(3, 3, rng);
      const auto f = free_energy_operator(ctx, rho, {});
      const RealVector p = rho.spectral().eigenvalues;
      double s = 0.0;
      for (Index i = 0; i < 3; ++i) s -= p(i) * std::log(p(i));
      const double u = (rho.matrix() * ctx.hamiltonian().matrix()).trace().real();
      REQUIRE(std::abs(expectation(rho, f) - (u - s / 0.7)) < 1e-10);
      REQUIRE(std::abs(nonequilibrium_free_energy(ctx, rho) - (u - s / 0.7)) < 1e-10);
    }
  }
  SUBCASE("regularization policies on a pure state") {
    const ThermoContext ctx(1.0, qubit_h());
    const auto pure = DensityMatrix::basis_state(2, 0);
    CHECK_THROWS_AS(free_energy_operator(ctx, pure, RegularizationPolicy::reject()),
                    SingularLogarithm);
    const auto truncated = free_energy_operator(ctx, pure, RegularizationPolicy::support_truncate());
    CHECK(oracle::max_abs(truncated.matrix() - ctx.hamiltonian().matrix()) < 1e-15);
    const double eps = 1e-3;
    const auto mixed = free_energy_operator(ctx, pure, RegularizationPolicy::epsilon_mix(eps));
    CHECK(mixed(1, 1).real() == doctest::Approx(-0.5 + std::log(eps / 2)).epsilon(1e-12));
    CHECK(mixed(0, 0).real() == doctest::Approx(0.5 + std::log(1 - eps / 2)).epsilon(1e-12));
  }
  SUBCASE("epsilon mix keeps the eigenvectors") {
    const auto rho = random_density(4, 2, rng);
    const auto mixed = mix_with_identity(rho, 0.1);
    CHECK(mixed.spectral().eigenvectors == rho.spectral().eigenvectors);
    CHECK(oracle::max_abs(mixed.matrix() - (0.9 * rho.matrix() + 0.025 * Matrix::Identity(4, 4))) <
          1e-14);
    CHECK_THROWS_AS(mix_with_identity(rho, 1.0), InvalidArgument);
  }
}

TEST_CASE("entropy") {
  CHECK(von_neumann_entropy(DensityMatrix::basis_state(3, 1)) == 0.0);
  CHECK(von_neumann_entropy(DensityMatrix::maximally_mixed(5)) == doctest::Approx(std::log(5.0)));
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 0.75;
  m(1, 1) = 0.25;
  const double expected = -0.75 * std::log(0.75) - 0.25 * std::log(0.25);
  CHECK(von_neumann_entropy(DensityMatrix(m)) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == doctest::Approx(0.5623).epsilon(1e-4));
}

TEST_CASE("relative entropy") {
  Rng rng(5);
  const auto rho = random_density(3, 3, rng);
  CHECK(std::abs(relative_entropy(rho, rho).value) < 1e-12);
  const auto d = relative_entropy(DensityMatrix::basis_state(2, 0), DensityMatrix::maximally_mixed(2));
  CHECK_FALSE(d.infinite);
  CHECK(d.value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(relative_entropy(DensityMatrix::maximally_mixed(2), DensityMatrix::basis_state(2, 0)).infinite);
  for (int k = 0; k < 50; ++k) {
    const auto a = random_density(4, 4, rng), b = random_density(4, 4, rng);
    const Matrix la = matrix_log(a.op(), LogPolicy::kReject).matrix();
    const Matrix lb = matrix_log(b.op(), LogPolicy::kReject).matrix();
    const double two_path = (a.matrix() * (la - lb)).trace().real();
    const auto r = relative_entropy(a, b);
    REQUIRE_FALSE(r.infinite);
    REQUIRE(r.value >= 0.0);
    REQUIRE(std::abs(r.value - two_path) < 1e-10);
  }
}

TEST_CASE("maximum extractable work") {
  SUBCASE("excited qubit closed form") {
    const ThermoContext ctx(1.0, qubit_h());
    const double expected = 0.5 + std::log(std::exp(-0.5) + std::exp(0.5));
    CHECK(max_extractable_work(ctx, DensityMatrix::basis_state(2, 0)) ==
          doctest::Approx(expected).epsilon(1e-13));
  }
  SUBCASE("non-negative and equal to F(rho) - F(tau)") {
    Rng rng(6);
    for (int k = 0; k < 1000; ++k) {
      const Index d = 2 + k % 5;
      const double beta = k % 3 == 0 ? 0.1 : (k % 3 == 1 ? 1.0 : 10.0);
      const ThermoContext ctx(beta, random_hermitian(d, 1.0, rng));
      const auto rho = random_density(d, 1 + k % d, rng);
      const double w = max_extractable_work(ctx, rho);
      REQUIRE(w >= -1e-12);
      const double f_diff = nonequilibrium_free_energy(ctx, rho) - equilibrium_free_energy(ctx);
      REQUIRE(std::abs(w - f_diff) <= 1e-9 * std::max(1.0, std::abs(w)));
    }
  }
}

TEST_CASE("ergotropy") {
  const HermitianOperator h = qubit_h();
  CHECK(ergotropy(h, DensityMatrix::basis_state(2, 0)) == doctest::Approx(1.0));
  CHECK(ergotropy(h, DensityMatrix::basis_state(2, 1)) == doctest::Approx(0.0));
  Rng rng(7);
  for (int k = 0; k < 1000; ++k) {
    const Index d = 2 + k % 3;
    const HermitianOperator hk = random_hermitian(d, 1.0, rng);
    const auto rho = random_density(d, 1 + k % d, rng);
    const double e = ergotropy(hk, rho);
    REQUIRE(std::abs(e - oracle::ergotropy_bruteforce(hk.matrix(), rho.matrix())) < 1e-10);
    const double headroom =
        expectation(rho, hk) - eig_hermitian(hk).eigenvalues.minCoeff();
    REQUIRE(e <= headroom + 1e-12);
    // Gibbs states are passive.
    REQUIRE(std::abs(ergotropy(hk, thermal_state(ThermoContext(1.0, hk)))) < 1e-12);
  }
}

TEST_CASE("variance and covariance") {
  Rng rng(9);
  const HermitianOperator z(pauli::z());
  CHECK(variance(DensityMatrix::maximally_mixed(2), z) == doctest::Approx(1.0));
  CHECK(variance(DensityMatrix::basis_state(2, 1), z) == doctest::Approx(0.0));
  // Commuting operators in a joint eigenstate.
  CHECK(std::abs(covariance(DensityMatrix::basis_state(2, 0), z, HermitianOperator::identity(2))) <
        1e-15);
  for (int k = 0; k < 500; ++k) {
    const Index d = 2 + k % 5;
    const auto rho = random_density(d, 1 + k % d, rng);
    const auto a = random_hermitian(d, 1.0, rng), b = random_hermitian(d, 1.0, rng);
    const Complex caa = covariance(rho, a, a);
    REQUIRE(std::abs(caa.imag()) < 1e-12);
    REQUIRE(std::abs(caa.real() - variance(rho, a)) < 1e-12);
    const Complex cab = covariance(rho, a, b), cba = covariance(rho, b, a);
    REQUIRE(std::abs(cab - std::conj(cba)) < 1e-12);
    const double va = variance(rho, a), vb = variance(rho, b);
    REQUIRE(std::norm(cab) <= va * vb + 1e-10);
    REQUIRE(va * vb - (cab * cab).real() >= -1e-12);
    // Elementwise oracle for the variance.
    const Matrix& r = rho.matrix();
    const Matrix& am = a.matrix();
    Complex m1 = 0.0, m2 = 0.0;
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) {
        m1 += r(j, i) * am(i, j);
        for (Index l = 0; l < d; ++l) m2 += r(j, i) * am(i, l) * am(l, j);
      }
    REQUIRE(std::abs(va - (m2.real() - m1.real() * m1.real())) < 1e-12);
  }
}

TEST_CASE("scalar quantifiers are basis independent") {
  Rng rng(10);
  for (int k = 0; k < 100; ++k) {
    const Index d = 2 + k % 4;
    const auto h = random_hermitian(d, 1.0, rng);
    const auto rho = random_density(d, d, rng);
    const auto a = random_hermitian(d, 1.0, rng);
    const Matrix u = haar_unitary(d, rng);
    const HermitianOperator hr = HermitianOperator::hermitian_part(rotate(u, h.matrix()));
    const HermitianOperator ar = HermitianOperator::hermitian_part(rotate(u, a.matrix()));
    const DensityMatrix rr(HermitianOperator::hermitian_part(rotate(u, rho.matrix())));
    const ThermoContext c1(1.3, h), c2(1.3, hr);
    REQUIRE(std::abs(max_extractable_work(c1, rho) - max_extractable_work(c2, rr)) < 1e-9);
    REQUIRE(std::abs(ergotropy(h, rho) - ergotropy(hr, rr)) < 1e-9);
    REQUIRE(std::abs(von_neumann_entropy(rho) - von_neumann_entropy(rr)) < 1e-9);
    REQUIRE(std::abs(variance(rho, a) - variance(rr, ar)) < 1e-9);
    const auto f1 = free_energy_operator(c1, rho, {});
    const auto f2 = free_energy_operator(c2, rr, {});
    REQUIRE(std::abs(variance(rho, f1) - variance(rr, f2)) < 1e-9);
  }
}

}  // TEST_SUITE
