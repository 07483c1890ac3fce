#include "qbat/random.hpp"

#include <cmath>
#include <numbers>

#include "qbat/errors.hpp"

namespace qbat {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Complex Rng::complex_normal() {
  const double re = normal();
  const double im = normal();
  return Complex(re, im) * std::numbers::sqrt2 * 0.5;
}

Matrix ginibre(Index rows, Index cols, Rng& rng) {
  Matrix g(rows, cols);
  // Row-major fill so the draw order does not depend on storage order.
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) g(i, j) = rng.complex_normal();
  return g;
}

DensityMatrix random_density(Index dim, Index rank, Rng& rng) {
  if (dim < 1 || rank < 1 || rank > dim)
    throw InvalidArgument("random_density: need 1 <= rank <= dim");
  const Matrix g = ginibre(dim, rank, rng);
  Matrix m = g * g.adjoint();
  m /= m.trace().real();
  return DensityMatrix(Matrix(0.5 * (m + m.adjoint())));
}

DensityMatrix random_density(Index dim, Index rank, std::uint64_t seed) {
  Rng rng(seed);
  return random_density(dim, rank, rng);
}

Matrix haar_unitary(Index dim, Rng& rng) {
  if (dim < 1) throw InvalidArgument("haar_unitary: dim must be >= 1");
  const Matrix z = ginibre(dim, dim, rng);
  Eigen::HouseholderQR<Matrix> qr(z);
  const Matrix q = qr.householderQ();
  const Matrix& r = qr.matrixQR();
  Matrix u = q;
  for (Index j = 0; j < dim; ++j) {
    const double mod = std::abs(r(j, j));
    if (mod > 0.0) u.col(j) *= r(j, j) / mod;
  }
  return u;
}

Matrix haar_unitary(Index dim, std::uint64_t seed) {
  Rng rng(seed);
  return haar_unitary(dim, rng);
}

HermitianOperator random_hermitian(Index dim, double scale, Rng& rng) {
  if (dim < 1) throw InvalidArgument("random_hermitian: dim must be >= 1");
  if (!(scale >= 0.0)) throw InvalidArgument("random_hermitian: scale must be >= 0");
  const Matrix a = scale * ginibre(dim, dim, rng);
  return HermitianOperator::hermitian_part(a);
}

HermitianOperator random_hermitian(Index dim, double scale, std::uint64_t seed) {
  Rng rng(seed);
  return random_hermitian(dim, scale, rng);
}

LindbladModel random_lindblad(Index dim, Index n_channels, double gamma_max, Rng& rng) {
  if (!(gamma_max > 0.0)) throw InvalidArgument("random_lindblad: gamma_max must be > 0");
  if (n_channels < 0) throw InvalidArgument("random_lindblad: negative channel count");
  HermitianOperator h = random_hermitian(dim, 1.0, rng);
  std::vector<LindbladChannel> channels;
  for (Index j = 0; j < n_channels; ++j) {
    LindbladChannel c;
    c.gamma = gamma_max * (1.0 - rng.uniform());  // (0, gamma_max]
    c.jump = ginibre(dim, dim, rng) / std::sqrt(static_cast<double>(dim));
    channels.push_back(std::move(c));
  }
  return LindbladModel(std::move(h), std::move(channels));
}

LindbladModel random_lindblad(Index dim, Index n_channels, double gamma_max,
                              std::uint64_t seed) {
  Rng rng(seed);
  return random_lindblad(dim, n_channels, gamma_max, rng);
}

ClosedInstance random_closed_instance(const CompositeSpace& space, std::uint64_t seed) {
  Rng rng(seed);
  const Index n = space.total_dim();
  HermitianOperator h_w = random_hermitian(space.battery_dim(), 1.0, rng);
  Matrix local = embed(h_w.matrix(), space, space.battery_index());
  for (Index k = 0; k + 1 < space.size(); ++k) {
    const Index d = space.dims()[k];
    if (d > 1) local += embed(random_hermitian(d, 1.0, rng).matrix(), space, k);
  }
  HermitianOperator v = random_hermitian(n, 1.0, rng);
  DensityMatrix rho = random_density(n, n, rng);
  return {ClosedModel(space, HermitianOperator::hermitian_part(local), std::move(v)),
          std::move(h_w), std::move(rho)};
}

}  // namespace qbat
