#include "qbat/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qbat/errors.hpp"

namespace qbat {

namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << m.rows()
       << "x" << m.cols();
    throw InvalidArgument(os.str());
  }
}

void fix_phases(Matrix& vecs) {
  for (Index c = 0; c < vecs.cols(); ++c) {
    for (Index r = 0; r < vecs.rows(); ++r) {
      const double mod = std::abs(vecs(r, c));
      if (mod > 1e-8) {
        vecs.col(c) *= std::conj(vecs(r, c)) / mod;
        vecs(r, c) = Complex(mod, 0.0);
        break;
      }
    }
  }
}

}  // namespace

double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

// ---------------------------------------------------------------------------
// HermitianOperator

HermitianOperator::HermitianOperator(const Matrix& m, double tol) {
  require_square(m, "HermitianOperator");
  const double scale = max_abs(m);
  const double skew = max_abs(m - m.adjoint());
  if (skew > tol * scale) {
    std::ostringstream os;
    os << "HermitianOperator: matrix is not Hermitian (max |A - A^dagger| = "
       << skew << ", max |A| = " << scale << ")";
    throw InvalidArgument(os.str());
  }
  m_ = 0.5 * (m + m.adjoint());
}

HermitianOperator HermitianOperator::hermitian_part(const Matrix& m) {
  require_square(m, "HermitianOperator::hermitian_part");
  return HermitianOperator(Matrix(0.5 * (m + m.adjoint())), Unchecked{});
}

HermitianOperator HermitianOperator::zero(Index dim) {
  if (dim < 1) throw InvalidArgument("HermitianOperator::zero: dim must be >= 1");
  return HermitianOperator(Matrix::Zero(dim, dim), Unchecked{});
}

HermitianOperator HermitianOperator::identity(Index dim) {
  if (dim < 1) throw InvalidArgument("HermitianOperator::identity: dim must be >= 1");
  return HermitianOperator(Matrix::Identity(dim, dim), Unchecked{});
}

HermitianOperator HermitianOperator::diagonal(const RealVector& d) {
  if (d.size() < 1) throw InvalidArgument("HermitianOperator::diagonal: empty");
  return HermitianOperator(d.cast<Complex>().asDiagonal().toDenseMatrix(),
                           Unchecked{});
}

HermitianOperator HermitianOperator::operator+(const HermitianOperator& o) const {
  if (o.dim() != dim()) throw InvalidArgument("HermitianOperator +: dimension mismatch");
  return HermitianOperator(m_ + o.m_, Unchecked{});
}

HermitianOperator HermitianOperator::operator-(const HermitianOperator& o) const {
  if (o.dim() != dim()) throw InvalidArgument("HermitianOperator -: dimension mismatch");
  return HermitianOperator(m_ - o.m_, Unchecked{});
}

HermitianOperator HermitianOperator::operator*(double s) const {
  return HermitianOperator(m_ * s, Unchecked{});
}

HermitianOperator HermitianOperator::shifted(double c) const {
  Matrix m = m_;
  m.diagonal().array() -= c;
  return HermitianOperator(std::move(m), Unchecked{});
}

// ---------------------------------------------------------------------------
// Spectral decomposition

Matrix SpectralDecomposition::reconstruct() const {
  return eigenvectors * eigenvalues.cast<Complex>().asDiagonal() *
         eigenvectors.adjoint();
}

Matrix SpectralDecomposition::to_eigenbasis(const Matrix& m) const {
  return eigenvectors.adjoint() * m * eigenvectors;
}

SpectralDecomposition eig_hermitian(const HermitianOperator& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix());
  if (solver.info() != Eigen::Success)
    throw ConsistencyError("eig_hermitian: eigensolver did not converge");
  SpectralDecomposition out;
  // Eigen returns ascending order.
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  fix_phases(out.eigenvectors);
  return out;
}

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(const Matrix& m, double clamp_window)
    : op_(m), spectral_() {
  spectral_ = eig_hermitian(op_);
  validate(clamp_window);
}

DensityMatrix::DensityMatrix(const HermitianOperator& op, double clamp_window)
    : op_(op), spectral_(eig_hermitian(op)) {
  validate(clamp_window);
}

void DensityMatrix::validate(double clamp_window) {
  const double tr = op_.matrix().trace().real();
  if (std::abs(tr - 1.0) > kTraceTol) {
    std::ostringstream os;
    os.precision(17);
    os << "DensityMatrix: trace " << tr << " differs from 1";
    throw InvalidArgument(os.str());
  }
  for (Index i = 0; i < spectral_.dim(); ++i) {
    double& p = spectral_.eigenvalues(i);
    if (p < -clamp_window) {
      std::ostringstream os;
      os << "DensityMatrix: negative eigenvalue " << p;
      throw InvalidArgument(os.str());
    }
    if (p < 0.0) p = 0.0;
  }
}

DensityMatrix DensityMatrix::from_spectrum(const SpectralDecomposition& spec) {
  const Index n = spec.dim();
  if (n < 1 || spec.eigenvectors.rows() != n || spec.eigenvectors.cols() != n)
    throw InvalidArgument("DensityMatrix::from_spectrum: inconsistent sizes");
  const double ortho = max_abs(spec.eigenvectors.adjoint() * spec.eigenvectors -
                               Matrix::Identity(n, n));
  if (ortho > 1e-10)
    throw InvalidArgument("DensityMatrix::from_spectrum: eigenvectors not orthonormal");
  for (Index i = 1; i < n; ++i)
    if (spec.eigenvalues(i) > spec.eigenvalues(i - 1))
      throw InvalidArgument("DensityMatrix::from_spectrum: eigenvalues not descending");
  DensityMatrix rho(HermitianOperator(spec.reconstruct()), spec);
  rho.validate(kClampWindow);
  return rho;
}

DensityMatrix DensityMatrix::pure(const Vector& psi) {
  const double norm = psi.norm();
  if (psi.size() < 1 || norm == 0.0)
    throw InvalidArgument("DensityMatrix::pure: zero vector");
  const Vector v = psi / norm;
  return DensityMatrix(Matrix(v * v.adjoint()));
}

DensityMatrix DensityMatrix::basis_state(Index dim, Index k) {
  if (dim < 1 || k < 0 || k >= dim)
    throw InvalidArgument("DensityMatrix::basis_state: index out of range");
  Vector v = Vector::Zero(dim);
  v(k) = 1.0;
  return pure(v);
}

DensityMatrix DensityMatrix::maximally_mixed(Index dim) {
  if (dim < 1) throw InvalidArgument("DensityMatrix::maximally_mixed: dim must be >= 1");
  return DensityMatrix(Matrix(Matrix::Identity(dim, dim) / static_cast<double>(dim)));
}

double DensityMatrix::purity() const {
  return trace_product(matrix(), matrix()).real();
}

Index DensityMatrix::rank(double support_tol) const {
  return (spectral_.eigenvalues.array() > support_tol).count();
}

// ---------------------------------------------------------------------------
// CompositeSpace

CompositeSpace::CompositeSpace(std::vector<Index> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw InvalidArgument("CompositeSpace: no subsystems");
  for (Index d : dims_) {
    if (d < 1) throw InvalidArgument("CompositeSpace: subsystem dimension must be >= 1");
    if (total_ > kDefaultMaxTotalDim / d)
      throw InvalidArgument("CompositeSpace: total dimension exceeds limit");
    total_ *= d;
  }
}

// ---------------------------------------------------------------------------
// Matrix functions

HermitianOperator matrix_function(const SpectralDecomposition& spec,
                                  const std::function<double(double)>& f) {
  RealVector fx(spec.dim());
  for (Index i = 0; i < spec.dim(); ++i) fx(i) = f(spec.eigenvalues(i));
  const Matrix& u = spec.eigenvectors;
  return HermitianOperator::hermitian_part(u * fx.cast<Complex>().asDiagonal() * u.adjoint());
}

HermitianOperator matrix_function(const HermitianOperator& a,
                                  const std::function<double(double)>& f) {
  return matrix_function(eig_hermitian(a), f);
}

HermitianOperator matrix_log(const SpectralDecomposition& spec, LogPolicy policy,
                             double support_tol) {
  if (policy == LogPolicy::kReject) {
    for (Index i = 0; i < spec.dim(); ++i) {
      const double p = spec.eigenvalues(i);
      if (p <= support_tol) {
        std::ostringstream os;
        os << "matrix_log: eigenvalue " << p << " at or below support cutoff "
           << support_tol;
        throw SingularLogarithm(os.str(), p);
      }
    }
  }
  return matrix_function(spec, [support_tol](double x) {
    return x > support_tol ? std::log(x) : 0.0;
  });
}

HermitianOperator matrix_log(const HermitianOperator& a, LogPolicy policy,
                             double support_tol) {
  return matrix_log(eig_hermitian(a), policy, support_tol);
}

HermitianOperator matrix_exp(const HermitianOperator& a) {
  return matrix_function(a, [](double x) { return std::exp(x); });
}

HermitianOperator matrix_sqrt(const HermitianOperator& a) {
  const SpectralDecomposition spec = eig_hermitian(a);
  if (spec.eigenvalues.minCoeff() < -kClampWindow)
    throw InvalidArgument("matrix_sqrt: operator is not positive semidefinite");
  return matrix_function(spec, [](double x) { return std::sqrt(std::max(x, 0.0)); });
}

// ---------------------------------------------------------------------------
// Tensor products, embedding, partial trace

Matrix kron(const Matrix& a, const Matrix& b, Index max_total_dim) {
  if (a.rows() > 0 && b.rows() > max_total_dim / a.rows())
    throw InvalidArgument("kron: total dimension exceeds configured maximum");
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b,
                         Index max_total_dim) {
  return HermitianOperator(kron(a.matrix(), b.matrix(), max_total_dim));
}

Matrix embed(const Matrix& a, const CompositeSpace& space, Index subsystem) {
  if (subsystem < 0 || subsystem >= space.size())
    throw InvalidArgument("embed: invalid subsystem index");
  const Index d = space.dims()[subsystem];
  if (a.rows() != d || a.cols() != d) {
    std::ostringstream os;
    os << "embed: operator dimension " << a.rows() << " does not match subsystem "
       << subsystem << " dimension " << d;
    throw InvalidArgument(os.str());
  }
  const auto& dims = space.dims();
  const Index left = std::accumulate(dims.begin(), dims.begin() + subsystem, Index{1},
                                     std::multiplies<>());
  const Index right = std::accumulate(dims.begin() + subsystem + 1, dims.end(),
                                      Index{1}, std::multiplies<>());
  return kron(kron(Matrix::Identity(left, left), a), Matrix::Identity(right, right));
}

HermitianOperator embed_battery_operator(const HermitianOperator& a,
                                         const CompositeSpace& space) {
  return HermitianOperator(embed(a.matrix(), space, space.battery_index()));
}

Matrix partial_trace(const Matrix& m, const CompositeSpace& space, Index keep) {
  if (keep < 0 || keep >= space.size())
    throw InvalidArgument("partial_trace: invalid subsystem index");
  if (m.rows() != space.total_dim() || m.cols() != space.total_dim())
    throw InvalidArgument("partial_trace: operator dimension does not match space");
  const auto& dims = space.dims();
  const Index dk = dims[keep];
  const Index left = std::accumulate(dims.begin(), dims.begin() + keep, Index{1},
                                     std::multiplies<>());
  const Index right = std::accumulate(dims.begin() + keep + 1, dims.end(), Index{1},
                                      std::multiplies<>());
  Matrix out = Matrix::Zero(dk, dk);
  for (Index l = 0; l < left; ++l)
    for (Index a = 0; a < dk; ++a)
      for (Index b = 0; b < dk; ++b) {
        Complex acc = 0.0;
        const Index ra = (l * dk + a) * right;
        const Index rb = (l * dk + b) * right;
        for (Index r = 0; r < right; ++r) acc += m(ra + r, rb + r);
        out(a, b) += acc;
      }
  return out;
}

DensityMatrix partial_trace(const DensityMatrix& rho, const CompositeSpace& space,
                            Index keep) {
  return DensityMatrix(partial_trace(rho.matrix(), space, keep));
}

Complex trace_product(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows() || a.rows() != b.cols())
    throw InvalidArgument("trace_product: dimension mismatch");
  return (a.array() * b.transpose().array()).sum();
}

double expectation(const DensityMatrix& rho, const HermitianOperator& a) {
  if (rho.dim() != a.dim()) throw InvalidArgument("expectation: dimension mismatch");
  const Complex v = trace_product(rho.matrix(), a.matrix());
  if (std::abs(v.imag()) > 1e-10 * std::max(1.0, max_abs(a.matrix())))
    throw ConsistencyError("expectation: non-negligible imaginary part");
  return v.real();
}

// ---------------------------------------------------------------------------

namespace pauli {
Matrix x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
Matrix y() {
  Matrix m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}
Matrix z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
Matrix raising() {
  Matrix m(2, 2);
  m << 0, 1, 0, 0;
  return m;
}
Matrix lowering() {
  Matrix m(2, 2);
  m << 0, 0, 1, 0;
  return m;
}
}  // namespace pauli

}  // namespace qbat
