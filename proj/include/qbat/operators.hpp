#pragma once

// Dense complex operator algebra on small Hilbert spaces: Hermitian and
// density-matrix value types, spectral decomposition, matrix functions,
// Kronecker products, subsystem embedding and partial trace.
//
// Tensor-factor convention: subsystems are ordered S, B, A, W and the
// battery W is always the last (fastest-varying) factor.

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <vector>

namespace qbat {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kClampWindow = 1e-12;
inline constexpr double kDefaultSupportTol = 1e-10;
inline constexpr Index kDefaultMaxTotalDim = 4096;

class HermitianOperator {
 public:
  HermitianOperator() : m_(Matrix::Zero(1, 1)) {}
  // Rejects non-square input or an anti-Hermitian part larger than
  // tol * max|m_ij|; the stored matrix is the exact Hermitian part.
  explicit HermitianOperator(const Matrix& m, double tol = kHermitianTol);

  // (m + m^dagger)/2 without a Hermiticity check; for quantities that are
  // Hermitian by construction (generators, matrix functions).
  static HermitianOperator hermitian_part(const Matrix& m);
  static HermitianOperator zero(Index dim);
  static HermitianOperator identity(Index dim);
  static HermitianOperator diagonal(const RealVector& d);

  Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  Complex operator()(Index i, Index j) const { return m_(i, j); }

  HermitianOperator operator+(const HermitianOperator& o) const;
  HermitianOperator operator-(const HermitianOperator& o) const;
  HermitianOperator operator*(double s) const;
  // A - c*1
  HermitianOperator shifted(double c) const;

 private:
  struct Unchecked {};
  HermitianOperator(Matrix m, Unchecked) : m_(std::move(m)) {}
  Matrix m_;
};

// Eigenvalues in descending order; columns of `eigenvectors` are the
// matching orthonormal eigenvectors, each phase-fixed so that its first
// component of modulus > 1e-8 is real and positive. Inside a degenerate
// cluster the basis is not unique.
struct SpectralDecomposition {
  RealVector eigenvalues;
  Matrix eigenvectors;

  Index dim() const { return eigenvalues.size(); }
  Matrix reconstruct() const;
  // Representation of `m` in this eigenbasis: U^dagger m U.
  Matrix to_eigenbasis(const Matrix& m) const;
};

SpectralDecomposition eig_hermitian(const HermitianOperator& a);

class DensityMatrix {
 public:
  // Validates Hermiticity, unit trace (1e-12) and positivity: eigenvalues in
  // [-clamp_window, 0) are read as 0, anything more negative is rejected.
  explicit DensityMatrix(const Matrix& m, double clamp_window = kClampWindow);
  explicit DensityMatrix(const HermitianOperator& op,
                         double clamp_window = kClampWindow);

  // Build from a known spectrum without re-diagonalizing. Eigenvalues must
  // be descending and the eigenvectors orthonormal.
  static DensityMatrix from_spectrum(const SpectralDecomposition& spec);
  static DensityMatrix pure(const Vector& psi);
  static DensityMatrix basis_state(Index dim, Index k);
  static DensityMatrix maximally_mixed(Index dim);

  Index dim() const { return op_.dim(); }
  const HermitianOperator& op() const { return op_; }
  const Matrix& matrix() const { return op_.matrix(); }
  const SpectralDecomposition& spectral() const { return spectral_; }
  double purity() const;
  // Number of eigenvalues above `support_tol`.
  Index rank(double support_tol = kDefaultSupportTol) const;

 private:
  DensityMatrix(HermitianOperator op, SpectralDecomposition spec)
      : op_(std::move(op)), spectral_(std::move(spec)) {}
  void validate(double clamp_window);

  HermitianOperator op_;
  SpectralDecomposition spectral_;
};

// Ordered subsystem dimensions, battery last. A dimension of 1 stands for
// an absent subsystem.
class CompositeSpace {
 public:
  explicit CompositeSpace(std::vector<Index> dims);
  static CompositeSpace sbaw(Index s, Index b, Index a, Index w) {
    return CompositeSpace({s, b, a, w});
  }

  const std::vector<Index>& dims() const { return dims_; }
  Index total_dim() const { return total_; }
  Index size() const { return static_cast<Index>(dims_.size()); }
  Index battery_index() const { return size() - 1; }
  Index battery_dim() const { return dims_.back(); }

  bool operator==(const CompositeSpace&) const = default;

 private:
  std::vector<Index> dims_;
  Index total_ = 1;
};

enum class LogPolicy {
  kSupportTruncate,  // eigenvalues <= support_tol contribute 0
  kReject,           // eigenvalues <= support_tol raise SingularLogarithm
};

// U f(diag lambda) U^dagger for an arbitrary real scalar function.
HermitianOperator matrix_function(const HermitianOperator& a,
                                  const std::function<double(double)>& f);
HermitianOperator matrix_function(const SpectralDecomposition& spec,
                                  const std::function<double(double)>& f);

HermitianOperator matrix_log(const HermitianOperator& a, LogPolicy policy,
                             double support_tol = kDefaultSupportTol);
HermitianOperator matrix_log(const SpectralDecomposition& spec,
                             LogPolicy policy,
                             double support_tol = kDefaultSupportTol);
HermitianOperator matrix_exp(const HermitianOperator& a);
// Principal square root of a positive semidefinite operator; eigenvalues in
// [-kClampWindow, 0) are treated as 0.
HermitianOperator matrix_sqrt(const HermitianOperator& a);

// Kronecker product a (x) b; b is the fast index.
Matrix kron(const Matrix& a, const Matrix& b,
            Index max_total_dim = kDefaultMaxTotalDim);
HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b,
                         Index max_total_dim = kDefaultMaxTotalDim);

// Identity on every factor except `subsystem`, where `a` acts.
Matrix embed(const Matrix& a, const CompositeSpace& space, Index subsystem);
HermitianOperator embed_battery_operator(const HermitianOperator& a,
                                         const CompositeSpace& space);

// Trace out every factor except `keep`. The matrix overload accepts any
// square operator (e.g. a time derivative of a state).
Matrix partial_trace(const Matrix& m, const CompositeSpace& space, Index keep);
DensityMatrix partial_trace(const DensityMatrix& rho,
                            const CompositeSpace& space, Index keep);

// tr(a b) without forming the product.
Complex trace_product(const Matrix& a, const Matrix& b);

// tr(rho A); the imaginary residue is checked (< 1e-10 scaled) and dropped.
double expectation(const DensityMatrix& rho, const HermitianOperator& a);

Matrix commutator(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& m);

// Single-qubit operators in the (e, g) basis: |e> = index 0, |g> = index 1.
namespace pauli {
Matrix x();
Matrix y();
Matrix z();
Matrix raising();   // sigma_+ = |e><g|
Matrix lowering();  // sigma_- = |g><e|
}  // namespace pauli

}  // namespace qbat
