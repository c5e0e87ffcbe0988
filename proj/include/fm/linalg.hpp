#pragma once

#include <complex>
#include <Eigen/Dense>

namespace fm {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

// Default absolute tolerance for admissibility checks (Hermiticity residuals,
// isometry defects, unitarity defects). Residual norms are Frobenius.
inline constexpr double kDefaultTol = 1e-9;

// Determinant via partially pivoted LU; 0x0 -> 1, sizes <= 3 use closed forms.
Complex det(const ComplexMatrix& X);

// Matrix exponential, Pade approximation with scaling and squaring. Large
// operands are routed through BLAS so the desk-scale hierarchy exponentials
// stay cheap; accuracy target 1e-10 relative on well-scaled input.
ComplexMatrix expm(const ComplexMatrix& X);

// Principal square root of a Hermitian PSD matrix. Eigenvalues in [-tol, 0)
// are clamped to zero; anything below -tol is rejected.
ComplexMatrix hermitian_sqrt(const ComplexMatrix& X, double tol = kDefaultTol);

// Hermitian H with e^{-iH} = W, eigenphases of W taken in (-pi, pi].
ComplexMatrix unitary_log(const ComplexMatrix& W, double tol = kDefaultTol);

// Extend the isometry rows (A|B) to a 2m x 2m unitary (A B; C D). The top
// blocks are copied verbatim; the bottom rows are an orthonormal basis of the
// orthogonal complement of the row space of (A|B).
ComplexMatrix complete_isometry(const ComplexMatrix& A, const ComplexMatrix& B,
                                double tol = kDefaultTol);

// Kronecker product, first factor on the slow index:
// (X (x) Y)[(i-1)*rows(Y)+k, (j-1)*cols(Y)+l] = X[i,j] * Y[k,l].
ComplexMatrix kron(const ComplexMatrix& X, const ComplexMatrix& Y);

// Partial trace over the second (fast) factor of a d1*d2 square matrix.
ComplexMatrix partial_trace_second(const ComplexMatrix& X, int d1, int d2);

// Frobenius norm of X - X^dagger, used by the Hermiticity checks.
double hermiticity_defect(const ComplexMatrix& X);

// Throws validation_error when X contains NaN or Inf entries.
void require_finite(const ComplexMatrix& X, const char* what);

} // namespace fm
