#pragma once

// Dense complex kernels for the small per-frequency matrices (M <= ~16).

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace jisa {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class Singular : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

/// Relative ridge applied to covariance factorizations unless stated otherwise.
inline constexpr double kDefaultRidge = 1e-10;

/// Upper-triangular Q with Q^H Q = H + ridge * tr(H)/dim * I.
/// Throws NotPositiveDefinite when a pivot is not strictly positive.
CMatrix cholesky(const CMatrix& H, double ridge = 0.0);

struct HermEig {
  RVector values;   // descending
  CMatrix vectors;  // column i pairs with values(i)
};

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in descending order.
/// Equal eigenvalues keep the order produced by the underlying solver.
HermEig herm_eig(const CMatrix& H);

/// Solves A v = lambda B v through the Cholesky reduction B = Q^H Q.
/// Eigenvectors are returned B-orthonormal (v^H B v = 1).
HermEig gen_herm_eig(const CMatrix& A, const CMatrix& B, double ridge = 0.0);

/// X with A X = B, partially pivoted LU. Throws Singular if a pivot is
/// below 1e-13 ||A||_F.
CMatrix solve(const CMatrix& A, const CMatrix& B);

/// Inverse of an upper-triangular matrix applied from the right: M Q^{-1}.
CMatrix right_solve_upper(const CMatrix& M, const CMatrix& Q);

/// Returns the Hermitian part (H + H^H)/2.
CMatrix hermitian_part(const CMatrix& H);

/// log |det A| through LU; -inf when A is exactly singular.
double log_abs_det(const CMatrix& A);

/// True if every entry is finite.
bool all_finite(const CMatrix& A);

}  // namespace jisa
