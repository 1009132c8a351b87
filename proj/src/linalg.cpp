#include "jisa/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jisa {

namespace {

void require_square(const CMatrix& A, const char* what) {
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw ShapeMismatch(std::string(what) + ": expected a non-empty square matrix");
  }
}

}  // namespace

CMatrix hermitian_part(const CMatrix& H) { return 0.5 * (H + H.adjoint()); }

bool all_finite(const CMatrix& A) {
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      if (!std::isfinite(A(i, j).real()) || !std::isfinite(A(i, j).imag())) return false;
    }
  }
  return true;
}

CMatrix cholesky(const CMatrix& H, double ridge) {
  require_square(H, "cholesky");
  const auto dim = H.rows();
  CMatrix Hr = hermitian_part(H);
  if (ridge > 0.0) {
    const double load = ridge * Hr.trace().real() / static_cast<double>(dim);
    Hr.diagonal().array() += load;
  }
  if (!all_finite(Hr)) throw NotPositiveDefinite("cholesky: non-finite input");

  // Plain column-oriented factorization so that every pivot can be checked.
  CMatrix L = CMatrix::Zero(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    double pivot = Hr(j, j).real();
    for (Eigen::Index k = 0; k < j; ++k) pivot -= std::norm(L(j, k));
    if (!(pivot > 0.0)) {
      throw NotPositiveDefinite("cholesky: non-positive pivot at index " + std::to_string(j));
    }
    const double ljj = std::sqrt(pivot);
    L(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < dim; ++i) {
      Complex s = Hr(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= L(i, k) * std::conj(L(j, k));
      L(i, j) = s / ljj;
    }
  }
  return L.adjoint();
}

HermEig herm_eig(const CMatrix& H) {
  require_square(H, "herm_eig");
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(H));
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("herm_eig: eigen-solver did not converge");
  }
  const auto n = H.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const RVector& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return ev(a) > ev(b); });
  HermEig out{RVector(n), CMatrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = ev(order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = solver.eigenvectors().col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

CMatrix right_solve_upper(const CMatrix& M, const CMatrix& Q) {
  // M Q^{-1} = (Q^{-H} M^H)^H
  CMatrix t = Q.adjoint().triangularView<Eigen::Lower>().solve(M.adjoint());
  return t.adjoint();
}

HermEig gen_herm_eig(const CMatrix& A, const CMatrix& B, double ridge) {
  require_square(A, "gen_herm_eig");
  require_square(B, "gen_herm_eig");
  if (A.rows() != B.rows()) throw ShapeMismatch("gen_herm_eig: dimension mismatch");
  const CMatrix Q = cholesky(B, ridge);
  // Q^{-H} A Q^{-1}
  const CMatrix left = Q.adjoint().triangularView<Eigen::Lower>().solve(hermitian_part(A));
  const CMatrix reduced = right_solve_upper(left, Q);
  HermEig eig = herm_eig(reduced);
  eig.vectors = Q.triangularView<Eigen::Upper>().solve(eig.vectors);
  return eig;
}

CMatrix solve(const CMatrix& A, const CMatrix& B) {
  require_square(A, "solve");
  if (A.rows() != B.rows()) throw ShapeMismatch("solve: right-hand side has wrong row count");
  Eigen::PartialPivLU<CMatrix> lu(A);
  const double scale = A.norm();
  const auto& packed = lu.matrixLU();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    if (!(std::abs(packed(i, i)) >= 1e-13 * scale) || scale == 0.0) {
      throw Singular("solve: pivot below threshold at index " + std::to_string(i));
    }
  }
  return lu.solve(B);
}

double log_abs_det(const CMatrix& A) {
  require_square(A, "log_abs_det");
  Eigen::PartialPivLU<CMatrix> lu(A);
  double acc = 0.0;
  const auto& packed = lu.matrixLU();
  for (Eigen::Index i = 0; i < A.rows(); ++i) acc += std::log(std::abs(packed(i, i)));
  return acc;
}

}  // namespace jisa
