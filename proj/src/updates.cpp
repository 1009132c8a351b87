#include "jisa/updates.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace jisa {

CMatrix ridged(const CMatrix& H, double ridge) {
  CMatrix out = hermitian_part(H);
  if (ridge > 0.0) {
    out.diagonal().array() += ridge * out.trace().real() / static_cast<double>(out.rows());
  }
  return out;
}

CMatrix selector(Eigen::Index M, const RowIndices& idx) {
  CMatrix E = CMatrix::Zero(M, static_cast<Eigen::Index>(idx.size()));
  std::vector<bool> seen(static_cast<std::size_t>(M), false);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto i = idx[j];
    if (i < 0 || i >= M) throw Error("selector: index " + std::to_string(i) + " out of range");
    if (seen[static_cast<std::size_t>(i)]) throw Error("selector: duplicate index " + std::to_string(i));
    seen[static_cast<std::size_t>(i)] = true;
    E(i, static_cast<Eigen::Index>(j)) = 1.0;
  }
  return E;
}

CMatrix sqrt_factor(const CMatrix& B, Eigen::Index d) {
  if (B.size() == 0) return CMatrix::Identity(d, d);
  if (B.rows() != d || B.cols() != d) throw ShapeMismatch("sqrt_factor: B has wrong dimension");
  return cholesky(B);
}

namespace {

void require_square_same(const CMatrix& W, const CMatrix& V, const char* what) {
  if (W.rows() != W.cols() || V.rows() != W.rows() || V.cols() != W.cols()) {
    throw ShapeMismatch(std::string(what) + ": W and V must be M x M");
  }
}

// X Q^{-1} with Q the Cholesky factor of X^H V X.
CMatrix normalize_block(const CMatrix& X, const CMatrix& V) {
  const CMatrix Q = cholesky(X.adjoint() * V * X);
  return right_solve_upper(X, Q);
}

}  // namespace

CMatrix update_single_subspace(const CMatrix& W, const RowIndices& rows, const CMatrix& V, const CMatrix& B) {
  require_square_same(W, V, "update_single_subspace");
  const auto M = W.rows();
  const CMatrix E = selector(M, rows);
  const CMatrix X = solve(W * V, E);
  return normalize_block(X, V) * sqrt_factor(B, static_cast<Eigen::Index>(rows.size()));
}

SubspacePair update_two_subspace_global(const CMatrix& V1, const CMatrix& V2, Eigen::Index d1, Eigen::Index d2,
                                        const CMatrix& B1, const CMatrix& B2) {
  const auto M = V1.rows();
  if (d1 <= 0 || d2 <= 0 || d1 + d2 != M || V2.rows() != M) {
    throw ShapeMismatch("update_two_subspace_global: need d1 + d2 = M");
  }
  const CMatrix Q = cholesky(V2);
  const CMatrix left = Q.adjoint().triangularView<Eigen::Lower>().solve(V1);
  const HermEig eig = herm_eig(right_solve_upper(left, Q));

  // smallest d1 eigenpairs, taken from the bottom up
  CMatrix U1(M, d1);
  for (Eigen::Index j = 0; j < d1; ++j) {
    const Eigen::Index i = M - 1 - j;
    const double lam = eig.values(i);
    if (!(lam > 0.0)) throw NotPositiveDefinite("update_two_subspace_global: non-positive eigenvalue");
    U1.col(j) = eig.vectors.col(i) / std::sqrt(lam);
  }
  const CMatrix U2 = eig.vectors.leftCols(d2);

  SubspacePair out;
  out.first = Q.triangularView<Eigen::Upper>().solve(U1) * sqrt_factor(B1, d1);
  out.second = Q.triangularView<Eigen::Upper>().solve(U2) * sqrt_factor(B2, d2);
  return out;
}

SubspacePair update_pair_subspaces(const CMatrix& W, const RowIndices& rows1, const RowIndices& rows2,
                                   const CMatrix& V1, const CMatrix& V2, const CMatrix& B1, const CMatrix& B2) {
  require_square_same(W, V1, "update_pair_subspaces");
  require_square_same(W, V2, "update_pair_subspaces");
  const auto M = W.rows();
  RowIndices both = rows1;
  both.insert(both.end(), rows2.begin(), rows2.end());
  const CMatrix E = selector(M, both);
  const auto d1 = static_cast<Eigen::Index>(rows1.size());
  const auto d2 = static_cast<Eigen::Index>(rows2.size());

  const CMatrix P1 = solve(W * V1, E);
  const CMatrix P2 = solve(W * V2, E);
  const CMatrix Vt1 = hermitian_part(P1.adjoint() * V1 * P1);
  const CMatrix Vt2 = hermitian_part(P2.adjoint() * V2 * P2);

  const CMatrix Q = cholesky(Vt2);
  const CMatrix left = Q.adjoint().triangularView<Eigen::Lower>().solve(Vt1);
  const HermEig eig = herm_eig(right_solve_upper(left, Q));

  CMatrix H1(d1 + d2, d1);
  for (Eigen::Index j = 0; j < d1; ++j) {
    const double lam = eig.values(j);
    if (!(lam > 0.0)) throw NotPositiveDefinite("update_pair_subspaces: non-positive eigenvalue");
    H1.col(j) = eig.vectors.col(j) / std::sqrt(lam);
  }
  const CMatrix H2 = eig.vectors.middleCols(d1, d2);

  SubspacePair out;
  out.first = P1 * Q.triangularView<Eigen::Upper>().solve(H1) * sqrt_factor(B1, d1);
  out.second = P2 * Q.triangularView<Eigen::Upper>().solve(H2) * sqrt_factor(B2, d2);
  return out;
}

CMatrix background_parametric(const CMatrix& target_rows, const CMatrix& C) {
  const auto K = target_rows.rows();
  const auto M = target_rows.cols();
  if (K <= 0 || K >= M || C.rows() != M || C.cols() != M) {
    throw ShapeMismatch("background_parametric: need K < M target rows and M x M covariance");
  }
  const CMatrix A = C * target_rows.adjoint();  // M x K
  // J A_top = A_bottom  <=>  A_top^H J^H = A_bottom^H
  const CMatrix Jh = solve(A.topRows(K).adjoint(), A.bottomRows(M - K).adjoint());
  return Jh.adjoint();
}

void apply_background_parametric(CMatrix& W, Eigen::Index K, const CMatrix& C) {
  const auto M = W.rows();
  const CMatrix J = background_parametric(W.topRows(K), C);
  W.bottomRows(M - K).leftCols(K) = J;
  W.bottomRows(M - K).rightCols(M - K) = -CMatrix::Identity(M - K, M - K);
}

CMatrix background_nonparametric(const CMatrix& W, Eigen::Index K, const CMatrix& C) {
  require_square_same(W, C, "background_nonparametric");
  const auto M = W.rows();
  if (K <= 0 || K >= M) throw ShapeMismatch("background_nonparametric: need 0 < K < M");
  RowIndices bg;
  for (Eigen::Index i = K; i < M; ++i) bg.push_back(i);
  CMatrix U = solve(W * C, selector(M, bg));
  for (Eigen::Index j = 0; j < U.cols(); ++j) {
    const double q = (U.col(j).adjoint() * C * U.col(j))(0, 0).real();
    if (!(q > 0.0)) throw NotPositiveDefinite("background_nonparametric: zero-power background column");
    U.col(j) /= std::sqrt(q);
  }
  return U;
}

SourceAndBackground joint_dx_bg(const CMatrix& W, Eigen::Index k, Eigen::Index K, const CMatrix& V,
                                const CMatrix& C) {
  require_square_same(W, V, "joint_dx_bg");
  require_square_same(W, C, "joint_dx_bg");
  const auto M = W.rows();
  if (K <= 0 || K >= M || k < 0 || k >= K) throw ShapeMismatch("joint_dx_bg: need 0 <= k < K < M");
  RowIndices cols{k};
  for (Eigen::Index i = K; i < M; ++i) cols.push_back(i);
  const CMatrix E = selector(M, cols);

  const CMatrix P = solve(W * V, E);
  const CMatrix R = solve(W * C, E);
  const CMatrix Vt = hermitian_part(P.adjoint() * V * P);
  const CMatrix Ct = hermitian_part(R.adjoint() * C * R);
  const HermEig eig = gen_herm_eig(Vt, Ct);

  SourceAndBackground out;
  const CVector h1 = eig.vectors.col(0);
  const double q1 = (h1.adjoint() * Vt * h1)(0, 0).real();
  if (!(q1 > 0.0)) throw NotPositiveDefinite("joint_dx_bg: degenerate source direction");
  out.w = P * h1 / std::sqrt(q1);
  out.U.resize(M, M - K);
  for (Eigen::Index q = 0; q < M - K; ++q) {
    const CVector h = eig.vectors.col(q + 1);
    const double s = (h.adjoint() * Ct * h)(0, 0).real();
    out.U.col(q) = R * h / std::sqrt(s);
  }
  return out;
}

}  // namespace jisa
