#include <catch_amalgamated.hpp>

#include "jisa/linalg.hpp"
#include "test_util.hpp"

using namespace jisa;
using testutil::rel_err;

TEST_CASE("cholesky of identity and diagonal matrices") {
  CHECK(cholesky(CMatrix::Identity(3, 3)).isApprox(CMatrix::Identity(3, 3), 1e-15));

  CMatrix D = CMatrix::Zero(2, 2);
  D(0, 0) = 4.0;
  D(1, 1) = 9.0;
  CMatrix expected = CMatrix::Zero(2, 2);
  expected(0, 0) = 2.0;
  expected(1, 1) = 3.0;
  CHECK(cholesky(D).isApprox(expected, 1e-15));
}

TEST_CASE("cholesky multiplies back for random PD matrices") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index M = 1 + trial % 8;
    const CMatrix H = testutil::random_pd(M, rng);
    const CMatrix Q = cholesky(H);
    INFO("M = " << M);
    CHECK(rel_err(Q.adjoint() * Q, H) < 1e-10);
    // upper triangular with a positive real diagonal
    CHECK(Q.triangularView<Eigen::StrictlyLower>().toDenseMatrix().norm() == 0.0);
    for (Eigen::Index i = 0; i < M; ++i) {
      CHECK(Q(i, i).real() > 0.0);
      CHECK(Q(i, i).imag() == 0.0);
    }
  }
}

TEST_CASE("cholesky ridge is relative to the mean diagonal") {
  std::mt19937_64 rng(12);
  const CMatrix H = testutil::random_pd(4, rng);
  const double ridge = 1e-3;
  const CMatrix Q = cholesky(H, ridge);
  const CMatrix target = H + CMatrix::Identity(4, 4) * (ridge * H.trace().real() / 4.0);
  CHECK(rel_err(Q.adjoint() * Q, target) < 1e-12);
}

TEST_CASE("cholesky rejects indefinite and singular input") {
  CMatrix H = CMatrix::Identity(2, 2);
  H(1, 1) = -1.0;
  CHECK_THROWS_AS(cholesky(H), NotPositiveDefinite);
  CHECK_THROWS_AS(cholesky(CMatrix::Zero(3, 3)), NotPositiveDefinite);
  // a rank-one matrix becomes PD once ridged
  CVector v(2);
  v << 1.0, Complex(0.0, 1.0);
  CHECK_THROWS_AS(cholesky(v * v.adjoint()), NotPositiveDefinite);
  CHECK_NOTHROW(cholesky(v * v.adjoint(), 1e-6));
}

TEST_CASE("herm_eig of diagonal and identity matrices") {
  CMatrix D = CMatrix::Zero(3, 3);
  D(0, 0) = 1.0;
  D(1, 1) = 3.0;
  D(2, 2) = 2.0;
  const HermEig e = herm_eig(D);
  CHECK(e.values(0) == Catch::Approx(3.0));
  CHECK(e.values(1) == Catch::Approx(2.0));
  CHECK(e.values(2) == Catch::Approx(1.0));
  CHECK(std::abs(e.vectors(1, 0)) == Catch::Approx(1.0));
  CHECK(std::abs(e.vectors(2, 1)) == Catch::Approx(1.0));
  CHECK(std::abs(e.vectors(0, 2)) == Catch::Approx(1.0));

  const HermEig id = herm_eig(CMatrix::Identity(2, 2));
  CHECK(id.values(0) == Catch::Approx(1.0));
  CHECK(id.values(1) == Catch::Approx(1.0));
  CHECK((id.vectors.adjoint() * id.vectors).isApprox(CMatrix::Identity(2, 2), 1e-12));
}

TEST_CASE("herm_eig reconstructs random Hermitian matrices") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index M = 1 + trial % 8;
    const CMatrix H = testutil::random_hermitian(M, rng);
    const HermEig e = herm_eig(H);
    const CMatrix& U = e.vectors;
    CHECK((U * e.values.cast<Complex>().asDiagonal() * U.adjoint() - H).norm() < 1e-9 * H.norm());
    CHECK((U.adjoint() * U - CMatrix::Identity(M, M)).norm() < 1e-10);
    for (Eigen::Index i = 0; i + 1 < M; ++i) CHECK(e.values(i) >= e.values(i + 1));
    CHECK(std::abs(e.values.sum() - H.trace().real()) < 1e-9 * (1.0 + H.norm()));
  }
}

TEST_CASE("gen_herm_eig diagonal ratios and identity") {
  CMatrix A = CMatrix::Zero(2, 2);
  A(0, 0) = 2.0;
  A(1, 1) = 8.0;
  CMatrix B = CMatrix::Zero(2, 2);
  B(0, 0) = 1.0;
  B(1, 1) = 2.0;
  const HermEig e = gen_herm_eig(A, B);
  CHECK(e.values(0) == Catch::Approx(4.0));
  CHECK(e.values(1) == Catch::Approx(2.0));

  const HermEig id = gen_herm_eig(CMatrix::Identity(3, 3), CMatrix::Identity(3, 3));
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(id.values(i) == Catch::Approx(1.0));
}

TEST_CASE("gen_herm_eig residual, B-orthonormality and reciprocity") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index M = 2 + trial % 6;
    const CMatrix A = testutil::random_pd(M, rng);
    const CMatrix B = testutil::random_pd(M, rng);
    const HermEig e = gen_herm_eig(A, B);
    for (Eigen::Index i = 0; i < M; ++i) {
      const CVector v = e.vectors.col(i);
      CHECK((A * v - e.values(i) * B * v).norm() < 1e-9 * A.norm() * v.norm());
    }
    CHECK((e.vectors.adjoint() * B * e.vectors - CMatrix::Identity(M, M)).norm() < 1e-9);

    const HermEig r = gen_herm_eig(B, A);
    for (Eigen::Index i = 0; i < M; ++i) {
      CHECK(std::abs(e.values(i) * r.values(M - 1 - i) - 1.0) < 1e-8);
    }
  }
}

TEST_CASE("solve") {
  std::mt19937_64 rng(15);
  const CMatrix B = testutil::random_matrix(3, 2, rng);
  CHECK(solve(CMatrix::Identity(3, 3), B).isApprox(B, 1e-15));

  CMatrix D = CMatrix::Zero(2, 2);
  D(0, 0) = 2.0;
  D(1, 1) = 4.0;
  const CMatrix X = solve(D, CMatrix::Identity(2, 2));
  CHECK(X(0, 0) == Complex(0.5));
  CHECK(X(1, 1) == Complex(0.25));
  CHECK(std::abs(X(0, 1)) == 0.0);

  for (int trial = 0; trial < 20; ++trial) {
    const CMatrix A = testutil::random_matrix(6, 6, rng);
    const CMatrix R = testutil::random_matrix(6, 3, rng);
    CHECK(rel_err(A * solve(A, R), R) < 1e-9);
  }

  CMatrix S = CMatrix::Ones(3, 3);
  CHECK_THROWS_AS(solve(S, CMatrix::Identity(3, 3)), Singular);
}

TEST_CASE("right_solve_upper, log_abs_det and hermitian_part") {
  std::mt19937_64 rng(16);
  const CMatrix Q = cholesky(testutil::random_pd(4, rng));
  const CMatrix M = testutil::random_matrix(3, 4, rng);
  CHECK(rel_err(right_solve_upper(M, Q) * Q, M) < 1e-12);

  const CMatrix A = testutil::random_matrix(5, 5, rng);
  CHECK(log_abs_det(A) == Catch::Approx(std::log(std::abs(A.determinant()))).epsilon(1e-10));
  CHECK(std::isinf(log_abs_det(CMatrix::Zero(2, 2))));

  const CMatrix H = hermitian_part(A);
  CHECK((H - H.adjoint()).norm() == 0.0);
  CHECK(all_finite(H));
  CMatrix bad = H;
  bad(0, 1) = Complex(std::nan(""), 0.0);
  CHECK_FALSE(all_finite(bad));
}
