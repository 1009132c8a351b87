#pragma once

// Closed-form minimizers of the quadratic surrogate for one frequency bin.
//
// Every routine works on a single M x M demixing matrix W whose rows are the
// stacked sub-demixing matrices (rows of subspace l are Wbar_l^H). Covariances
// are expected to be positive definite already; callers ridge them up front
// (see ridged()) so that the updates satisfy the stationarity conditions
// exactly for the matrices they were given.

#include <utility>
#include <vector>

#include "jisa/linalg.hpp"

namespace jisa {

using RowIndices = std::vector<Eigen::Index>;

/// H + ridge * tr(H)/dim * I, Hermitian-symmetrized.
CMatrix ridged(const CMatrix& H, double ridge = kDefaultRidge);

/// Column selector [e_i for i in idx] of size M x |idx|. Throws on duplicates
/// or out-of-range indices.
CMatrix selector(Eigen::Index M, const RowIndices& idx);

/// Upper-triangular square root of B (B = S^H S). An empty B means identity.
CMatrix sqrt_factor(const CMatrix& B, Eigen::Index d);

/// Minimizes the surrogate over the sub-demixing matrix owning `rows`, all other
/// rows fixed: X = (W V)^{-1} E, X^H V X = Q^H Q, Wbar = X Q^{-1} B^{1/2}.
/// With a single row this is the iterative projection rule.
CMatrix update_single_subspace(const CMatrix& W, const RowIndices& rows, const CMatrix& V,
                               const CMatrix& B = {});

struct SubspacePair {
  CMatrix first;   // M x d1
  CMatrix second;  // M x d2
};

/// Global minimizer of the two-subspace surrogate (d1 + d2 = M).
/// V2 = Q^H Q, eigenpairs (lambda, u) of Q^{-H} V1 Q^{-1} in descending order;
/// the d1 smallest go to the first block scaled by lambda^{-1/2}, the d2
/// largest to the second.
SubspacePair update_two_subspace_global(const CMatrix& V1, const CMatrix& V2, Eigen::Index d1, Eigen::Index d2,
                                        const CMatrix& B1 = {}, const CMatrix& B2 = {});

/// Joint minimizer over two sub-demixing matrices while the remaining rows
/// stay fixed. P_l = (W V_l)^{-1} [E_1 E_2], Vt_l = P_l^H V_l P_l,
/// Vt_2 = Q^H Q, eigen-decomposition of Q^{-H} Vt_1 Q^{-1}; the first block
/// takes the d1 largest eigenpairs.
SubspacePair update_pair_subspaces(const CMatrix& W, const RowIndices& rows1, const RowIndices& rows2,
                                   const CMatrix& V1, const CMatrix& V2, const CMatrix& B1 = {},
                                   const CMatrix& B2 = {});

/// J = (E2 C Wt^H)(E1 C Wt^H)^{-1} for target rows Wt (K x M). The background
/// rows [J, -I] are then uncorrelated with the targets under C.
CMatrix background_parametric(const CMatrix& target_rows, const CMatrix& C);

/// Writes the parametric background rows [J, -I] into W (rows K..M-1).
void apply_background_parametric(CMatrix& W, Eigen::Index K, const CMatrix& C);

/// U = (W C)^{-1} [e_K ... e_{M-1}] with each column scaled to u^H C u = 1.
CMatrix background_nonparametric(const CMatrix& W, Eigen::Index K, const CMatrix& C);

struct SourceAndBackground {
  CVector w;  // new demixing vector of source k (M)
  CMatrix U;  // new background sub-demixing matrix (M x (M-K))
};

/// Joint update of source k and the background (rows K..M-1):
/// P = (W V)^{-1}[e_k e_K..e_{M-1}], R = (W C)^{-1}[same], generalized
/// eigen-decomposition of (P^H V P, R^H C R); the top eigenvector gives w_k,
/// the remaining ones the background columns.
SourceAndBackground joint_dx_bg(const CMatrix& W, Eigen::Index k, Eigen::Index K, const CMatrix& V,
                                const CMatrix& C);

}  // namespace jisa
