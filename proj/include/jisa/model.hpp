#pragma once

// Statistical model of the separation problem: subspace layout, source
// contrast, demixing matrices, covariance statistics and cost functions.

#include <cstddef>
#include <vector>

#include "jisa/linalg.hpp"
#include "jisa/stft.hpp"

namespace jisa {

class SingularDemixing : public Error {
 public:
  using Error::Error;
};

/// Ordered subspace sizes d_1..d_L; subspace l owns the contiguous rows
/// [offset(l), offset(l) + size(l)) of every demixing matrix.
class SubspacePartition {
 public:
  SubspacePartition() = default;
  explicit SubspacePartition(std::vector<std::size_t> sizes);

  /// M subspaces of dimension one (determined IVA).
  static SubspacePartition singletons(std::size_t M);
  /// K single-source subspaces followed by one background subspace of size M - K.
  static SubspacePartition extraction(std::size_t K, std::size_t M);

  std::size_t n_subspaces() const { return sizes_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t size(std::size_t l) const { return sizes_.at(l); }
  std::size_t offset(std::size_t l) const { return offsets_.at(l); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::vector<Eigen::Index> indices(std::size_t l) const;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t dim_ = 0;
};

enum class ContrastKind { Laplace, LogCosh };

/// Spherical super-Gaussian contrast G(r) and its weight phi(r) = G'(r) / (2r).
struct Contrast {
  ContrastKind kind = ContrastKind::Laplace;
  double slope = 1.0;  // LogCosh only, in [1, 2]

  static Contrast laplace() { return {}; }
  static Contrast log_cosh(double a);

  double G(double r) const;
  double dG(double r) const;
  double phi(double r) const;
};

/// Lower bound applied to auxiliary radii.
inline constexpr double kRadiusFloor = 1e-12;

/// Per-frequency square demixing matrices W_f. Rows of subspace l are the
/// conjugate-transposed columns of the sub-demixing matrix Wbar_lf.
/// When `gaussian_background` is set the last subspace follows a
/// time-invariant Gaussian model instead of the super-Gaussian contrast.
struct DemixingStack {
  SubspacePartition partition;
  bool gaussian_background = false;
  std::vector<CMatrix> W;

  static DemixingStack identity(std::size_t n_freq, SubspacePartition part, bool gaussian_background = false);

  std::size_t n_freq() const { return W.size(); }
  std::size_t dim() const { return partition.dim(); }
  std::size_t n_super_gaussian() const {
    return partition.n_subspaces() - (gaussian_background ? 1 : 0);
  }

  /// Wbar_lf (M x d_l).
  CMatrix sub(std::size_t l, std::size_t f) const;
  void set_sub(std::size_t l, std::size_t f, const CMatrix& wbar);

  /// Throws SingularDemixing when |det W_f| falls below 1e-300.
  void check_nonsingular() const;
};

/// Per-subspace, per-frequency Hermitian matrices, indexed [l][f].
/// An empty outer vector (or an empty entry for some l) stands for identity.
using BlockCov = std::vector<std::vector<CMatrix>>;

/// y_fn = W_f x_fn for all rows.
SpectralTensor demix(const DemixingStack& W, const SpectralTensor& X);

/// Auxiliary radii r_ln = sqrt(sum_f y_lfn^H B_lf^{-1} y_lfn) floored at
/// kRadiusFloor, as an L x N matrix. Y holds the separated channels.
Eigen::MatrixXd aux_radius(const SpectralTensor& Y, const SubspacePartition& part, const BlockCov& B = {});

/// Radii of a single-row subspace computed straight from the mixture:
/// r_n = sqrt(sum_f |w_f^H x_fn|^2).
RVector row_radius(const DemixingStack& W, const SpectralTensor& X, std::size_t row);

/// V_f = (1/N) sum_n w_n x_fn x_fn^H for every f.
std::vector<CMatrix> weighted_cov(const SpectralTensor& X, const RVector& weights);
std::vector<CMatrix> sample_cov(const SpectralTensor& X);

/// Negative log-likelihood with constant terms dropped:
///   sum_{l,n} G(r_ln)  [super-Gaussian subspaces]
/// + sum_{f,n} y^H B^{-1} y + N log det B_f  [Gaussian background, if any]
/// - 2N sum_f log|det W_f|.
double nll_cost(const DemixingStack& W, const SpectralTensor& X, const Contrast& G, const BlockCov& B = {});

/// Quadratic surrogate N sum_{l,f} tr(Wbar^H V Wbar B^{-1}) - 2N sum_f log|det W_f|,
/// plus N sum_f log det B_f for the Gaussian background subspace.
/// V[l][f] must be provided for every subspace (the background uses C_f).
double surrogate_cost(const DemixingStack& W, const BlockCov& V, std::size_t n_frames, const BlockCov& B = {});

/// Constant that makes the surrogate tangent to nll_cost at radii r0:
/// sum over super-Gaussian subspaces and frames of G(r0) - phi(r0) r0^2.
double majorization_constant(const Eigen::MatrixXd& radii, const Contrast& G, std::size_t n_super_gaussian);

/// max_f of the largest entry of |W_f [V_1 Wbar_1 ... V_L Wbar_L] - blockdiag(B)|.
/// If `blocks` is non-empty only those column blocks are checked.
double head_residual(const DemixingStack& W, const BlockCov& V, const BlockCov& B = {},
                     const std::vector<std::size_t>& blocks = {});

}  // namespace jisa
