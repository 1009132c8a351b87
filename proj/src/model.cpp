#include "jisa/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace jisa {

SubspacePartition::SubspacePartition(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw Error("partition: needs at least one subspace");
  offsets_.reserve(sizes_.size());
  for (auto d : sizes_) {
    if (d == 0) throw Error("partition: subspace sizes must be positive");
    offsets_.push_back(dim_);
    dim_ += d;
  }
}

SubspacePartition SubspacePartition::singletons(std::size_t M) {
  return SubspacePartition(std::vector<std::size_t>(M, 1));
}

SubspacePartition SubspacePartition::extraction(std::size_t K, std::size_t M) {
  if (K == 0 || K > M) throw Error("partition: need 0 < K <= M");
  std::vector<std::size_t> sizes(K, 1);
  if (M > K) sizes.push_back(M - K);
  return SubspacePartition(std::move(sizes));
}

std::vector<Eigen::Index> SubspacePartition::indices(std::size_t l) const {
  std::vector<Eigen::Index> idx(size(l));
  std::iota(idx.begin(), idx.end(), static_cast<Eigen::Index>(offset(l)));
  return idx;
}

Contrast Contrast::log_cosh(double a) {
  if (!(a >= 1.0 && a <= 2.0)) throw Error("contrast: log-cosh slope must lie in [1, 2]");
  return {ContrastKind::LogCosh, a};
}

double Contrast::G(double r) const {
  switch (kind) {
    case ContrastKind::Laplace:
      return r;
    case ContrastKind::LogCosh: {
      const double x = std::abs(slope * r);
      if (x > 20.0) return (x + std::log1p(std::exp(-2.0 * x)) - std::log(2.0)) / slope;
      // cosh(x) - 1 = 2 sinh(x/2)^2 keeps precision near zero
      const double s = std::sinh(0.5 * x);
      return std::log1p(2.0 * s * s) / slope;
    }
  }
  return r;
}

double Contrast::dG(double r) const {
  switch (kind) {
    case ContrastKind::Laplace:
      return 1.0;
    case ContrastKind::LogCosh:
      return std::tanh(slope * r);
  }
  return 1.0;
}

double Contrast::phi(double r) const {
  r = std::max(r, kRadiusFloor);
  switch (kind) {
    case ContrastKind::Laplace:
      return 0.5 / r;
    case ContrastKind::LogCosh: {
      const double x = slope * r;
      // tanh(x)/(2r) -> slope/2 as r -> 0
      if (x < 1e-8) return 0.5 * slope;
      return std::tanh(x) / (2.0 * r);
    }
  }
  return 0.5 / r;
}

DemixingStack DemixingStack::identity(std::size_t n_freq, SubspacePartition part, bool gaussian_background) {
  DemixingStack s;
  const auto M = static_cast<Eigen::Index>(part.dim());
  s.partition = std::move(part);
  s.gaussian_background = gaussian_background;
  s.W.assign(n_freq, CMatrix::Identity(M, M));
  return s;
}

CMatrix DemixingStack::sub(std::size_t l, std::size_t f) const {
  return W.at(f)
      .middleRows(static_cast<Eigen::Index>(partition.offset(l)), static_cast<Eigen::Index>(partition.size(l)))
      .adjoint();
}

void DemixingStack::set_sub(std::size_t l, std::size_t f, const CMatrix& wbar) {
  if (wbar.rows() != static_cast<Eigen::Index>(dim()) ||
      wbar.cols() != static_cast<Eigen::Index>(partition.size(l))) {
    throw ShapeMismatch("demixing: sub-demixing matrix has wrong shape");
  }
  W.at(f).middleRows(static_cast<Eigen::Index>(partition.offset(l)), wbar.cols()) = wbar.adjoint();
}

void DemixingStack::check_nonsingular() const {
  for (std::size_t f = 0; f < W.size(); ++f) {
    if (!(log_abs_det(W[f]) > std::log(1e-300))) {
      throw SingularDemixing("demixing matrix is singular at bin " + std::to_string(f));
    }
  }
}

SpectralTensor demix(const DemixingStack& W, const SpectralTensor& X) {
  if (W.n_freq() != X.n_freq() || W.dim() != X.n_chan()) throw ShapeMismatch("demix: shape mismatch");
  SpectralTensor Y(X.n_freq(), X.n_frames(), W.dim());
  for (std::size_t f = 0; f < X.n_freq(); ++f) Y.bin(f).noalias() = W.W[f] * X.bin(f);
  return Y;
}

namespace {

bool has_block(const BlockCov& B, std::size_t l) { return l < B.size() && !B[l].empty(); }

// Columns B^{-1} Y for Hermitian PD B.
CMatrix apply_inverse(const CMatrix& B, const CMatrix& Y) {
  const CMatrix Q = cholesky(B);
  const CMatrix t = Q.adjoint().triangularView<Eigen::Lower>().solve(Y);
  return Q.triangularView<Eigen::Upper>().solve(t);
}

double log_det_pd(const CMatrix& B) {
  const CMatrix Q = cholesky(B);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < Q.rows(); ++i) acc += 2.0 * std::log(Q(i, i).real());
  return acc;
}

// sum_n y_n^H B^{-1} y_n per frame, for the rows of one subspace at bin f.
RVector quad_per_frame(const SpectralTensor& Y, std::size_t f, std::size_t offset, std::size_t d,
                       const CMatrix* B) {
  const auto block = Y.bin(f).middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(d));
  if (B == nullptr) return block.colwise().squaredNorm().transpose();
  const CMatrix rhs = apply_inverse(*B, block);
  return block.cwiseProduct(rhs.conjugate()).colwise().sum().real().transpose();
}

}  // namespace

Eigen::MatrixXd aux_radius(const SpectralTensor& Y, const SubspacePartition& part, const BlockCov& B) {
  if (Y.n_chan() != part.dim()) throw ShapeMismatch("aux_radius: channel count differs from partition");
  const auto N = static_cast<Eigen::Index>(Y.n_frames());
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(part.n_subspaces()), N);
  for (std::size_t l = 0; l < part.n_subspaces(); ++l) {
    for (std::size_t f = 0; f < Y.n_freq(); ++f) {
      const CMatrix* b = has_block(B, l) ? &B[l][f] : nullptr;
      r.row(static_cast<Eigen::Index>(l)) += quad_per_frame(Y, f, part.offset(l), part.size(l), b).transpose();
    }
  }
  return r.cwiseSqrt().cwiseMax(kRadiusFloor);
}

RVector row_radius(const DemixingStack& W, const SpectralTensor& X, std::size_t row) {
  RVector acc = RVector::Zero(static_cast<Eigen::Index>(X.n_frames()));
  const auto k = static_cast<Eigen::Index>(row);
  for (std::size_t f = 0; f < X.n_freq(); ++f) {
    acc += (W.W[f].row(k) * X.bin(f)).cwiseAbs2().transpose();
  }
  return acc.cwiseSqrt().cwiseMax(kRadiusFloor);
}

std::vector<CMatrix> weighted_cov(const SpectralTensor& X, const RVector& weights) {
  if (weights.size() != static_cast<Eigen::Index>(X.n_frames())) {
    throw ShapeMismatch("weighted_cov: one weight per frame required");
  }
  const double inv_n = 1.0 / static_cast<double>(X.n_frames());
  std::vector<CMatrix> V(X.n_freq());
  for (std::size_t f = 0; f < X.n_freq(); ++f) {
    const auto xf = X.bin(f);
    CMatrix V_f = (xf * weights.asDiagonal()) * xf.adjoint();
    V_f *= inv_n;
    V[f] = hermitian_part(V_f);
  }
  return V;
}

std::vector<CMatrix> sample_cov(const SpectralTensor& X) {
  const double inv_n = 1.0 / static_cast<double>(X.n_frames());
  std::vector<CMatrix> C(X.n_freq());
  for (std::size_t f = 0; f < X.n_freq(); ++f) {
    const auto xf = X.bin(f);
    CMatrix C_f = xf * xf.adjoint();
    C_f *= inv_n;
    C[f] = hermitian_part(C_f);
  }
  return C;
}

namespace {

double log_det_term(const DemixingStack& W) {
  double acc = 0.0;
  for (std::size_t f = 0; f < W.n_freq(); ++f) {
    const double ld = log_abs_det(W.W[f]);
    if (!(ld > std::log(1e-300))) {
      throw SingularDemixing("cost: demixing matrix is singular at bin " + std::to_string(f));
    }
    acc += ld;
  }
  return acc;
}

}  // namespace

double nll_cost(const DemixingStack& W, const SpectralTensor& X, const Contrast& G, const BlockCov& B) {
  const double N = static_cast<double>(X.n_frames());
  const double logdet = log_det_term(W);
  const SpectralTensor Y = demix(W, X);
  const auto& part = W.partition;
  double cost = 0.0;
  for (std::size_t l = 0; l < W.n_super_gaussian(); ++l) {
    RVector r2 = RVector::Zero(static_cast<Eigen::Index>(X.n_frames()));
    for (std::size_t f = 0; f < X.n_freq(); ++f) {
      const CMatrix* b = has_block(B, l) ? &B[l][f] : nullptr;
      r2 += quad_per_frame(Y, f, part.offset(l), part.size(l), b);
    }
    for (Eigen::Index n = 0; n < r2.size(); ++n) cost += G.G(std::max(std::sqrt(r2(n)), kRadiusFloor));
  }
  if (W.gaussian_background) {
    const std::size_t l = part.n_subspaces() - 1;
    for (std::size_t f = 0; f < X.n_freq(); ++f) {
      const CMatrix* b = has_block(B, l) ? &B[l][f] : nullptr;
      cost += quad_per_frame(Y, f, part.offset(l), part.size(l), b).sum();
      if (b != nullptr) cost += N * log_det_pd(*b);
    }
  }
  return cost - 2.0 * N * logdet;
}

double surrogate_cost(const DemixingStack& W, const BlockCov& V, std::size_t n_frames, const BlockCov& B) {
  const auto& part = W.partition;
  if (V.size() != part.n_subspaces()) throw ShapeMismatch("surrogate: one V per subspace required");
  const double N = static_cast<double>(n_frames);
  double acc = 0.0;
  for (std::size_t l = 0; l < part.n_subspaces(); ++l) {
    if (V[l].size() != W.n_freq()) throw ShapeMismatch("surrogate: V must cover every bin");
    const bool background = W.gaussian_background && l + 1 == part.n_subspaces();
    for (std::size_t f = 0; f < W.n_freq(); ++f) {
      const CMatrix wbar = W.sub(l, f);
      const CMatrix quad = wbar.adjoint() * V[l][f] * wbar;
      if (has_block(B, l)) {
        acc += N * apply_inverse(B[l][f], quad).trace().real();
        if (background) acc += N * log_det_pd(B[l][f]);
      } else {
        acc += N * quad.trace().real();
      }
    }
  }
  return acc - 2.0 * N * log_det_term(W);
}

double majorization_constant(const Eigen::MatrixXd& radii, const Contrast& G, std::size_t n_super_gaussian) {
  double acc = 0.0;
  for (std::size_t l = 0; l < n_super_gaussian; ++l) {
    for (Eigen::Index n = 0; n < radii.cols(); ++n) {
      const double r0 = std::max(radii(static_cast<Eigen::Index>(l), n), kRadiusFloor);
      acc += G.G(r0) - G.phi(r0) * r0 * r0;
    }
  }
  return acc;
}

double head_residual(const DemixingStack& W, const BlockCov& V, const BlockCov& B,
                     const std::vector<std::size_t>& blocks) {
  const auto& part = W.partition;
  std::vector<std::size_t> todo = blocks;
  if (todo.empty()) {
    todo.resize(part.n_subspaces());
    std::iota(todo.begin(), todo.end(), std::size_t{0});
  }
  double worst = 0.0;
  for (std::size_t f = 0; f < W.n_freq(); ++f) {
    for (auto l : todo) {
      const auto d = static_cast<Eigen::Index>(part.size(l));
      const auto off = static_cast<Eigen::Index>(part.offset(l));
      CMatrix col = W.W[f] * (V.at(l).at(f) * W.sub(l, f));
      if (has_block(B, l)) {
        col.middleRows(off, d) -= B[l][f];
      } else {
        col.middleRows(off, d) -= CMatrix::Identity(d, d);
      }
      worst = std::max(worst, col.cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace jisa
