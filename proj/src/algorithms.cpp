#include "jisa/algorithms.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <numeric>

#include "jisa/updates.hpp"

namespace jisa {

namespace {

struct Label {
  Algorithm algo;
  const char* name;
};

constexpr Label kLabels[] = {
    {Algorithm::AuxIvaIp, "AuxIVA-IP"},         {Algorithm::AuxIvaIp2, "AuxIVA-IP2"},
    {Algorithm::OverIvaIp, "OverIVA-IP"},       {Algorithm::OverIvaIp2, "OverIVA-IP2"},
    {Algorithm::OverIvaIpNp, "OverIVA-IP-NP"},  {Algorithm::OverIvaIp2Np, "OverIVA-IP2-NP"},
    {Algorithm::OverIvaDxBg, "OverIVA-DX/BG"},  {Algorithm::Five, "FIVE"},
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string to_string(Algorithm a) {
  for (const auto& l : kLabels) {
    if (l.algo == a) return l.name;
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view label) {
  const auto key = lower(label);
  for (const auto& l : kLabels) {
    if (lower(l.name) == key) return l.algo;
  }
  throw Error("unknown algorithm '" + std::string(label) + "'");
}

const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> algos = [] {
    std::vector<Algorithm> v;
    for (const auto& l : kLabels) v.push_back(l.algo);
    return v;
  }();
  return algos;
}

bool is_overdetermined(Algorithm a) { return a != Algorithm::AuxIvaIp && a != Algorithm::AuxIvaIp2; }

WhitenResult pca_whiten(const SpectralTensor& X, std::size_t keep, double ridge) {
  const std::size_t M = X.n_chan();
  if (keep == 0 || keep > M) throw Error("pca_whiten: keep must lie in [1, M]");
  const auto C = sample_cov(X);
  WhitenResult out{SpectralTensor(X.n_freq(), X.n_frames(), keep), {}};
  out.transform.T.resize(X.n_freq());
  const auto k = static_cast<Eigen::Index>(keep);
  for (std::size_t f = 0; f < X.n_freq(); ++f) {
    const HermEig eig = herm_eig(ridged(C[f], ridge));
    if (!(eig.values(k - 1) > 0.0)) {
      throw NotPositiveDefinite("pca_whiten: covariance is not positive definite at bin " + std::to_string(f));
    }
    const RVector scale = eig.values.head(k).cwiseSqrt().cwiseInverse();
    CMatrix T = scale.asDiagonal() * eig.vectors.leftCols(k).adjoint();
    out.X.bin(f).noalias() = T * X.bin(f);
    out.transform.T[f] = std::move(T);
  }
  return out;
}

SpectralTensor project_back(const SpectralTensor& Y, const DemixingStack& W, const Whitening& whitening,
                            const std::vector<std::size_t>& rows_in) {
  std::vector<std::size_t> rows = rows_in;
  if (rows.empty()) {
    rows.resize(Y.n_chan());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  if (rows.size() != Y.n_chan() || Y.n_freq() != W.n_freq()) throw ShapeMismatch("project_back: shape mismatch");
  SpectralTensor out = Y;
  for (std::size_t f = 0; f < Y.n_freq(); ++f) {
    const CMatrix T = whitening.T.empty() ? W.W[f] : CMatrix(W.W[f] * whitening.T[f]);
    CMatrix pinv;
    if (T.rows() == T.cols()) {
      pinv = solve(T, CMatrix::Identity(T.rows(), T.cols()));
    } else {
      pinv = T.adjoint() * solve(T * T.adjoint(), CMatrix::Identity(T.rows(), T.rows()));
    }
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const Complex scale = pinv(0, static_cast<Eigen::Index>(rows[j]));
      for (std::size_t n = 0; n < Y.n_frames(); ++n) out(f, n, j) *= scale;
    }
  }
  return out;
}

SpectralTensor extract_outputs(const SpectralTensor& Xw, const DemixingStack& W, const Whitening& whitening,
                               const std::vector<std::size_t>& rows) {
  SpectralTensor Y(Xw.n_freq(), Xw.n_frames(), rows.size());
  for (std::size_t f = 0; f < Xw.n_freq(); ++f) {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      Y.bin(f).row(static_cast<Eigen::Index>(j)).noalias() =
          W.W[f].row(static_cast<Eigen::Index>(rows[j])) * Xw.bin(f);
    }
  }
  return project_back(Y, W, whitening, rows);
}

SpectralTensor select_outputs(const DemixingStack& W, const SpectralTensor& Xw, const Whitening& whitening,
                              std::size_t n_src, std::vector<std::size_t>* rows_out) {
  const std::size_t M = W.dim();
  std::vector<std::size_t> rows(n_src);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (W.gaussian_background || n_src == M) {
    if (rows_out != nullptr) *rows_out = rows;
    return extract_outputs(Xw, W, whitening, rows);
  }
  std::vector<std::size_t> all(M);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const SpectralTensor full = extract_outputs(Xw, W, whitening, all);
  std::vector<double> power(M, 0.0);
  for (std::size_t f = 0; f < full.n_freq(); ++f) {
    for (std::size_t n = 0; n < full.n_frames(); ++n) {
      for (std::size_t m = 0; m < M; ++m) power[m] += std::norm(full(f, n, m));
    }
  }
  std::stable_sort(all.begin(), all.end(), [&](std::size_t a, std::size_t b) { return power[a] > power[b]; });
  rows.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_src));
  std::sort(rows.begin(), rows.end());
  SpectralTensor Y(full.n_freq(), full.n_frames(), n_src);
  for (std::size_t f = 0; f < full.n_freq(); ++f) {
    for (std::size_t n = 0; n < full.n_frames(); ++n) {
      for (std::size_t j = 0; j < n_src; ++j) Y(f, n, j) = full(f, n, rows[j]);
    }
  }
  if (rows_out != nullptr) *rows_out = rows;
  return Y;
}

double tracked_cost(const DemixingStack& W, const SpectralTensor& Xw, const Contrast& G,
                    const std::vector<CMatrix>* C) {
  if (!W.gaussian_background) return nll_cost(W, Xw, G);
  std::vector<CMatrix> local;
  if (C == nullptr) {
    local = sample_cov(Xw);
    C = &local;
  }
  const std::size_t bg = W.partition.n_subspaces() - 1;
  BlockCov B(W.partition.n_subspaces());
  B[bg].resize(W.n_freq());
  for (std::size_t f = 0; f < W.n_freq(); ++f) {
    const CMatrix U = W.sub(bg, f);
    B[bg][f] = hermitian_part(U.adjoint() * (*C)[f] * U);
  }
  return nll_cost(W, Xw, G, B);
}

namespace {

using Clock = std::chrono::steady_clock;

// Weighted covariance of source row k at the current radii, ridged.
std::vector<CMatrix> source_cov(const DemixingStack& W, const SpectralTensor& X, std::size_t k,
                                const SeparatorConfig& cfg) {
  const RVector r = row_radius(W, X, k);
  RVector weights(r.size());
  for (Eigen::Index n = 0; n < r.size(); ++n) weights(n) = cfg.contrast.phi(r(n));
  auto V = weighted_cov(X, weights);
  for (auto& v : V) v = ridged(v, cfg.ridge);
  return V;
}

// Rotates each updated row by a unit phase so it stays close to its previous
// value; eigenvector-based updates otherwise return an arbitrary phase.
void align_row(CMatrix& W, Eigen::Index row, const CMatrix& previous) {
  const Complex c = W.row(row).dot(previous.row(row));
  if (std::abs(c) > 0.0) W.row(row) *= c / std::abs(c);
}

void ip_update(DemixingStack& W, const SpectralTensor& X, std::size_t k, const SeparatorConfig& cfg) {
  const auto V = source_cov(W, X, k, cfg);
  const RowIndices rows{static_cast<Eigen::Index>(k)};
  for (std::size_t f = 0; f < W.n_freq(); ++f) {
    W.W[f].row(static_cast<Eigen::Index>(k)) = update_single_subspace(W.W[f], rows, V[f]).adjoint();
  }
}

void ip2_update(DemixingStack& W, const SpectralTensor& X, std::size_t p, std::size_t q,
                const SeparatorConfig& cfg) {
  // both radii come from the current estimate before either row moves
  const auto Vp = source_cov(W, X, p, cfg);
  const auto Vq = source_cov(W, X, q, cfg);
  const RowIndices rp{static_cast<Eigen::Index>(p)};
  const RowIndices rq{static_cast<Eigen::Index>(q)};
  for (std::size_t f = 0; f < W.n_freq(); ++f) {
    const auto pair = update_pair_subspaces(W.W[f], rp, rq, Vp[f], Vq[f]);
    const CMatrix previous = W.W[f];
    W.W[f].row(rp[0]) = pair.first.adjoint();
    W.W[f].row(rq[0]) = pair.second.adjoint();
    align_row(W.W[f], rp[0], previous);
    align_row(W.W[f], rq[0], previous);
  }
}

void refresh_background(DemixingStack& W, const std::vector<CMatrix>& C, std::size_t K, bool parametric) {
  const auto k = static_cast<Eigen::Index>(K);
  for (std::size_t f = 0; f < W.n_freq(); ++f) {
    if (parametric) {
      apply_background_parametric(W.W[f], k, C[f]);
    } else {
      const CMatrix U = background_nonparametric(W.W[f], k, C[f]);
      W.W[f].bottomRows(W.W[f].rows() - k) = U.adjoint();
    }
  }
}

void iterate(Algorithm algo, DemixingStack& W, const SpectralTensor& X, const std::vector<CMatrix>& C,
             std::size_t K, const SeparatorConfig& cfg) {
  const std::size_t M = W.dim();
  switch (algo) {
    case Algorithm::AuxIvaIp:
      for (std::size_t k = 0; k < M; ++k) ip_update(W, X, k, cfg);
      break;
    case Algorithm::AuxIvaIp2: {
      std::size_t k = 0;
      for (; k + 1 < M; k += 2) ip2_update(W, X, k, k + 1, cfg);
      if (k < M) ip_update(W, X, k, cfg);
      break;
    }
    case Algorithm::OverIvaIp:
    case Algorithm::OverIvaIpNp: {
      const bool parametric = algo == Algorithm::OverIvaIp;
      for (std::size_t k = 0; k < K; ++k) {
        refresh_background(W, C, K, parametric);
        ip_update(W, X, k, cfg);
      }
      break;
    }
    case Algorithm::OverIvaIp2:
    case Algorithm::OverIvaIp2Np: {
      const bool parametric = algo == Algorithm::OverIvaIp2;
      std::size_t k = 0;
      for (; k + 1 < K; k += 2) {
        refresh_background(W, C, K, parametric);
        ip2_update(W, X, k, k + 1, cfg);
      }
      if (k < K) {
        refresh_background(W, C, K, parametric);
        ip_update(W, X, k, cfg);
      }
      break;
    }
    case Algorithm::OverIvaDxBg: {
      const auto kk = static_cast<Eigen::Index>(K);
      for (std::size_t k = 0; k < K; ++k) {
        const auto V = source_cov(W, X, k, cfg);
        for (std::size_t f = 0; f < W.n_freq(); ++f) {
          const auto upd = joint_dx_bg(W.W[f], static_cast<Eigen::Index>(k), kk, V[f], C[f]);
          const CMatrix previous = W.W[f];
          W.W[f].row(static_cast<Eigen::Index>(k)) = upd.w.adjoint();
          W.W[f].bottomRows(static_cast<Eigen::Index>(M) - kk) = upd.U.adjoint();
          align_row(W.W[f], static_cast<Eigen::Index>(k), previous);
          for (auto i = kk; i < static_cast<Eigen::Index>(M); ++i) align_row(W.W[f], i, previous);
        }
      }
      break;
    }
    case Algorithm::Five: {
      const auto V = source_cov(W, X, 0, cfg);
      const auto m = static_cast<Eigen::Index>(M);
      for (std::size_t f = 0; f < W.n_freq(); ++f) {
        const auto upd = update_two_subspace_global(V[f], C[f], 1, m - 1);
        const CMatrix previous = W.W[f];
        W.W[f].topRows(1) = upd.first.adjoint();
        W.W[f].bottomRows(m - 1) = upd.second.adjoint();
        for (Eigen::Index i = 0; i < m; ++i) align_row(W.W[f], i, previous);
      }
      break;
    }
  }
}

double relative_change(const DemixingStack& before, const DemixingStack& after) {
  double worst = 0.0;
  for (std::size_t f = 0; f < after.n_freq(); ++f) {
    const double denom = after.W[f].norm();
    if (denom > 0.0) worst = std::max(worst, (after.W[f] - before.W[f]).norm() / denom);
  }
  return worst;
}

double head_now(const DemixingStack& W, const SpectralTensor& X, const std::vector<CMatrix>& C,
                const SeparatorConfig& cfg) {
  const auto& part = W.partition;
  BlockCov V(part.n_subspaces());
  BlockCov B(part.n_subspaces());
  for (std::size_t l = 0; l < W.n_super_gaussian(); ++l) V[l] = source_cov(W, X, part.offset(l), cfg);
  if (W.gaussian_background) {
    const std::size_t bg = part.n_subspaces() - 1;
    V[bg] = C;
    B[bg].resize(W.n_freq());
    for (std::size_t f = 0; f < W.n_freq(); ++f) {
      const CMatrix U = W.sub(bg, f);
      B[bg][f] = hermitian_part(U.adjoint() * C[f] * U);
    }
  }
  return head_residual(W, V, B);
}

}  // namespace

SeparationResult separate(const SpectralTensor& X, const SeparatorConfig& cfg, const IterationObserver& observer) {
  const std::size_t M = X.n_chan();
  const std::size_t K = cfg.n_src;
  if (K == 0 || K > M) throw Error("separate: need 0 < n_src <= number of channels");
  Algorithm algo = cfg.algorithm;
  const bool over = is_overdetermined(algo);
  if (over && K >= M) throw Error("separate: " + to_string(algo) + " needs fewer sources than channels");
  if (algo == Algorithm::Five && K != 1) throw Error("separate: FIVE extracts exactly one source");
  // pairwise source updates need two targets
  if (K == 1 && algo == Algorithm::OverIvaIp2) algo = Algorithm::OverIvaIp;
  if (K == 1 && algo == Algorithm::OverIvaIp2Np) algo = Algorithm::OverIvaIpNp;

  WhitenResult wh = pca_whiten(X, M, cfg.ridge);
  const SpectralTensor& Xw = wh.X;
  const auto C_raw = sample_cov(Xw);
  std::vector<CMatrix> C = C_raw;
  for (auto& c : C) c = ridged(c, cfg.ridge);

  const auto part = over ? SubspacePartition::extraction(K, M) : SubspacePartition::singletons(M);
  DemixingStack W = DemixingStack::identity(X.n_freq(), part, over);
  if (over) {
    const auto k = static_cast<Eigen::Index>(K);
    const auto m = static_cast<Eigen::Index>(M);
    for (auto& w : W.W) w.bottomRightCorner(m - k, m - k) *= -1.0;
  }

  SeparationReport report;
  report.algorithm = to_string(cfg.algorithm);
  report.cost.push_back(tracked_cost(W, Xw, cfg.contrast, &C_raw));
  if (cfg.trace_head) report.head_residual.push_back(head_now(W, Xw, C, cfg));

  for (std::size_t it = 1; it <= cfg.n_iter; ++it) {
    const DemixingStack before = cfg.tol > 0.0 ? W : DemixingStack{};
    const auto t0 = Clock::now();
    try {
      iterate(algo, W, Xw, C, K, cfg);
    } catch (const Error& e) {
      throw Error("separate: iteration " + std::to_string(it) + ": " + e.what());
    }
    const auto t1 = Clock::now();
    report.wall_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    report.cost.push_back(tracked_cost(W, Xw, cfg.contrast, &C_raw));
    if (cfg.trace_head) report.head_residual.push_back(head_now(W, Xw, C, cfg));
    report.iterations = it;
    if (observer) observer(it, W, Xw, wh.transform);
    if (cfg.tol > 0.0 && relative_change(before, W) < cfg.tol) break;
  }

  std::vector<std::size_t> rows;
  SpectralTensor Y = select_outputs(W, Xw, wh.transform, K, &rows);

  report.stack = std::move(W);
  report.whitening = std::move(wh.transform);
  report.selected_rows = rows;
  return {std::move(Y), std::move(report)};
}

}  // namespace jisa
