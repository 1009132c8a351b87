#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "jisa/model.hpp"

namespace jisa {

enum class Algorithm {
  AuxIvaIp,
  AuxIvaIp2,
  OverIvaIp,
  OverIvaIp2,
  OverIvaIpNp,
  OverIvaIp2Np,
  OverIvaDxBg,
  Five,
};

/// Canonical label, e.g. "OverIVA-IP2-NP".
std::string to_string(Algorithm a);
/// Accepts the canonical labels (case-insensitive); throws Error otherwise.
Algorithm parse_algorithm(std::string_view label);
const std::vector<Algorithm>& all_algorithms();
bool is_overdetermined(Algorithm a);

struct SeparatorConfig {
  Algorithm algorithm = Algorithm::OverIvaIp;
  std::size_t n_src = 1;
  std::size_t n_iter = 100;
  Contrast contrast = Contrast::laplace();
  /// Stop once max_f ||W_f - W_f'||_F / ||W_f||_F drops below tol (0 = never).
  double tol = 0.0;
  /// Carried into reports; the drivers themselves are deterministic.
  std::uint64_t seed = 0;
  double ridge = kDefaultRidge;
  /// Record the stationarity residual after every iteration (costs K extra
  /// covariance evaluations per iteration).
  bool trace_head = false;
};

/// Per-frequency PCA transform T_f (M' x M) with T_f C_f T_f^H = I.
struct Whitening {
  std::vector<CMatrix> T;
};

struct WhitenResult {
  SpectralTensor X;
  Whitening transform;
};

/// Projects each bin onto its `keep` principal components (descending
/// eigenvalue order) scaled to unit variance.
WhitenResult pca_whiten(const SpectralTensor& X, std::size_t keep, double ridge = kDefaultRidge);

struct SeparationReport {
  std::string algorithm;
  /// cost[0] is the initial value, cost[i] the value after iteration i.
  std::vector<double> cost;
  std::vector<double> head_residual;
  /// Update time of each iteration, cost evaluation excluded.
  std::vector<double> wall_ms;
  std::size_t iterations = 0;
  DemixingStack stack;
  Whitening whitening;
  /// Demixing rows returned as output channels, in output order.
  std::vector<std::size_t> selected_rows;
};

struct SeparationResult {
  SpectralTensor Y;  // n_src channels, scaled to the first microphone
  SeparationReport report;
};

/// Called after every iteration with the iteration index (1-based), the
/// current stack, the whitened input and the whitening transform.
using IterationObserver =
    std::function<void(std::size_t, const DemixingStack&, const SpectralTensor&, const Whitening&)>;

/// Whitens X, runs the configured MM algorithm and returns the n_src
/// extracted channels after projection back. Determined AuxIVA variants
/// separate all M channels and keep the n_src strongest outputs.
SeparationResult separate(const SpectralTensor& X, const SeparatorConfig& cfg, const IterationObserver& observer = {});

/// Rescales channel j of Y (the output of demixing row rows[j]) by
/// pinv(T_f)[0, rows[j]], T_f = W_f * whitening_f, so that each output
/// approximates its image at the first microphone. Empty rows means 0..K-1.
SpectralTensor project_back(const SpectralTensor& Y, const DemixingStack& W, const Whitening& whitening,
                            const std::vector<std::size_t>& rows = {});

/// Demixes whitened data with the selected rows and projects back.
SpectralTensor extract_outputs(const SpectralTensor& Xw, const DemixingStack& W, const Whitening& whitening,
                               const std::vector<std::size_t>& rows);

/// The n_src outputs separate() would return for the current stack: rows
/// 0..n_src-1 for the extraction variants, the n_src strongest projected-back
/// outputs (reported in row order) for the determined ones. `rows` receives
/// the demixing rows used when non-null.
SpectralTensor select_outputs(const DemixingStack& W, const SpectralTensor& Xw, const Whitening& whitening,
                              std::size_t n_src, std::vector<std::size_t>* rows = nullptr);

/// Cost tracked by separate(): the JISA cost for determined variants, and the
/// OverIVA cost with the background covariance at its maximum-likelihood value
/// U^H C U for the extraction variants.
/// `C` may carry the precomputed sample covariances of Xw.
double tracked_cost(const DemixingStack& W, const SpectralTensor& Xw, const Contrast& G,
                    const std::vector<CMatrix>* C = nullptr);

}  // namespace jisa
