#pragma once

// Synthetic frequency-domain mixtures and the batch experiment runner.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "jisa/algorithms.hpp"
#include "jisa/evaluate.hpp"

namespace jisa {

class InfeasibleSINR : public Error {
 public:
  using Error::Error;
};

/// Instantaneous per-bin mixture x = A s + Psi Gamma z + b.
struct MixSpec {
  std::size_t M = 4;  // microphones
  std::size_t K = 2;  // targets
  std::size_t Q = 8;  // interferers
  std::size_t F = 64;
  std::size_t N = 256;
  /// K sigma_T^2 / (Q sigma_I^2 + sigma_w^2) at the first microphone.
  /// +inf gives a noiseless mixture.
  double sinr_db = 10.0;
  /// Share of the background power at mic 1 carried by uncorrelated noise.
  double noise_fraction = 0.01;
  std::uint64_t seed = 0;

  bool noiseless() const;
  /// Rank of the interferer steering, min(Q, M - K).
  std::size_t interferer_rank() const;
  /// Throws InfeasibleSINR or Error.
  void validate() const;
};

/// `count` super-Gaussian sources over F bins and N frames:
/// s_kfn = a_kn g_kfn with a_kn = |Laplace| (rescaled to mean square one per
/// source) and g_kfn ~ CN(0, 1). Channels of the result are sources.
SpectralTensor gen_sources(std::size_t count, std::size_t F, std::size_t N, std::mt19937_64& rng);
/// The K targets of spec, seeded by spec.seed.
SpectralTensor gen_sources(const MixSpec& spec);

struct Mixture {
  SpectralTensor X;
  /// Images at the first microphone: targets 0..K-1, then the background
  /// (omitted for noiseless mixtures).
  SpectralTensor images;
  std::vector<CMatrix> A;  // per-bin M x K target mixing
};

/// Every target image at mic 1 has unit mean power; the background is scaled
/// so that the SINR at mic 1 matches spec.sinr_db exactly.
Mixture gen_mixture(const MixSpec& spec);

/// Sum of target image powers over background power at mic 1, in dB.
double mic1_sinr_db(const Mixture& mix);

/// Each channel flattened in [f][n] order.
std::vector<Signal<Complex>> flatten_channels(const SpectralTensor& X);

/// Binary tensor file: "JTEN", u32 F, N, M, then complex<double> samples in
/// [f][n][m] order, little endian.
void write_tensor(const std::string& path, const SpectralTensor& X);
SpectralTensor read_tensor(const std::string& path);

struct ExperimentConfig {
  std::vector<MixSpec> mixtures;
  /// n_src of each entry is overridden by the mixture's K.
  std::vector<SeparatorConfig> separators;
  /// Overrides MixSpec::seed when non-empty.
  std::vector<std::uint64_t> seeds;
  /// Score every iteration, not just the final one.
  bool per_iteration_metrics = true;
  /// Files are only written when non-empty.
  std::string output_dir;
};

/// Schema:
/// { "output_dir": str,
///   "seeds": [int...] | {"start": int, "count": int},
///   "per_iteration_metrics": bool,
///   "mixtures": [{"M", "K", "Q", "F", "N", "sinr_db" (number or null for
///                 noiseless), "noise_fraction", "seed"}],
///   "algorithms": [{"algorithm": label, "n_iter", "tol", "contrast":
///                  "laplace" | "logcosh", "slope"} | label] }
ExperimentConfig parse_experiment(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::string& path);

struct IterationRecord {
  std::size_t iteration = 0;
  double cost = 0.0;
  double wall_ms = 0.0;
  MetricReport metrics;
};

struct RunResult {
  std::string algorithm;
  MixSpec spec;
  bool ok = false;
  std::string error;
  /// cost[0] is the initial cost.
  std::vector<double> cost;
  std::vector<IterationRecord> iterations;  // scored iterations
  MetricReport final_metrics;

  double mean_wall_ms() const;
};

/// Simulate, separate and score one configuration. Errors are captured in
/// the result instead of thrown.
RunResult run_single(const MixSpec& spec, const SeparatorConfig& cfg, bool per_iteration_metrics);

struct ExperimentResult {
  std::vector<RunResult> runs;
};

/// Runs every (mixture, algorithm, seed) combination. With an output_dir it
/// writes runs/<index>.json, runs.csv and summary.csv there.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Deterministic record (no timings) so that identical runs serialize
/// byte-identically.
nlohmann::json run_to_json(const RunResult& run);

/// Header: algorithm,K,M,SINR,seed,iteration,source,cost,si_sdr,si_sir,wall_ms
void write_runs_csv(std::ostream& os, const std::vector<RunResult>& runs);
/// Header: algorithm,K,M,Q,SINR,runs,failed,success_rate,median_si_sdr,
/// median_si_sir,median_wall_ms. One row per distinct mixture setting and
/// algorithm, in first-seen order. Failed runs count as unsuccessful.
void write_summary_csv(std::ostream& os, const std::vector<RunResult>& runs);

}  // namespace jisa
