#pragma once

// Scale-invariant separation metrics. Signals are flat sample vectors, real
// (time-domain waveforms) or complex (flattened spectra).

#include <cstddef>
#include <vector>

#include "jisa/linalg.hpp"

namespace jisa {

class ZeroReference : public Error {
 public:
  using Error::Error;
};

class DegenerateSpan : public Error {
 public:
  using Error::Error;
};

/// Ratios that would be infinite are clamped to +/- this value.
inline constexpr double kMetricCapDb = 300.0;

template <typename T>
using Signal = std::vector<T>;

/// 10 log10(|a s|^2 / |a s - e|^2) with a = <e, s> / |s|^2.
template <typename T>
double si_sdr(const Signal<T>& reference, const Signal<T>& estimate);

/// SI-SIR of `estimate` against references[target]. The signal part is the
/// scaled target a s (as in si_sdr); the interference is the projection of the
/// estimate onto the span of all references minus that signal part.
template <typename T>
double si_sir(const std::vector<Signal<T>>& references, std::size_t target, const Signal<T>& estimate);

/// perm[k] is the estimate assigned to target k. Exhaustive search over all
/// assignments maximizing the total SI-SIR; ties go to the lexicographically
/// first permutation. `references` holds the targets followed by any extra
/// interference references (e.g. background), which never get an estimate.
template <typename T>
std::vector<std::size_t> resolve_permutation(const std::vector<Signal<T>>& references, std::size_t n_targets,
                                             const std::vector<Signal<T>>& estimates);

struct MetricReport {
  std::vector<double> si_sdr;  // per target
  std::vector<double> si_sir;
  std::vector<std::size_t> permutation;
  std::vector<bool> success;  // si_sir > 0 dB

  bool all_success() const;
  double min_si_sir() const;
};

/// Resolves the permutation, then scores each target against its estimate.
template <typename T>
MetricReport evaluate(const std::vector<Signal<T>>& references, std::size_t n_targets,
                      const std::vector<Signal<T>>& estimates);

/// Fraction of reports with every source successful; 0 for an empty list.
double success_rate(const std::vector<MetricReport>& reports);

}  // namespace jisa
