#include "jisa/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <type_traits>

namespace jisa {

namespace {

template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
Eigen::Map<const Vec<T>> view(const Signal<T>& s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}

double ratio_db(double num, double den) {
  if (!(den > 0.0)) return num > 0.0 ? kMetricCapDb : -kMetricCapDb;
  if (!(num > 0.0)) return -kMetricCapDb;
  return std::clamp(10.0 * std::log10(num / den), -kMetricCapDb, kMetricCapDb);
}

template <typename T>
void check_pair(const Signal<T>& reference, const Signal<T>& estimate) {
  if (reference.size() != estimate.size()) throw ShapeMismatch("metric: reference and estimate lengths differ");
}

}  // namespace

template <typename T>
double si_sdr(const Signal<T>& reference, const Signal<T>& estimate) {
  check_pair(reference, estimate);
  const auto s = view(reference);
  const auto e = view(estimate);
  const double ss = s.squaredNorm();
  if (!(ss > 0.0)) throw ZeroReference("si_sdr: reference has zero energy");
  const T alpha = s.dot(e) / ss;  // conjugates s
  const Vec<T> target = alpha * s;
  return ratio_db(target.squaredNorm(), (target - e).squaredNorm());
}

template <typename T>
double si_sir(const std::vector<Signal<T>>& references, std::size_t target, const Signal<T>& estimate) {
  if (target >= references.size()) throw Error("si_sir: target index out of range");
  const auto P = static_cast<Eigen::Index>(references.size());
  const auto L = static_cast<Eigen::Index>(estimate.size());
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> R(L, P);
  for (Eigen::Index j = 0; j < P; ++j) {
    check_pair(references[static_cast<std::size_t>(j)], estimate);
    R.col(j) = view(references[static_cast<std::size_t>(j)]);
  }
  const auto e = view(estimate);
  const auto s = R.col(static_cast<Eigen::Index>(target));
  const double ss = s.squaredNorm();
  if (!(ss > 0.0)) throw ZeroReference("si_sir: target reference has zero energy");

  const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> gram = R.adjoint() * R;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>> eig(gram);
  const auto& lam = eig.eigenvalues();
  if (eig.info() != Eigen::Success || !(lam.minCoeff() > 1e-12 * lam.maxCoeff())) {
    throw DegenerateSpan("si_sir: references are linearly dependent");
  }
  const Vec<T> coef = gram.ldlt().solve(R.adjoint() * e);
  const T alpha = s.dot(e) / ss;
  const Vec<T> signal = alpha * s;
  const Vec<T> interference = R * coef - signal;
  return ratio_db(signal.squaredNorm(), interference.squaredNorm());
}

template <typename T>
std::vector<std::size_t> resolve_permutation(const std::vector<Signal<T>>& references, std::size_t n_targets,
                                             const std::vector<Signal<T>>& estimates) {
  const std::size_t K = n_targets;
  if (K > references.size() || estimates.size() != K) {
    throw ShapeMismatch("resolve_permutation: need one estimate per target");
  }
  if (K > 8) throw Error("resolve_permutation: exhaustive search limited to 8 sources");
  // score[k][j]: SI-SIR of estimate j against target k
  std::vector<std::vector<double>> score(K, std::vector<double>(K));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < K; ++j) score[k][j] = si_sir(references, k, estimates[j]);
  }
  std::vector<std::size_t> perm(K);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> best = perm;
  double best_total = -std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) total += score[k][perm[k]];
    if (total > best_total) {
      best_total = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

bool MetricReport::all_success() const {
  return !success.empty() && std::all_of(success.begin(), success.end(), [](bool b) { return b; });
}

double MetricReport::min_si_sir() const {
  return si_sir.empty() ? -kMetricCapDb : *std::min_element(si_sir.begin(), si_sir.end());
}

template <typename T>
MetricReport evaluate(const std::vector<Signal<T>>& references, std::size_t n_targets,
                      const std::vector<Signal<T>>& estimates) {
  MetricReport out;
  out.permutation = resolve_permutation(references, n_targets, estimates);
  for (std::size_t k = 0; k < n_targets; ++k) {
    const auto& est = estimates[out.permutation[k]];
    out.si_sdr.push_back(si_sdr(references[k], est));
    out.si_sir.push_back(si_sir(references, k, est));
    out.success.push_back(out.si_sir.back() > 0.0);
  }
  return out;
}

double success_rate(const std::vector<MetricReport>& reports) {
  if (reports.empty()) return 0.0;
  const auto hits = std::count_if(reports.begin(), reports.end(), [](const MetricReport& r) { return r.all_success(); });
  return static_cast<double>(hits) / static_cast<double>(reports.size());
}

#define JISA_INSTANTIATE(T)                                                                                    \
  template double si_sdr<T>(const Signal<T>&, const Signal<T>&);                                              \
  template double si_sir<T>(const std::vector<Signal<T>>&, std::size_t, const Signal<T>&);                    \
  template std::vector<std::size_t> resolve_permutation<T>(const std::vector<Signal<T>>&, std::size_t,        \
                                                           const std::vector<Signal<T>>&);                    \
  template MetricReport evaluate<T>(const std::vector<Signal<T>>&, std::size_t, const std::vector<Signal<T>>&);

JISA_INSTANTIATE(double)
JISA_INSTANTIATE(Complex)

#undef JISA_INSTANTIATE

}  // namespace jisa
