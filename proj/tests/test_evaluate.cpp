#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "jisa/evaluate.hpp"

using namespace jisa;

namespace {

Signal<double> randn(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Signal<double> s(n);
  for (auto& v : s) v = nd(rng);
  return s;
}

Signal<double> combo(const std::vector<std::pair<double, const Signal<double>*>>& terms) {
  Signal<double> out(terms.front().second->size(), 0.0);
  for (const auto& [a, s] : terms) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * (*s)[i];
  }
  return out;
}

double dot(const Signal<double>& a, const Signal<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// b minus its projection on a
Signal<double> orthogonalize(const Signal<double>& b, const Signal<double>& a) {
  return combo({{1.0, &b}, {-dot(a, b) / dot(a, a), &a}});
}

// SI-SIR through a QR least-squares projection
double si_sir_qr(const std::vector<Signal<double>>& refs, std::size_t k, const Signal<double>& est) {
  const auto L = static_cast<Eigen::Index>(est.size());
  Eigen::MatrixXd R(L, static_cast<Eigen::Index>(refs.size()));
  for (std::size_t j = 0; j < refs.size(); ++j) R.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(refs[j].data(), L);
  const Eigen::Map<const Eigen::VectorXd> e(est.data(), L);
  const Eigen::VectorXd proj = R * R.householderQr().solve(e);
  const Eigen::VectorXd s = R.col(static_cast<Eigen::Index>(k));
  const Eigen::VectorXd target = s * (s.dot(e) / s.squaredNorm());
  return 10.0 * std::log10(target.squaredNorm() / (proj - target).squaredNorm());
}

}  // namespace

TEST_CASE("SI-SDR of perfect and rescaled estimates is capped") {
  std::mt19937_64 rng(1);
  const auto s = randn(1000, rng);
  CHECK(si_sdr(s, s) == kMetricCapDb);
  CHECK(si_sdr(s, combo({{2.0, &s}})) == kMetricCapDb);
}

TEST_CASE("SI-SDR with an orthogonal error of equal power is 0 dB") {
  std::mt19937_64 rng(2);
  const auto s = randn(4000, rng);
  auto n = orthogonalize(randn(4000, rng), s);
  n = combo({{std::sqrt(dot(s, s) / dot(n, n)), &n}});
  CHECK(si_sdr(s, combo({{1.0, &s}, {1.0, &n}})) == Catch::Approx(0.0).margin(1e-10));
  // a 10x weaker error gives 20 dB
  CHECK(si_sdr(s, combo({{1.0, &s}, {0.1, &n}})) == Catch::Approx(20.0).margin(1e-9));
}

TEST_CASE("SI-SDR is invariant to positive scaling and sign flips") {
  std::mt19937_64 rng(3);
  const auto s = randn(500, rng);
  const auto noise = randn(500, rng);
  const auto e = combo({{1.0, &s}, {0.3, &noise}});
  const double base = si_sdr(s, e);
  CHECK(si_sdr(s, combo({{7.5, &e}})) == Catch::Approx(base).epsilon(1e-12));
  CHECK(si_sdr(s, combo({{-1.0, &e}})) == Catch::Approx(base).epsilon(1e-12));
  CHECK(si_sdr(s, combo({{-0.01, &e}})) == Catch::Approx(base).epsilon(1e-12));
}

TEST_CASE("complex SI-SDR absorbs a complex gain") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  Signal<Complex> s(300);
  Signal<Complex> n(300);
  for (std::size_t i = 0; i < 300; ++i) {
    s[i] = {nd(rng), nd(rng)};
    n[i] = {nd(rng), nd(rng)};
  }
  Signal<Complex> e(300);
  Signal<Complex> g(300);
  const Complex gain(0.3, -1.2);
  for (std::size_t i = 0; i < 300; ++i) {
    e[i] = s[i] + 0.2 * n[i];
    g[i] = gain * e[i];
  }
  CHECK(si_sdr(s, g) == Catch::Approx(si_sdr(s, e)).epsilon(1e-12));
  CHECK(si_sdr(s, s) == kMetricCapDb);
}

TEST_CASE("SI-SDR errors") {
  CHECK_THROWS_AS(si_sdr(Signal<double>(10, 0.0), Signal<double>(10, 1.0)), ZeroReference);
  CHECK_THROWS_AS(si_sdr(Signal<double>(10, 1.0), Signal<double>(9, 1.0)), ShapeMismatch);
}

TEST_CASE("SI-SIR basic cases") {
  std::mt19937_64 rng(5);
  const auto s = randn(2000, rng);
  const auto i = orthogonalize(randn(2000, rng), s);
  const std::vector<Signal<double>> refs{s, i};
  CHECK(si_sir(refs, 0, s) == kMetricCapDb);
  CHECK(si_sir(refs, 0, i) < -100.0);
  const auto scaled_i = combo({{std::sqrt(dot(s, s) / dot(i, i)), &i}});
  CHECK(si_sir(refs, 0, combo({{1.0, &s}, {1.0, &scaled_i}})) == Catch::Approx(0.0).margin(0.01));
}

TEST_CASE("SI-SIR matches a QR projection and ignores components outside the span") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Signal<double>> refs{randn(800, rng), randn(800, rng), randn(800, rng)};
    const auto extra = randn(800, rng);
    const auto est = combo({{1.0, &refs[0]}, {0.4, &refs[1]}, {-0.2, &refs[2]}, {0.5, &extra}});
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(si_sir(refs, k, est) == Catch::Approx(si_sir_qr(refs, k, est)).epsilon(1e-9));
    }
  }
}

TEST_CASE("SI-SIR rejects dependent references") {
  std::mt19937_64 rng(7);
  const auto s = randn(100, rng);
  const std::vector<Signal<double>> refs{s, combo({{2.0, &s}})};
  CHECK_THROWS_AS(si_sir(refs, 0, s), DegenerateSpan);
  CHECK_THROWS_AS(si_sir(refs, 2, s), Error);
}

TEST_CASE("permutation resolution") {
  std::mt19937_64 rng(8);
  std::vector<Signal<double>> refs{randn(500, rng), randn(500, rng), randn(500, rng)};
  CHECK(resolve_permutation(refs, 3, refs) == std::vector<std::size_t>{0, 1, 2});
  std::vector<Signal<double>> reversed(refs.rbegin(), refs.rend());
  CHECK(resolve_permutation(refs, 3, reversed) == std::vector<std::size_t>{2, 1, 0});

  // random mixtures against a brute-force search
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Signal<double>> est;
    for (int j = 0; j < 3; ++j) est.push_back(combo({{u(rng), &refs[0]}, {u(rng), &refs[1]}, {u(rng), &refs[2]}}));
    std::vector<std::size_t> p{0, 1, 2};
    std::vector<std::size_t> best;
    double best_total = -1e300;
    do {
      double total = 0.0;
      for (std::size_t k = 0; k < 3; ++k) total += si_sir_qr(refs, k, est[p[k]]);
      if (total > best_total + 1e-9) {
        best_total = total;
        best = p;
      }
    } while (std::next_permutation(p.begin(), p.end()));
    CHECK(resolve_permutation(refs, 3, est) == best);
  }
}

TEST_CASE("permutation ties go to the first permutation") {
  std::mt19937_64 rng(9);
  const auto a = randn(200, rng);
  const auto b = randn(200, rng);
  const std::vector<Signal<double>> refs{a, b};
  const auto mix = combo({{1.0, &a}, {1.0, &b}});
  CHECK(resolve_permutation(refs, 2, std::vector<Signal<double>>{mix, mix}) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("evaluate with an extra interference reference") {
  std::mt19937_64 rng(10);
  const auto t0 = randn(1000, rng);
  const auto t1 = randn(1000, rng);
  const auto bg = randn(1000, rng);
  const std::vector<Signal<double>> refs{t0, t1, bg};
  const std::vector<Signal<double>> est{combo({{1.0, &t1}, {0.05, &bg}}), combo({{1.0, &bg}, {0.1, &t0}})};
  const MetricReport m = evaluate(refs, 2, est);
  CHECK(m.permutation == std::vector<std::size_t>{1, 0});
  CHECK(m.success[1]);
  CHECK_FALSE(m.success[0]);
  CHECK_FALSE(m.all_success());
  CHECK(m.min_si_sir() == m.si_sir[0]);
  CHECK(m.si_sir[1] == Catch::Approx(26.0).margin(0.5));

  MetricReport ok;
  ok.success = {true, true};
  MetricReport bad;
  bad.success = {true, false};
  CHECK(success_rate({ok, bad, ok, ok}) == 0.75);
  CHECK(success_rate({}) == 0.0);
}
