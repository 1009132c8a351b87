#include "jisa/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <tuple>

namespace jisa {

bool MixSpec::noiseless() const { return std::isinf(sinr_db) && sinr_db > 0.0; }

std::size_t MixSpec::interferer_rank() const { return K >= M ? 0 : std::min(Q, M - K); }

void MixSpec::validate() const {
  if (M == 0 || K == 0 || K > M) throw Error("mixture: need 0 < K <= M");
  if (F == 0 || N == 0) throw Error("mixture: need F > 0 and N > 0");
  if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0)) {
    throw InfeasibleSINR("mixture: noise fraction must lie in [0, 1]");
  }
  if (noiseless()) return;
  if (!std::isfinite(sinr_db)) throw InfeasibleSINR("mixture: SINR must be finite or +inf");
  if (noise_fraction == 0.0 && interferer_rank() == 0) {
    throw InfeasibleSINR("mixture: no interferer subspace and no uncorrelated noise to carry the background");
  }
}

namespace {

std::mt19937_64 make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6d6978u};
  return std::mt19937_64(seq);
}

Complex cnormal(std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  const double re = nd(rng);
  const double im = nd(rng);
  return {re, im};
}

CMatrix crandn(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  CMatrix A(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) A(i, j) = cnormal(rng);
  }
  return A;
}

// Floors the singular values at sigma_max / max_cond.
CMatrix cap_condition(const CMatrix& A, double max_cond) {
  Eigen::JacobiSVD<CMatrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  RVector s = svd.singularValues();
  const double floor = s(0) / max_cond;
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::max(s(i), floor);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().adjoint();
}

double mic1_power(const SpectralTensor& X) {
  double p = 0.0;
  for (std::size_t f = 0; f < X.n_freq(); ++f) {
    for (std::size_t n = 0; n < X.n_frames(); ++n) p += std::norm(X(f, n, 0));
  }
  return p / static_cast<double>(X.n_freq() * X.n_frames());
}

void scale(SpectralTensor& X, double g) {
  for (auto& v : X.data()) v *= g;
}

void add(SpectralTensor& X, const SpectralTensor& Y) {
  for (std::size_t i = 0; i < X.data().size(); ++i) X.data()[i] += Y.data()[i];
}

SpectralTensor spatialize(const std::vector<CMatrix>& H, const SpectralTensor& S) {
  SpectralTensor out(S.n_freq(), S.n_frames(), static_cast<std::size_t>(H.front().rows()));
  for (std::size_t f = 0; f < S.n_freq(); ++f) out.bin(f).noalias() = H[f] * S.bin(f);
  return out;
}

}  // namespace

SpectralTensor gen_sources(std::size_t count, std::size_t F, std::size_t N, std::mt19937_64& rng) {
  SpectralTensor S(F, N, count);
  // |Laplace(0, b)| is exponential with rate 1/b; b = 1/sqrt(2) gives E a^2 = 1
  std::exponential_distribution<double> radius(std::sqrt(2.0));
  std::vector<double> a(N);
  for (std::size_t k = 0; k < count; ++k) {
    double ms = 0.0;
    for (auto& v : a) {
      v = radius(rng);
      ms += v * v;
    }
    const double norm = std::sqrt(ms / static_cast<double>(N));
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t n = 0; n < N; ++n) S(f, n, k) = (a[n] / norm) * cnormal(rng);
    }
  }
  return S;
}

SpectralTensor gen_sources(const MixSpec& spec) {
  spec.validate();
  auto rng = make_rng(spec.seed);
  return gen_sources(spec.K, spec.F, spec.N, rng);
}

Mixture gen_mixture(const MixSpec& spec) {
  spec.validate();
  auto rng = make_rng(spec.seed);
  const auto M = static_cast<Eigen::Index>(spec.M);
  const auto K = static_cast<Eigen::Index>(spec.K);
  const std::size_t F = spec.F;
  const std::size_t N = spec.N;

  const SpectralTensor S = gen_sources(spec.K, F, N, rng);
  Mixture mix;
  mix.A.resize(F);
  for (std::size_t f = 0; f < F; ++f) mix.A[f] = cap_condition(crandn(M, K, rng), 100.0);

  // unit mean power of every target image at mic 1
  for (Eigen::Index k = 0; k < K; ++k) {
    double p = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      const double g = std::norm(mix.A[f](0, k));
      for (std::size_t n = 0; n < N; ++n) p += g * std::norm(S(f, n, static_cast<std::size_t>(k)));
    }
    p /= static_cast<double>(F * N);
    if (!(p > 0.0)) throw Error("mixture: target image has zero power");
    for (auto& A : mix.A) A.col(k) /= std::sqrt(p);
  }

  const std::size_t n_img = spec.K + (spec.noiseless() ? 0 : 1);
  mix.images = SpectralTensor(F, N, n_img);
  mix.X = spatialize(mix.A, S);
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t k = 0; k < spec.K; ++k) mix.images(f, n, k) = mix.A[f](0, static_cast<Eigen::Index>(k)) * S(f, n, k);
    }
  }
  if (spec.noiseless()) return mix;

  const double total = static_cast<double>(spec.K) / std::pow(10.0, spec.sinr_db / 10.0);
  const std::size_t rank = spec.interferer_rank();
  const bool interferers = rank > 0 && spec.noise_fraction < 1.0;
  const double noise_share = interferers ? spec.noise_fraction : 1.0;

  SpectralTensor background(F, N, spec.M);
  if (interferers) {
    const SpectralTensor Z = gen_sources(spec.Q, F, N, rng);
    std::vector<CMatrix> H(F);
    for (std::size_t f = 0; f < F; ++f) {
      const CMatrix Psi = crandn(M, static_cast<Eigen::Index>(rank), rng);
      const CMatrix Gamma = crandn(static_cast<Eigen::Index>(rank), static_cast<Eigen::Index>(spec.Q), rng);
      H[f] = Psi * Gamma;
    }
    background = spatialize(H, Z);
    scale(background, std::sqrt((1.0 - noise_share) * total / mic1_power(background)));
  }
  if (noise_share > 0.0) {
    SpectralTensor noise(F, N, spec.M);
    for (auto& v : noise.data()) v = cnormal(rng);
    scale(noise, std::sqrt(noise_share * total / mic1_power(noise)));
    add(background, noise);
  }
  // absorb the empirical cross term so the SINR is met exactly
  scale(background, std::sqrt(total / mic1_power(background)));

  add(mix.X, background);
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t n = 0; n < N; ++n) mix.images(f, n, spec.K) = background(f, n, 0);
  }
  return mix;
}

double mic1_sinr_db(const Mixture& mix) {
  const std::size_t n_img = mix.images.n_chan();
  const std::size_t K = mix.A.empty() ? n_img : static_cast<std::size_t>(mix.A.front().cols());
  double target = 0.0;
  double background = 0.0;
  for (std::size_t f = 0; f < mix.images.n_freq(); ++f) {
    for (std::size_t n = 0; n < mix.images.n_frames(); ++n) {
      for (std::size_t c = 0; c < n_img; ++c) (c < K ? target : background) += std::norm(mix.images(f, n, c));
    }
  }
  if (!(background > 0.0)) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(target / background);
}

std::vector<Signal<Complex>> flatten_channels(const SpectralTensor& X) {
  std::vector<Signal<Complex>> out;
  out.reserve(X.n_chan());
  for (std::size_t m = 0; m < X.n_chan(); ++m) out.push_back(X.channel(m));
  return out;
}

namespace {

constexpr char kTensorMagic[4] = {'J', 'T', 'E', 'N'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error("tensor file: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_tensor(const std::string& path, const SpectralTensor& X) {
  static_assert(sizeof(Complex) == 16);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  os.write(kTensorMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(X.n_freq()));
  put_u32(os, static_cast<std::uint32_t>(X.n_frames()));
  put_u32(os, static_cast<std::uint32_t>(X.n_chan()));
  os.write(reinterpret_cast<const char*>(X.data().data()), static_cast<std::streamsize>(X.data().size() * 16));
  if (!os) throw Error("failed writing " + path);
}

SpectralTensor read_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kTensorMagic, 4) != 0) throw Error(path + ": not a tensor file");
  const auto F = get_u32(is);
  const auto N = get_u32(is);
  const auto M = get_u32(is);
  SpectralTensor X(F, N, M);
  if (!is.read(reinterpret_cast<char*>(X.data().data()), static_cast<std::streamsize>(X.data().size() * 16))) {
    throw Error(path + ": truncated data");
  }
  return X;
}

namespace {

MixSpec parse_mix(const nlohmann::json& j) {
  MixSpec s;
  s.M = j.value("M", s.M);
  s.K = j.value("K", s.K);
  s.Q = j.value("Q", s.Q);
  s.F = j.value("F", s.F);
  s.N = j.value("N", s.N);
  if (j.contains("sinr_db")) {
    s.sinr_db = j.at("sinr_db").is_null() ? std::numeric_limits<double>::infinity() : j.at("sinr_db").get<double>();
  }
  s.noise_fraction = j.value("noise_fraction", s.noise_fraction);
  s.seed = j.value("seed", s.seed);
  return s;
}

SeparatorConfig parse_separator(const nlohmann::json& j) {
  SeparatorConfig c;
  if (j.is_string()) {
    c.algorithm = parse_algorithm(j.get<std::string>());
    return c;
  }
  c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  c.n_iter = j.value("n_iter", c.n_iter);
  c.tol = j.value("tol", c.tol);
  const auto contrast = j.value("contrast", std::string("laplace"));
  if (contrast == "laplace") {
    c.contrast = Contrast::laplace();
  } else if (contrast == "logcosh") {
    c.contrast = Contrast::log_cosh(j.value("slope", 1.0));
  } else {
    throw Error("unknown contrast '" + contrast + "'");
  }
  return c;
}

nlohmann::json spec_to_json(const MixSpec& s) {
  nlohmann::json j{{"M", s.M}, {"K", s.K}, {"Q", s.Q}, {"F", s.F}, {"N", s.N}, {"noise_fraction", s.noise_fraction},
                   {"seed", s.seed}};
  j["sinr_db"] = s.noiseless() ? nlohmann::json(nullptr) : nlohmann::json(s.sinr_db);
  return j;
}

nlohmann::json metrics_to_json(const MetricReport& m) {
  return {{"si_sdr", m.si_sdr}, {"si_sir", m.si_sir}, {"permutation", m.permutation}, {"success", m.success}};
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

ExperimentConfig parse_experiment(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.output_dir = j.value("output_dir", std::string());
  cfg.per_iteration_metrics = j.value("per_iteration_metrics", cfg.per_iteration_metrics);
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    if (s.is_array()) {
      cfg.seeds = s.get<std::vector<std::uint64_t>>();
    } else {
      const auto start = s.value("start", std::uint64_t{0});
      const auto count = s.at("count").get<std::uint64_t>();
      for (std::uint64_t i = 0; i < count; ++i) cfg.seeds.push_back(start + i);
    }
  }
  for (const auto& m : j.value("mixtures", nlohmann::json::array())) cfg.mixtures.push_back(parse_mix(m));
  for (const auto& a : j.value("algorithms", nlohmann::json::array())) cfg.separators.push_back(parse_separator(a));
  return cfg;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  return parse_experiment(j);
}

double RunResult::mean_wall_ms() const {
  std::vector<double> t;
  for (const auto& it : iterations) t.push_back(it.wall_ms);
  return mean(t);
}

RunResult run_single(const MixSpec& spec, const SeparatorConfig& cfg_in, bool per_iteration_metrics) {
  RunResult run;
  run.algorithm = to_string(cfg_in.algorithm);
  run.spec = spec;
  try {
    const Mixture mix = gen_mixture(spec);
    const auto refs = flatten_channels(mix.images);
    SeparatorConfig cfg = cfg_in;
    cfg.n_src = spec.K;
    cfg.seed = spec.seed;

    IterationObserver observer;
    if (per_iteration_metrics) {
      observer = [&](std::size_t it, const DemixingStack& W, const SpectralTensor& Xw, const Whitening& wh) {
        IterationRecord rec;
        rec.iteration = it;
        rec.metrics = evaluate(refs, spec.K, flatten_channels(select_outputs(W, Xw, wh, spec.K)));
        run.iterations.push_back(std::move(rec));
      };
    }
    const SeparationResult res = separate(mix.X, cfg, observer);
    run.cost = res.report.cost;
    run.final_metrics = evaluate(refs, spec.K, flatten_channels(res.Y));
    if (!per_iteration_metrics) {
      IterationRecord rec;
      rec.iteration = res.report.iterations;
      rec.metrics = run.final_metrics;
      run.iterations.push_back(std::move(rec));
    }
    for (auto& rec : run.iterations) {
      rec.cost = res.report.cost.at(rec.iteration);
      rec.wall_ms = rec.iteration > 0 ? res.report.wall_ms.at(rec.iteration - 1) : 0.0;
    }
    run.ok = true;
  } catch (const std::exception& e) {
    run.ok = false;
    run.error = e.what();
    run.iterations.clear();
  }
  return run;
}

nlohmann::json run_to_json(const RunResult& run) {
  nlohmann::json j;
  j["algorithm"] = run.algorithm;
  j["spec"] = spec_to_json(run.spec);
  j["ok"] = run.ok;
  if (!run.ok) {
    j["error"] = run.error;
    return j;
  }
  j["cost"] = run.cost;
  auto iters = nlohmann::json::array();
  for (const auto& it : run.iterations) {
    auto r = metrics_to_json(it.metrics);
    r["iteration"] = it.iteration;
    r["cost"] = it.cost;
    iters.push_back(std::move(r));
  }
  j["iterations"] = std::move(iters);
  j["final"] = metrics_to_json(run.final_metrics);
  return j;
}

void write_runs_csv(std::ostream& os, const std::vector<RunResult>& runs) {
  os << "algorithm,K,M,SINR,seed,iteration,source,cost,si_sdr,si_sir,wall_ms\n";
  for (const auto& run : runs) {
    if (!run.ok) continue;
    for (const auto& it : run.iterations) {
      for (std::size_t k = 0; k < it.metrics.si_sdr.size(); ++k) {
        os << run.algorithm << ',' << run.spec.K << ',' << run.spec.M << ',' << num(run.spec.sinr_db) << ','
           << run.spec.seed << ',' << it.iteration << ',' << k << ',' << num(it.cost) << ','
           << num(it.metrics.si_sdr[k]) << ',' << num(it.metrics.si_sir[k]) << ',' << num(it.wall_ms) << '\n';
      }
    }
  }
}

void write_summary_csv(std::ostream& os, const std::vector<RunResult>& runs) {
  os << "algorithm,K,M,Q,SINR,runs,failed,success_rate,median_si_sdr,median_si_sir,median_wall_ms\n";
  // noise fraction and sizes are not columns but still split groups
  using Key = std::tuple<std::string, std::size_t, std::size_t, std::size_t, double, double, std::size_t, std::size_t>;
  std::vector<Key> order;
  std::map<Key, std::vector<const RunResult*>> groups;
  for (const auto& run : runs) {
    Key key{run.algorithm, run.spec.K, run.spec.M, run.spec.Q, run.spec.sinr_db, run.spec.noise_fraction, run.spec.F,
            run.spec.N};
    auto [pos, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    pos->second.push_back(&run);
  }
  for (const auto& key : order) {
    const auto& group = groups.at(key);
    std::size_t failed = 0;
    std::size_t hits = 0;
    std::vector<double> sdr;
    std::vector<double> sir;
    std::vector<double> wall;
    for (const auto* run : group) {
      if (!run->ok) {
        ++failed;
        continue;
      }
      if (run->final_metrics.all_success()) ++hits;
      sdr.push_back(mean(run->final_metrics.si_sdr));
      sir.push_back(mean(run->final_metrics.si_sir));
      wall.push_back(run->mean_wall_ms());
    }
    const auto& [algo, K, M, Q, sinr, frac, F, N] = key;
    os << algo << ',' << K << ',' << M << ',' << Q << ',' << num(sinr) << ',' << group.size() << ',' << failed << ','
       << num(static_cast<double>(hits) / static_cast<double>(group.size())) << ',' << num(median(sdr)) << ','
       << num(median(sir)) << ',' << num(median(wall)) << '\n';
  }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result;
  for (const auto& base : cfg.mixtures) {
    for (const auto& sep : cfg.separators) {
      std::vector<std::uint64_t> seeds = cfg.seeds;
      if (seeds.empty()) seeds.push_back(base.seed);
      for (const auto seed : seeds) {
        MixSpec spec = base;
        spec.seed = seed;
        result.runs.push_back(run_single(spec, sep, cfg.per_iteration_metrics));
      }
    }
  }
  if (cfg.output_dir.empty()) return result;

  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir / "runs");
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%05zu.json", i);
    std::ofstream os(dir / "runs" / name);
    os << run_to_json(result.runs[i]).dump(2) << '\n';
  }
  std::ofstream runs_csv(dir / "runs.csv");
  write_runs_csv(runs_csv, result.runs);
  std::ofstream summary_csv(dir / "summary.csv");
  write_summary_csv(summary_csv, result.runs);
  if (!runs_csv || !summary_csv) throw Error("failed writing results to " + cfg.output_dir);
  return result;
}

}  // namespace jisa
