#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "jisa/harness.hpp"

using namespace jisa;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  for (std::string f; std::getline(is, f, ',');) out.push_back(f);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("jisa_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("sources have unit variance and heavy tails") {
  std::mt19937_64 rng(11);
  const SpectralTensor S = gen_sources(3, 4, 10000, rng);
  for (std::size_t k = 0; k < 3; ++k) {
    double m2 = 0.0;
    double m4 = 0.0;
    for (std::size_t f = 0; f < 4; ++f) {
      for (std::size_t n = 0; n < 10000; ++n) {
        const double p = std::norm(S(f, n, k));
        m2 += p;
        m4 += p * p;
      }
    }
    m2 /= 40000.0;
    m4 /= 40000.0;
    CHECK(m2 == Catch::Approx(1.0).margin(0.02));
    // circular Gaussian has E|s|^4 / (E|s|^2)^2 = 2
    CHECK(m4 / (m2 * m2) > 4.0);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  MixSpec spec;
  spec.F = 8;
  spec.N = 64;
  spec.seed = 42;
  const Mixture a = gen_mixture(spec);
  const Mixture b = gen_mixture(spec);
  CHECK(a.X.data() == b.X.data());
  CHECK(a.images.data() == b.images.data());
  spec.seed = 43;
  CHECK(gen_mixture(spec).X.data() != a.X.data());
}

TEST_CASE("noiseless mixtures are exactly A s") {
  MixSpec spec;
  spec.M = 3;
  spec.K = 2;
  spec.F = 6;
  spec.N = 50;
  spec.sinr_db = std::numeric_limits<double>::infinity();
  spec.seed = 5;
  const Mixture mix = gen_mixture(spec);
  const SpectralTensor S = gen_sources(spec);
  REQUIRE(mix.images.n_chan() == 2);
  CHECK(std::isinf(mic1_sinr_db(mix)));
  for (std::size_t f = 0; f < spec.F; ++f) {
    const CMatrix expected = mix.A[f] * S.bin(f);
    CHECK((mix.X.bin(f) - expected).norm() <= 1e-12 * expected.norm());
    // target images are unit power on average, and A stays well conditioned
    Eigen::JacobiSVD<CMatrix> svd(mix.A[f]);
    const auto s = svd.singularValues();
    CHECK(s(0) / s(s.size() - 1) <= 100.0 * (1.0 + 1e-9));
  }
  for (std::size_t k = 0; k < 2; ++k) {
    double p = 0.0;
    for (const auto& v : mix.images.channel(k)) p += std::norm(v);
    CHECK(p / static_cast<double>(spec.F * spec.N) == Catch::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("mic-1 SINR matches the request") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> mics(2, 6);
  std::uniform_int_distribution<std::size_t> q(0, 6);
  std::uniform_real_distribution<double> sinr(-10.0, 30.0);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    MixSpec spec;
    spec.M = mics(rng);
    spec.K = std::uniform_int_distribution<std::size_t>(1, spec.M)(rng);
    spec.Q = q(rng);
    spec.F = 4;
    spec.N = 40;
    spec.sinr_db = sinr(rng);
    spec.noise_fraction = trial % 4 == 0 ? 1.0 : frac(rng);
    spec.seed = static_cast<std::uint64_t>(trial);
    INFO("M=" << spec.M << " K=" << spec.K << " Q=" << spec.Q);
    const Mixture mix = gen_mixture(spec);
    CHECK(mic1_sinr_db(mix) == Catch::Approx(spec.sinr_db).margin(0.1));
    // mixture = targets + background at mic 1
    for (std::size_t f = 0; f < spec.F; ++f) {
      for (std::size_t n = 0; n < spec.N; ++n) {
        Complex sum = 0.0;
        for (std::size_t c = 0; c < mix.images.n_chan(); ++c) sum += mix.images(f, n, c);
        CHECK(std::abs(sum - mix.X(f, n, 0)) < 1e-12);
      }
    }
  }
}

TEST_CASE("interferers span min(Q, M - K) dimensions without noise") {
  MixSpec spec;
  spec.M = 6;
  spec.K = 2;
  spec.Q = 3;
  spec.F = 3;
  spec.N = 80;
  spec.noise_fraction = 0.0;
  spec.seed = 3;
  const Mixture mix = gen_mixture(spec);
  const SpectralTensor S = gen_sources(spec);
  for (std::size_t f = 0; f < spec.F; ++f) {
    const CMatrix bg = mix.X.bin(f) - mix.A[f] * S.bin(f);
    Eigen::JacobiSVD<CMatrix> svd(bg);
    const auto s = svd.singularValues();
    CHECK(s(2) > 1e-6 * s(0));
    CHECK(s(3) < 1e-10 * s(0));
  }
  CHECK(spec.interferer_rank() == 3);
  spec.Q = 8;
  CHECK(spec.interferer_rank() == 4);
}

TEST_CASE("infeasible mixtures are rejected") {
  MixSpec spec;
  spec.M = 2;
  spec.K = 2;
  spec.noise_fraction = 0.0;
  CHECK_THROWS_AS(gen_mixture(spec), InfeasibleSINR);
  spec.noise_fraction = 1.5;
  CHECK_THROWS_AS(gen_mixture(spec), InfeasibleSINR);
  spec.noise_fraction = 0.1;
  spec.sinr_db = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(gen_mixture(spec), InfeasibleSINR);
  spec.sinr_db = 0.0;
  spec.K = 3;
  CHECK_THROWS_AS(gen_mixture(spec), Error);
  // K = M: the whole background becomes uncorrelated noise
  spec.K = 2;
  CHECK(mic1_sinr_db(gen_mixture(spec)) == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("tensor files round trip") {
  MixSpec spec;
  spec.F = 5;
  spec.N = 7;
  const Mixture mix = gen_mixture(spec);
  const fs::path dir = scratch_dir("tensor");
  fs::create_directories(dir);
  write_tensor((dir / "x.jten").string(), mix.X);
  const SpectralTensor back = read_tensor((dir / "x.jten").string());
  CHECK(back.n_freq() == 5);
  CHECK(back.n_frames() == 7);
  CHECK(back.n_chan() == 4);
  CHECK(back.data() == mix.X.data());
  std::ofstream(dir / "bad.jten") << "nope";
  CHECK_THROWS_AS(read_tensor((dir / "bad.jten").string()), Error);
  fs::remove_all(dir);
}

TEST_CASE("experiment JSON parsing") {
  const auto j = nlohmann::json::parse(R"({
    "output_dir": "out",
    "seeds": {"start": 10, "count": 3},
    "per_iteration_metrics": false,
    "mixtures": [{"M": 3, "K": 1, "Q": 2, "sinr_db": null}, {"sinr_db": -5}],
    "algorithms": ["five", {"algorithm": "OverIVA-IP2", "n_iter": 7, "tol": 1e-6,
                            "contrast": "logcosh", "slope": 2.0}]
  })");
  const ExperimentConfig cfg = parse_experiment(j);
  CHECK(cfg.output_dir == "out");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{10, 11, 12});
  CHECK_FALSE(cfg.per_iteration_metrics);
  REQUIRE(cfg.mixtures.size() == 2);
  CHECK(cfg.mixtures[0].M == 3);
  CHECK(cfg.mixtures[0].noiseless());
  CHECK(cfg.mixtures[1].sinr_db == -5.0);
  CHECK(cfg.mixtures[1].M == MixSpec{}.M);
  REQUIRE(cfg.separators.size() == 2);
  CHECK(cfg.separators[0].algorithm == Algorithm::Five);
  CHECK(cfg.separators[1].algorithm == Algorithm::OverIvaIp2);
  CHECK(cfg.separators[1].n_iter == 7);
  CHECK(cfg.separators[1].tol == 1e-6);
  CHECK(cfg.separators[1].contrast.kind == ContrastKind::LogCosh);

  CHECK_THROWS_AS(parse_experiment(nlohmann::json::parse(R"({"algorithms": ["ICA"]})")), Error);
  CHECK_THROWS_AS(parse_experiment(nlohmann::json::parse(R"({"algorithms": [{"algorithm": "FIVE", "contrast": "cauchy"}]})")),
                  Error);
}

TEST_CASE("an empty experiment writes header-only tables") {
  const fs::path dir = scratch_dir("empty");
  ExperimentConfig cfg;
  cfg.output_dir = dir.string();
  const ExperimentResult res = run_experiment(cfg);
  CHECK(res.runs.empty());
  CHECK(lines(slurp(dir / "runs.csv")) ==
        std::vector<std::string>{"algorithm,K,M,SINR,seed,iteration,source,cost,si_sdr,si_sir,wall_ms"});
  CHECK(lines(slurp(dir / "summary.csv")) ==
        std::vector<std::string>{
            "algorithm,K,M,Q,SINR,runs,failed,success_rate,median_si_sdr,median_si_sir,median_wall_ms"});
  fs::remove_all(dir);
}

TEST_CASE("experiment runs are reproducible and tables agree") {
  ExperimentConfig cfg;
  MixSpec spec;
  spec.M = 3;
  spec.K = 1;
  spec.Q = 2;
  spec.F = 8;
  spec.N = 128;
  cfg.mixtures = {spec};
  SeparatorConfig a;
  a.algorithm = Algorithm::Five;
  a.n_iter = 5;
  SeparatorConfig b = a;
  b.algorithm = Algorithm::OverIvaIp;
  cfg.separators = {a, b};
  cfg.seeds = {1, 2, 3};

  const fs::path d1 = scratch_dir("rep1");
  const fs::path d2 = scratch_dir("rep2");
  cfg.output_dir = d1.string();
  const ExperimentResult r1 = run_experiment(cfg);
  cfg.output_dir = d2.string();
  run_experiment(cfg);
  REQUIRE(r1.runs.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%05zu.json", i);
    const std::string s1 = slurp(d1 / "runs" / name);
    CHECK(!s1.empty());
    CHECK(s1 == slurp(d2 / "runs" / name));
    CHECK(r1.runs[i].ok);
    CHECK(r1.runs[i].iterations.size() == 5);
    CHECK(r1.runs[i].cost.size() == 6);
  }

  // one row per run, iteration and source
  const auto run_rows = lines(slurp(d1 / "runs.csv"));
  CHECK(run_rows.size() == 1 + 6 * 5);

  // success rate recomputed from the final-iteration rows of runs.csv
  std::map<std::string, std::pair<int, int>> tally;
  for (std::size_t i = 1; i < run_rows.size(); ++i) {
    const auto f = fields(run_rows[i]);
    REQUIRE(f.size() == 11);
    if (f[5] != "5") continue;
    auto& t = tally[f[0]];
    t.first += std::stod(f[9]) > 0.0 ? 1 : 0;
    t.second += 1;
  }
  const auto summary = lines(slurp(d1 / "summary.csv"));
  REQUIRE(summary.size() == 3);
  for (std::size_t i = 1; i < summary.size(); ++i) {
    const auto f = fields(summary[i]);
    REQUIRE(f.size() == 11);
    const auto& t = tally.at(f[0]);
    CHECK(f[5] == "3");
    CHECK(f[6] == "0");
    CHECK(std::stod(f[7]) == Catch::Approx(static_cast<double>(t.first) / t.second));
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("failed runs are recorded and the batch continues") {
  ExperimentConfig cfg;
  MixSpec good;
  good.M = 3;
  good.K = 2;
  good.Q = 1;
  good.F = 4;
  good.N = 64;
  MixSpec bad = good;
  bad.K = 4;
  cfg.mixtures = {bad, good};
  SeparatorConfig five;
  five.algorithm = Algorithm::Five;  // single target only
  five.n_iter = 3;
  SeparatorConfig ip = five;
  ip.algorithm = Algorithm::OverIvaIp;
  cfg.separators = {five, ip};
  const ExperimentResult res = run_experiment(cfg);
  REQUIRE(res.runs.size() == 4);
  CHECK_FALSE(res.runs[0].ok);
  CHECK_FALSE(res.runs[1].ok);
  CHECK_FALSE(res.runs[2].ok);
  CHECK(res.runs[3].ok);
  CHECK_FALSE(res.runs[0].error.empty());
  CHECK(run_to_json(res.runs[2]).contains("error"));

  std::ostringstream summary;
  write_summary_csv(summary, res.runs);
  const auto rows = lines(summary.str());
  REQUIRE(rows.size() == 5);
  CHECK(fields(rows[1])[6] == "1");
  CHECK(fields(rows[1])[7] == "0");
  std::ostringstream runs;
  write_runs_csv(runs, res.runs);
  CHECK(lines(runs.str()).size() == 1 + 3 * 2);
}
