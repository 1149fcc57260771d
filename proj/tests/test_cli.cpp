#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ccov/estimator.hpp"
#include "ccov/ingest.hpp"
#include "ccov/matrix_market.hpp"
#include "ccov/metrics.hpp"
#include "ccov/sketch.hpp"
#include "commands.hpp"
#include "support.hpp"
#include "sweep.hpp"

using namespace ccov;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result ccov_cmd(std::vector<std::string> args) {
  args.insert(args.begin(), "ccov");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

Dataset write_spiked(const std::filesystem::path& path, std::size_t p, std::size_t n, std::uint64_t seed) {
  SynthSpec s;
  s.model = SpikedModel{p, {6.0, 2.0}, 0.4};
  s.n = n;
  s.seed = seed;
  Dataset d = generate_synthetic(s);
  save_dataset(path, d);
  return d;
}

nlohmann::json read_json(const std::filesystem::path& path) { return nlohmann::json::parse(read_file(path)); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("sketch writes the requested spec") {
  testing::TempDir dir("cli-sketch");
  write_spiked(dir / "d.mtx", 400, 3, 1);
  const auto r = ccov_cmd({"sketch", "--input", (dir / "d.mtx").string(), "--m", "314", "--s", "100", "--seed", "7",
                           "--out", (dir / "s.bin").string()});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("p=400, n=3") != std::string::npos);
  const SketchSet set = read_sketch(dir / "s.bin");
  CHECK(set.spec.p == 400);
  CHECK(set.spec.m == 314);
  CHECK(set.spec.dist.sparsity() == 100.0);
  CHECK(set.spec.master_seed == 7);

  // --gamma picks s = m / gamma; gamma >= 1 warns.
  const auto g = ccov_cmd({"sketch", "--input", (dir / "d.mtx").string(), "--m", "10", "--gamma", "2", "--out",
                           (dir / "g.bin").string()});
  CHECK(g.code == 0);
  CHECK(g.err.find("warning") != std::string::npos);
  CHECK(read_sketch(dir / "g.bin").spec.dist.sparsity() == 5.0);
}

TEST_CASE("sketch argument errors") {
  testing::TempDir dir("cli-err");
  write_spiked(dir / "d.mtx", 20, 4, 1);
  const auto missing = ccov_cmd({"sketch", "--input", (dir / "nope.mtx").string(), "--m", "3", "--s", "2", "--out",
                                 (dir / "s.bin").string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.mtx") != std::string::npos);

  const auto too_big = ccov_cmd({"sketch", "--input", (dir / "d.mtx").string(), "--m", "20", "--s", "2", "--out",
                                 (dir / "s.bin").string()});
  CHECK(too_big.code == 2);
  CHECK(too_big.err.find("m < p") != std::string::npos);

  CHECK(ccov_cmd({"sketch", "--input", (dir / "d.mtx").string(), "--m", "3", "--out", (dir / "s.bin").string()})
            .code == 2);
  CHECK(ccov_cmd({"sketch", "--bogus"}).code == 2);
  CHECK(ccov_cmd({}).code == 2);
}

TEST_CASE("estimate matches the in-process pipeline") {
  testing::TempDir dir("cli-est");
  write_spiked(dir / "d.mtx", 30, 50, 2);
  REQUIRE(ccov_cmd({"--seed", "5", "sketch", "--input", (dir / "d.mtx").string(), "--m", "12", "--gamma", "0.3",
                    "--out", (dir / "s.bin").string()})
              .code == 0);
  const auto u = ccov_cmd({"estimate", "--sketch", (dir / "s.bin").string(), "--out", (dir / "u.mtx").string()});
  REQUIRE(u.code == 0);
  const SketchSet set = read_sketch(dir / "s.bin");
  CHECK(set.spec.master_seed == 5);
  const CovEstimate ref = estimate(set, EstimateKind::Unbiased);
  CHECK((read_matrix_market(dir / "u.mtx").array() == ref.matrix.array()).all());

  const auto side = read_json(dir / "u.mtx.json");
  CHECK(side["kind"] == "Unbiased");
  CHECK(side["params"]["kappa"].get<double>() == 37.0);
  CHECK(side["params"]["gamma"].get<double>() == doctest::Approx(0.3));
  CHECK(side["params"]["alpha1"].get<double>() == ref.params.coefficients->alpha1);
  CHECK(side["params"]["alpha2"].get<double>() == ref.params.coefficients->alpha2);

  REQUIRE(ccov_cmd({"estimate", "--biased", "--sketch", (dir / "s.bin").string(), "--out", (dir / "b.mtx").string()})
              .code == 0);
  CHECK(read_json(dir / "b.mtx.json")["kind"] == "Biased");
  CHECK((read_matrix_market(dir / "b.mtx").array() == estimate(set, EstimateKind::Biased).matrix.array()).all());
}

TEST_CASE("corrupt sketch exits 3 with the byte offset") {
  testing::TempDir dir("cli-corrupt");
  write_spiked(dir / "d.mtx", 10, 20, 3);
  REQUIRE(ccov_cmd({"sketch", "--input", (dir / "d.mtx").string(), "--m", "4", "--s", "2", "--out",
                    (dir / "s.bin").string()})
              .code == 0);
  const std::string bytes = read_file(dir / "s.bin");
  std::ofstream(dir / "cut.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 9);
  const auto r = ccov_cmd({"estimate", "--sketch", (dir / "cut.bin").string(), "--out", (dir / "c.mtx").string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("byte offset") != std::string::npos);
}

TEST_CASE("eigvec exports") {
  testing::TempDir dir("cli-eig");
  Eigen::VectorXd d = Eigen::VectorXd::Constant(784, 0.5);
  d[0] = 3.0;
  d[5] = 2.0;
  write_matrix_market(dir / "c.mtx", Eigen::MatrixXd(d.asDiagonal()), true);
  const auto r = ccov_cmd({"eigvec", "--cov", (dir / "c.mtx").string(), "--k", "2", "--out",
                           (dir / "v.csv").string(), "--pgm", "28x28", "--summary", (dir / "s.json").string()});
  REQUIRE(r.code == 0);
  const Dataset v = parse_csv(read_file(dir / "v.csv"), Orientation::ColumnsAreSamples);
  CHECK(v.p() == 784);
  CHECK(v.n() == 2);
  CHECK(v.samples(0, 0) == doctest::Approx(1.0));
  CHECK(v.samples(5, 1) == doctest::Approx(1.0));
  CHECK(read_json(dir / "s.json")["eigenvalues"][0].get<double>() == doctest::Approx(3.0));
  const std::string pgm = read_file(dir / "v_1.pgm");
  CHECK(pgm.rfind("P5\n28 28\n255\n", 0) == 0);
  CHECK(pgm.size() == 13 + 784);
  CHECK(static_cast<unsigned char>(pgm[13]) == 255);
  CHECK(std::filesystem::exists(dir / "v_2.pgm"));

  CHECK(ccov_cmd({"eigvec", "--cov", (dir / "c.mtx").string(), "--out", (dir / "w.csv").string(), "--pgm", "27x28"})
            .code == 2);
}

TEST_CASE("verify") {
  testing::TempDir dir("cli-verify");
  CHECK(ccov_cmd({"verify", "--trials", "100"}).code == 2);
  const auto r = ccov_cmd({"--seed", "1", "verify", "--trials", "10000", "--out", (dir / "v.json").string()});
  CHECK(r.code == 0);
  const auto j = read_json(dir / "v.json");
  CHECK(j["version"] == 1);
  CHECK(j["passed"] == true);
  CHECK(j["familywise_false_failure_bound"].get<double>() < 0.01);
  for (const auto& c : j["checks"]) CHECK(c.contains("seed"));
}

TEST_CASE("synth") {
  testing::TempDir dir("cli-synth");
  REQUIRE(ccov_cmd({"synth", "--model", "stable_rank", "--p", "16", "--n", "30", "--beta", "2", "--out",
                    (dir / "a.csv").string()})
              .code == 0);
  const Dataset a = load_dataset(dir / "a.csv");
  CHECK(a.p() == 16);
  CHECK(a.n() == 30);
  std::ofstream(dir / "spec.json") << R"({"model":"spiked","p":8,"spikes":[3],"sigma":0.2,"n":12,"seed":4})";
  REQUIRE(ccov_cmd({"synth", "--spec", (dir / "spec.json").string(), "--out", (dir / "b.mtx").string()}).code == 0);
  CHECK(load_dataset(dir / "b.mtx").p() == 8);
  CHECK(ccov_cmd({"synth", "--model", "other", "--p", "4", "--n", "2", "--out", (dir / "c.mtx").string()}).code == 2);
}

TEST_CASE("sweep single trial equals the one-shot pipeline") {
  testing::TempDir dir("cli-sweep");
  const Dataset d = write_spiked(dir / "d.mtx", 24, 40, 4);
  cli::SweepConfig cfg;
  cfg.m = 8;
  cfg.gammas = {0.25};
  cfg.trials = 1;
  cfg.seed = 9;
  const cli::SweepReport rep = cli::run_sweep(cfg, d.samples);
  const ProjectionSpec spec(DistributionSpec::sparse_sign(32), 24, 8, cli::trial_seed(9, 0, 0));
  const SketchSet set = sketch_dataset(spec, d.samples);
  const Eigen::MatrixXd cn = sample_covariance(d.samples);
  CHECK(rep.cell(0.25, EstimateKind::Biased).errors.at(0) ==
        normalized_error(estimate(set, EstimateKind::Biased).matrix, cn).normalized_error);
  CHECK(rep.cell(0.25, EstimateKind::Unbiased).errors.at(0) ==
        normalized_error(estimate(set, EstimateKind::Unbiased).matrix, cn).normalized_error);
  CHECK(rep.cell(0.25, EstimateKind::Unbiased).seeds.at(0) == spec.master_seed);
}

TEST_CASE("sweep is reproducible and caches the reference") {
  testing::TempDir dir("cli-sweep2");
  const Dataset d = write_spiked(dir / "d.mtx", 20, 30, 5);
  auto args = [&](const std::string& out) {
    return std::vector<std::string>{"--seed", "3", "--jobs", "2", "sweep", "--input", (dir / "d.mtx").string(),
                                    "--gammas", "0.2,0.5", "--trials", "4", "--out", (dir / out).string()};
  };
  REQUIRE(ccov_cmd(args("a.json")).code == 0);
  const auto cache = cli::reference_cache_path(dir / "d.mtx", cli::content_hash(d.samples));
  CHECK(std::filesystem::exists(cache));
  REQUIRE(ccov_cmd(args("b.json")).code == 0);
  auto strip = [](nlohmann::json j) {
    for (auto& c : j["cells"]) {
      c.erase("mean_seconds");
      c.erase("mean_normalized_time");
    }
    j.erase("reference_seconds");
    return j;
  };
  const auto a = read_json(dir / "a.json");
  CHECK(strip(a) == strip(read_json(dir / "b.json")));
  CHECK(a["reference_seconds"] == read_json(dir / "b.json")["reference_seconds"]);
  CHECK(a["cells"].size() == 4);
  CHECK(a["cells"][0]["seeds"].size() == 4);
  CHECK(std::filesystem::exists(dir / "a.csv"));

  // Same numbers from a single worker, without the cache.
  auto serial = args("c.json");
  serial[3] = "1";
  serial.push_back("--no-cache");
  REQUIRE(ccov_cmd(serial).code == 0);
  CHECK(strip(a) == strip(read_json(dir / "c.json")));

  CHECK(ccov_cmd({"sweep", "--gammas", "0.2"}).code == 2);
  CHECK(cli::content_hash(d.samples) != cli::content_hash(Eigen::MatrixXd(d.samples * 2)));
}

TEST_CASE("sweep records failing cells and keeps going") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(6, 5);
  cli::SweepConfig cfg;
  cfg.m = 1;
  cfg.gammas = {1.0, 0.5};  // gamma = 1 means s = 1 with m = 1: singular correction
  cfg.trials = 2;
  const cli::SweepReport rep = cli::run_sweep(cfg, x);
  CHECK(rep.cell(1.0, EstimateKind::Unbiased).failures.size() == 2);
  CHECK(rep.cell(0.5, EstimateKind::Unbiased).failures.empty());
  CHECK(std::isnan(rep.cell(1.0, EstimateKind::Unbiased).mean_error));
  CHECK(cli::to_json(rep)["cells"][0]["mean_error"].is_null());
}

}  // TEST_SUITE
