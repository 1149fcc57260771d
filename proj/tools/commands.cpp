#include "commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ccov/estimator.hpp"
#include "ccov/ingest.hpp"
#include "ccov/matrix_market.hpp"
#include "ccov/metrics.hpp"
#include "ccov/oracle.hpp"
#include "ccov/serialize.hpp"
#include "ccov/sketch.hpp"
#include "sweep.hpp"

namespace ccov::cli {
namespace fs = std::filesystem;
namespace {

struct Global {
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  bool quiet = false;
};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("input file '" + path + "' does not exist");
}

std::optional<Orientation> orientation_from(bool rows, bool cols) {
  if (rows && cols) throw UsageError("--samples-rows and --samples-cols are mutually exclusive");
  if (rows) return Orientation::RowsAreSamples;
  if (cols) return Orientation::ColumnsAreSamples;
  return std::nullopt;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

fs::path sidecar_path(const fs::path& matrix_path) { return fs::path(matrix_path.string() + ".json"); }

// ---------------------------------------------------------------- sketch

struct SketchArgs {
  std::string input;
  std::string out;
  std::optional<std::size_t> m;
  double m_ratio = 0.4;
  std::optional<double> s;
  std::optional<double> gamma;
  std::string family = "sparse_sign";
  bool rows = false;
  bool cols = false;
};

int cmd_sketch(const SketchArgs& a, const Global& g, std::ostream& out, std::ostream& err) {
  require_file(a.input);
  const Dataset data = load_dataset(a.input, orientation_from(a.rows, a.cols));
  if (!g.quiet) err << "dataset " << data.source << ": p=" << data.p() << ", n=" << data.n() << '\n';

  SweepConfig sizing;
  sizing.m = a.m;
  sizing.m_ratio = a.m_ratio;
  const std::size_t m = a.m ? *a.m : resolve_m(sizing, data.p());
  if (m >= data.p() || m < 1) {
    std::ostringstream msg;
    msg << "--m must satisfy 1 <= m < p (m=" << m << ", p=" << data.p() << ")";
    throw UsageError(msg.str());
  }

  DistributionSpec dist = DistributionSpec::gaussian();
  if (a.family == "sparse_sign") {
    if (a.s && a.gamma) throw UsageError("give either --s or --gamma, not both");
    if (!a.s && !a.gamma) throw UsageError("sparse sign projections need --s or --gamma");
    dist = DistributionSpec::sparse_sign(a.s ? *a.s : static_cast<double>(m) / *a.gamma);
  } else if (a.family != "gaussian") {
    throw UsageError("--family must be sparse_sign or gaussian");
  }
  const ProjectionSpec spec(dist, data.p(), m, g.seed);
  if (!g.quiet)
    for (const auto& w : spec.warnings()) err << "warning: " << w << '\n';

  const SketchSet sketches = sketch_dataset(spec, data.samples, g.jobs);
  write_sketch(fs::path(a.out), sketches);
  if (!g.quiet) out << "wrote " << sketches.n() << " sketches (m=" << m << ") to " << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string sketch;
  std::string out;
  bool biased = false;
  bool unbiased = false;
};

int cmd_estimate(const EstimateArgs& a, const Global& g, std::ostream& out, std::ostream& err) {
  if (a.biased && a.unbiased) throw UsageError("--biased and --unbiased are mutually exclusive");
  require_file(a.sketch);
  const SketchSet sketches = read_sketch(fs::path(a.sketch));
  if (!g.quiet)
    err << "sketch: p=" << sketches.spec.p << ", m=" << sketches.spec.m << ", n=" << sketches.n() << ", "
        << sketches.spec.dist.name() << '\n';
  const EstimateKind kind = a.biased ? EstimateKind::Biased : EstimateKind::Unbiased;
  const CovEstimate est = estimate(sketches, kind, g.jobs);

  write_matrix_market(fs::path(a.out), est.matrix, true, to_string(kind) + " compressive covariance estimate");
  write_json(sidecar_path(a.out), ccov::to_json(est));
  if (!g.quiet)
    out << "wrote " << to_string(kind) << " estimate to " << a.out << " (" << est.wall_time_seconds << " s)\n";
  return kOk;
}

// ---------------------------------------------------------------- eigvec

struct EigvecArgs {
  std::string cov;
  std::string out;
  std::size_t k = 1;
  std::string pgm;
  std::string pgm_prefix;
  std::string summary;
};

void write_pgm(const fs::path& path, const Eigen::VectorXd& v, std::size_t width, std::size_t height) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << width << ' ' << height << "\n255\n";
  const double lo = v.minCoeff();
  const double span = v.maxCoeff() - lo;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double t = span > 0 ? (v[i] - lo) / span : 0.5;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
  }
}

int cmd_eigvec(const EigvecArgs& a, const Global& g, std::ostream& out, std::ostream& err) {
  require_file(a.cov);
  const Eigen::MatrixXd c = read_matrix_market(fs::path(a.cov));
  const auto p = static_cast<std::size_t>(c.rows());

  std::size_t width = 0, height = 0;
  if (!a.pgm.empty()) {
    char x = 0;
    std::istringstream dims(a.pgm);
    if (!(dims >> width >> x >> height) || (x != 'x' && x != 'X'))
      throw UsageError("--pgm expects WIDTHxHEIGHT, got '" + a.pgm + "'");
    if (width * height != p) {
      std::ostringstream msg;
      msg << "--pgm " << width << "x" << height << " has " << width * height << " pixels but p=" << p;
      throw UsageError(msg.str());
    }
  }

  const SpectrumSummary spectrum = top_eigenvectors(c, a.k);
  std::ofstream csv(a.out);
  if (!csv) throw std::runtime_error("cannot open '" + a.out + "' for writing");
  for (Eigen::Index i = 0; i < spectrum.eigenvectors.rows(); ++i) {
    for (Eigen::Index j = 0; j < spectrum.eigenvectors.cols(); ++j)
      csv << (j ? "," : "") << format_double(spectrum.eigenvectors(i, j));
    csv << '\n';
  }
  if (!a.summary.empty()) write_json(a.summary, ccov::to_json(spectrum));
  if (!a.pgm.empty()) {
    const std::string prefix = a.pgm_prefix.empty() ? fs::path(a.out).replace_extension().string() : a.pgm_prefix;
    for (Eigen::Index j = 0; j < spectrum.eigenvectors.cols(); ++j)
      write_pgm(prefix + "_" + std::to_string(j + 1) + ".pgm", spectrum.eigenvectors.col(j), width, height);
  }
  if (!g.quiet) {
    out << "eigenvalues:";
    for (Eigen::Index j = 0; j < spectrum.eigenvalues.size(); ++j) out << ' ' << spectrum.eigenvalues[j];
    out << "\nstable rank: " << spectrum.stable_rank << '\n';
  }
  (void)err;
  return kOk;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::size_t trials = 100000;
  std::string out;
};

int cmd_verify(const VerifyArgs& a, const Global& g, std::ostream& out, std::ostream& err) {
  if (a.trials < oracle::kMinMomentTrials) {
    std::ostringstream msg;
    msg << "--trials must be at least " << oracle::kMinMomentTrials << " (got " << a.trials << ")";
    throw UsageError(msg.str());
  }
  const auto reports = oracle::default_grid(g.seed, a.trials, g.jobs);
  bool all = true;
  double bound = 0.0;
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& r : reports) {
    all = all && r.passed;
    bound += r.false_failure_bound;
    checks.push_back(ccov::to_json(r));
    if (!g.quiet) {
      out << (r.passed ? "PASS " : "FAIL ") << r.label << "  trials=" << r.trials << " seed=" << r.seed
          << " max|dev|=" << r.max_abs_deviation << " allowed=" << r.max_allowed << " max_z=" << r.max_z;
      if (r.unbiased_relative_error) out << " unbiased_rel_err=" << *r.unbiased_relative_error;
      out << '\n';
    }
  }
  nlohmann::json report;
  report["version"] = 1;
  report["seed"] = g.seed;
  report["trials"] = a.trials;
  report["band_sigmas"] = oracle::kBandSigmas;
  report["familywise_false_failure_bound"] = bound;
  report["passed"] = all;
  report["checks"] = std::move(checks);
  if (!a.out.empty()) write_json(a.out, report);
  if (!g.quiet)
    out << (all ? "all checks passed" : "verification FAILED") << " (seed " << g.seed
        << ", Bonferroni false-failure bound " << bound << ")\n";
  (void)err;
  return all ? kOk : kVerifyFailed;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string spec_file;
  std::string model = "spiked";
  std::size_t p = 0;
  std::size_t n = 0;
  std::vector<double> spikes;
  double sigma = 0.0;
  double beta = 1.0;
  std::string out;
};

SynthSpec synth_spec(const SynthArgs& a, std::uint64_t seed) {
  if (!a.spec_file.empty()) {
    require_file(a.spec_file);
    try {
      return synth_spec_from_json(nlohmann::json::parse(read_file(a.spec_file)));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("synthetic spec is not valid JSON: ") + e.what(),
                        static_cast<std::int64_t>(e.byte));
    }
  }
  SynthSpec spec;
  spec.n = a.n;
  spec.seed = seed;
  if (a.model == "spiked") {
    spec.model = SpikedModel{a.p, a.spikes, a.sigma};
  } else if (a.model == "stable_rank" || a.model == "stable-rank") {
    spec.model = StableRankModel{a.p, a.beta};
  } else {
    throw UsageError("--model must be spiked or stable_rank");
  }
  return spec;
}

void write_csv_rows(const fs::path& path, const Eigen::MatrixXd& samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  for (Eigen::Index i = 0; i < samples.cols(); ++i) {
    for (Eigen::Index j = 0; j < samples.rows(); ++j) out << (j ? "," : "") << format_double(samples(j, i));
    out << '\n';
  }
}

int cmd_synth(const SynthArgs& a, const Global& g, std::ostream& out, std::ostream&) {
  const SynthSpec spec = synth_spec(a, g.seed);
  const Dataset data = generate_synthetic(spec);
  const fs::path path(a.out);
  if (path.extension() == ".csv")
    write_csv_rows(path, data.samples);
  else
    save_dataset(path, data);
  if (!g.quiet)
    out << "wrote " << data.source << " to " << a.out << " (population stable rank "
        << stable_rank(population_covariance(spec)) << ")\n";
  return kOk;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string input;
  std::string synth;
  bool rows = false;
  bool cols = false;
  std::optional<std::size_t> m;
  double m_ratio = 0.4;
  std::vector<double> gammas = {0.1, 0.2, 0.3, 0.4, 0.5};
  std::size_t trials = 10;
  std::vector<std::string> kinds = {"biased", "unbiased"};
  std::string out;
  bool no_cache = false;
};

Reference cached_reference(const fs::path& dataset, const Eigen::MatrixXd& samples, bool quiet, std::ostream& err) {
  const fs::path cache = reference_cache_path(dataset, content_hash(samples));
  const fs::path meta = sidecar_path(cache);
  if (fs::exists(cache) && fs::exists(meta)) {
    try {
      Reference ref;
      ref.covariance = read_matrix_market(cache);
      ref.seconds = nlohmann::json::parse(read_file(meta)).at("seconds").get<double>();
      if (ref.covariance.rows() == samples.rows()) {
        if (!quiet) err << "using cached reference covariance " << cache.string() << '\n';
        return ref;
      }
    } catch (const std::exception& e) {
      if (!quiet) err << "warning: ignoring unreadable cache " << cache.string() << ": " << e.what() << '\n';
    }
  }
  Reference ref = build_reference(samples);
  try {
    write_matrix_market(cache, ref.covariance, true, "reference sample covariance");
    write_json(meta, nlohmann::json{{"version", 1}, {"seconds", ref.seconds}});
  } catch (const std::exception& e) {
    if (!quiet) err << "warning: could not write cache " << cache.string() << ": " << e.what() << '\n';
  }
  return ref;
}

int cmd_sweep(const SweepArgs& a, const Global& g, std::ostream& out, std::ostream& err) {
  if (a.input.empty() == a.synth.empty()) throw UsageError("sweep needs exactly one of --input or --synth");
  Dataset data;
  std::optional<Reference> reference;
  if (!a.input.empty()) {
    require_file(a.input);
    data = load_dataset(a.input, orientation_from(a.rows, a.cols));
  } else {
    SynthArgs s;
    s.spec_file = a.synth;
    data = generate_synthetic(synth_spec(s, g.seed));
  }
  if (!g.quiet) err << "dataset " << data.source << ": p=" << data.p() << ", n=" << data.n() << '\n';
  if (!a.input.empty() && !a.no_cache) reference = cached_reference(a.input, data.samples, g.quiet, err);

  SweepConfig config;
  config.m = a.m;
  config.m_ratio = a.m_ratio;
  config.gammas = a.gammas;
  config.trials = a.trials;
  config.seed = g.seed;
  config.jobs = g.jobs;
  config.kinds.clear();
  for (const auto& k : a.kinds) {
    if (k == "biased")
      config.kinds.push_back(EstimateKind::Biased);
    else if (k == "unbiased")
      config.kinds.push_back(EstimateKind::Unbiased);
    else
      throw UsageError("--kinds accepts biased and unbiased, got '" + k + "'");
  }

  const SweepReport report = run_sweep(config, data.samples, reference ? &*reference : nullptr, data.source);
  if (!a.out.empty()) {
    write_json(a.out, to_json(report));
    std::ofstream csv(fs::path(a.out).replace_extension(".csv"));
    csv << to_csv(report);
  }
  if (!g.quiet) {
    out << "p=" << report.p << " n=" << report.n << " m=" << report.m << " reference stable rank "
        << report.reference_stable_rank << '\n';
    out << std::setw(8) << "gamma" << std::setw(10) << "kind" << std::setw(14) << "mean_err" << std::setw(14)
        << "std_err" << std::setw(14) << "norm_time" << '\n';
    for (const auto& c : report.cells) {
      out << std::setw(8) << c.gamma << std::setw(10) << to_string(c.kind) << std::setw(14) << c.mean_error
          << std::setw(14) << c.std_error << std::setw(14) << c.mean_normalized_time;
      if (!c.failures.empty()) out << "  (" << c.failures.size() << " failed: " << c.failures.front() << ")";
      out << '\n';
    }
  }
  return kOk;
}

}  // namespace

std::uint64_t content_hash(const Eigen::MatrixXd& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* bytes, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t shape[2] = {data.rows(), data.cols()};
  mix(shape, sizeof shape);
  mix(data.data(), static_cast<std::size_t>(data.size()) * sizeof(double));
  return h;
}

fs::path reference_cache_path(const fs::path& dataset, std::uint64_t hash) {
  std::ostringstream name;
  name << dataset.filename().string() << ".cn-" << std::hex << std::setw(16) << std::setfill('0') << hash << ".mtx";
  return dataset.parent_path() / name.str();
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Covariance estimation from sparse random projections"};
  app.name("ccov");
  app.require_subcommand(1);
  app.fallthrough();

  Global global;
  app.add_option("--seed", global.seed, "Master seed")->capture_default_str();
  app.add_option("--jobs", global.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_flag("--quiet", global.quiet, "Suppress progress output");

  SketchArgs sketch;
  auto* sk = app.add_subcommand("sketch", "Project a dataset to compressive measurements");
  sk->add_option("--input", sketch.input, "Dataset (.mtx or .csv)")->required();
  sk->add_option("--out", sketch.out, "Sketch file to write")->required();
  sk->add_option("--m", sketch.m, "Measurement dimension");
  sk->add_option("--m-ratio", sketch.m_ratio, "m/p when --m is not given")->capture_default_str();
  sk->add_option("--s", sketch.s, "Sparsity parameter s >= 1");
  sk->add_option("--gamma", sketch.gamma, "Compression factor m/s (alternative to --s)");
  sk->add_option("--family", sketch.family, "sparse_sign or gaussian")->capture_default_str();
  sk->add_flag("--samples-rows", sketch.rows, "Samples are rows of the input");
  sk->add_flag("--samples-cols", sketch.cols, "Samples are columns of the input");

  EstimateArgs est;
  auto* es = app.add_subcommand("estimate", "Estimate the covariance from a sketch file");
  es->add_option("--sketch", est.sketch, "Sketch file")->required();
  es->add_option("--out", est.out, "Matrix Market output (sidecar written to OUT.json)")->required();
  es->add_flag("--biased", est.biased, "Skip the bias correction");
  es->add_flag("--unbiased", est.unbiased, "Apply the bias correction (default)");

  SweepArgs sweep;
  auto* sw = app.add_subcommand("sweep", "Error and timing versus compression factor");
  sw->add_option("--input", sweep.input, "Dataset (.mtx or .csv)");
  sw->add_option("--synth", sweep.synth, "Synthetic dataset spec (JSON)");
  sw->add_flag("--samples-rows", sweep.rows, "Samples are rows of the input");
  sw->add_flag("--samples-cols", sweep.cols, "Samples are columns of the input");
  sw->add_option("--m", sweep.m, "Measurement dimension");
  sw->add_option("--m-ratio", sweep.m_ratio, "m/p when --m is not given")->capture_default_str();
  sw->add_option("--gammas", sweep.gammas, "Compression factors")->delimiter(',')->capture_default_str();
  sw->add_option("--trials", sweep.trials, "Trials per gamma")->capture_default_str()->check(CLI::PositiveNumber);
  sw->add_option("--kinds", sweep.kinds, "biased,unbiased")->delimiter(',')->capture_default_str();
  sw->add_option("--out", sweep.out, "JSON report (CSV written alongside)");
  sw->add_flag("--no-cache", sweep.no_cache, "Do not read or write the reference covariance cache");

  EigvecArgs eig;
  auto* ev = app.add_subcommand("eigvec", "Export leading eigenvectors of a covariance file");
  ev->add_option("--cov", eig.cov, "Covariance (Matrix Market)")->required();
  ev->add_option("--out", eig.out, "CSV output, one eigenvector per column")->required();
  ev->add_option("--k", eig.k, "Number of eigenvectors")->capture_default_str();
  ev->add_option("--pgm", eig.pgm, "Also write PGM images of size WIDTHxHEIGHT");
  ev->add_option("--pgm-prefix", eig.pgm_prefix, "PGM file prefix (default: OUT without extension)");
  ev->add_option("--summary", eig.summary, "JSON spectrum summary");

  VerifyArgs ver;
  auto* vf = app.add_subcommand("verify", "Monte Carlo check of the moment identities");
  vf->add_option("--trials", ver.trials, "Monte Carlo trials per check (>= 10000)")->capture_default_str();
  vf->add_option("--out", ver.out, "JSON report");

  SynthArgs syn;
  auto* sy = app.add_subcommand("synth", "Generate a synthetic dataset");
  sy->add_option("--spec", syn.spec_file, "Synthetic spec (JSON); overrides the other options");
  sy->add_option("--model", syn.model, "spiked or stable_rank")->capture_default_str();
  sy->add_option("--p", syn.p, "Dimension");
  sy->add_option("--n", syn.n, "Number of samples");
  sy->add_option("--spikes", syn.spikes, "Spike strengths")->delimiter(',');
  sy->add_option("--sigma", syn.sigma, "Noise level")->capture_default_str();
  sy->add_option("--beta", syn.beta, "Target stable rank")->capture_default_str();
  sy->add_option("--out", syn.out, "Output (.mtx, samples as columns; or .csv, samples as rows)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "ccov: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (sk->parsed()) return cmd_sketch(sketch, global, out, err);
    if (es->parsed()) return cmd_estimate(est, global, out, err);
    if (sw->parsed()) return cmd_sweep(sweep, global, out, err);
    if (ev->parsed()) return cmd_eigvec(eig, global, out, err);
    if (vf->parsed()) return cmd_verify(ver, global, out, err);
    if (sy->parsed()) return cmd_synth(syn, global, out, err);
  } catch (const FormatError& e) {
    err << "ccov: corrupt input: " << e.what() << '\n';
    return kCorrupt;
  } catch (const std::exception& e) {
    err << "ccov: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace ccov::cli
