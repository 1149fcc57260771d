#include "sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "ccov/metrics.hpp"
#include "ccov/rng.hpp"
#include "ccov/sketch.hpp"

namespace ccov::cli {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct TrialResult {
  bool ok = false;
  std::string failure;
  double error[2] = {0.0, 0.0};    // indexed by EstimateKind
  double seconds[2] = {0.0, 0.0};
};

std::size_t kind_slot(EstimateKind kind) { return kind == EstimateKind::Biased ? 0 : 1; }

}  // namespace

const SweepCell& SweepReport::cell(double gamma, EstimateKind kind) const {
  for (const auto& c : cells)
    if (c.gamma == gamma && c.kind == kind) return c;
  throw std::out_of_range("sweep report has no such cell");
}

std::size_t resolve_m(const SweepConfig& config, std::size_t p) {
  if (p < 2) throw std::invalid_argument("sweep needs p >= 2");
  if (config.m) return *config.m;
  const auto m = static_cast<long long>(std::llround(config.m_ratio * static_cast<double>(p)));
  return static_cast<std::size_t>(std::clamp<long long>(m, 1, static_cast<long long>(p) - 1));
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t g, std::size_t t) {
  return stream_seed(stream_seed(seed, g), t);
}

Reference build_reference(const Eigen::MatrixXd& data) {
  Reference ref;
  ref.covariance = sample_covariance(data);  // warm-up
  const auto start = Clock::now();
  ref.covariance = sample_covariance(data);
  ref.seconds = seconds_since(start);
  return ref;
}

SweepReport run_sweep(const SweepConfig& config, const Eigen::MatrixXd& data, const Reference* reference,
                      std::string source) {
  if (config.gammas.empty()) throw std::invalid_argument("sweep needs at least one gamma");
  for (double g : config.gammas)
    if (!(g > 0.0)) throw std::invalid_argument("sweep gamma values must be > 0");
  if (config.trials < 1) throw std::invalid_argument("sweep needs trials >= 1");
  if (config.kinds.empty()) throw std::invalid_argument("sweep needs at least one estimator kind");

  const auto p = static_cast<std::size_t>(data.rows());
  SweepReport report;
  report.p = p;
  report.n = static_cast<std::size_t>(data.cols());
  report.m = resolve_m(config, p);
  report.trials = config.trials;
  report.seed = config.seed;
  report.source = std::move(source);

  Reference built;
  if (!reference) {
    built = build_reference(data);
    reference = &built;
  }
  const Eigen::MatrixXd& cn = reference->covariance;
  report.reference_seconds = reference->seconds;
  report.reference_stable_rank = stable_rank(cn);

  const std::size_t m = report.m;
  const std::size_t num_gammas = config.gammas.size();
  const bool want_biased = std::count(config.kinds.begin(), config.kinds.end(), EstimateKind::Biased) > 0;
  const bool want_unbiased = std::count(config.kinds.begin(), config.kinds.end(), EstimateKind::Unbiased) > 0;

  auto run_trial = [&](std::size_t g, std::size_t t) {
    TrialResult r;
    try {
      const ProjectionSpec spec(DistributionSpec::sparse_sign(static_cast<double>(m) / config.gammas[g]), p, m,
                                trial_seed(config.seed, g, t));
      const SketchSet sketches = sketch_dataset(spec, data);
      const auto start = Clock::now();
      const CovEstimate biased = estimate(sketches, EstimateKind::Biased);
      r.seconds[0] = seconds_since(start);
      if (want_biased) r.error[0] = normalized_error(biased.matrix, cn).normalized_error;
      if (want_unbiased) {
        const auto debias_start = Clock::now();
        const CovEstimate unbiased = debias(biased);
        r.seconds[1] = r.seconds[0] + seconds_since(debias_start);
        r.error[1] = normalized_error(unbiased.matrix, cn).normalized_error;
      }
      r.ok = true;
    } catch (const std::exception& e) {
      r.failure = e.what();
    }
    return r;
  };

  // One untimed trial per gamma before measuring.
  for (std::size_t g = 0; g < num_gammas; ++g) run_trial(g, 0);

  std::vector<TrialResult> results(num_gammas * config.trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t task; (task = next.fetch_add(1)) < results.size();)
      results[task] = run_trial(task / config.trials, task % config.trials);
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(config.jobs, static_cast<unsigned>(results.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(worker);
  }

  for (std::size_t g = 0; g < num_gammas; ++g) {
    for (EstimateKind kind : config.kinds) {
      SweepCell cell;
      cell.gamma = config.gammas[g];
      cell.s = static_cast<double>(m) / cell.gamma;
      cell.kind = kind;
      double time_sum = 0.0;
      for (std::size_t t = 0; t < config.trials; ++t) {
        const TrialResult& r = results[g * config.trials + t];
        cell.seeds.push_back(trial_seed(config.seed, g, t));
        if (!r.ok) {
          std::ostringstream msg;
          msg << "trial " << t << ": " << r.failure;
          cell.failures.push_back(msg.str());
          continue;
        }
        cell.errors.push_back(r.error[kind_slot(kind)]);
        time_sum += r.seconds[kind_slot(kind)];
      }
      const auto ok = static_cast<double>(cell.errors.size());
      if (ok > 0) {
        for (double e : cell.errors) cell.mean_error += e;
        cell.mean_error /= ok;
        double ss = 0.0;
        for (double e : cell.errors) ss += (e - cell.mean_error) * (e - cell.mean_error);
        cell.std_error = ok > 1 ? std::sqrt(ss / (ok - 1)) : 0.0;
        cell.mean_seconds = time_sum / ok;
        cell.mean_normalized_time =
            report.reference_seconds > 0 ? cell.mean_seconds / report.reference_seconds : 0.0;
      } else {
        cell.mean_error = std::numeric_limits<double>::quiet_NaN();
        cell.std_error = std::numeric_limits<double>::quiet_NaN();
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

nlohmann::json to_json(const SweepReport& report) {
  auto number = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["version"] = 1;
  j["source"] = report.source;
  j["p"] = report.p;
  j["n"] = report.n;
  j["m"] = report.m;
  j["trials"] = report.trials;
  j["seed"] = report.seed;
  j["reference_stable_rank"] = report.reference_stable_rank;
  j["reference_seconds"] = report.reference_seconds;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json cell;
    cell["gamma"] = c.gamma;
    cell["s"] = c.s;
    cell["kind"] = to_string(c.kind);
    cell["mean_error"] = number(c.mean_error);
    cell["std_error"] = number(c.std_error);
    cell["mean_seconds"] = c.mean_seconds;
    cell["mean_normalized_time"] = c.mean_normalized_time;
    cell["completed_trials"] = c.errors.size();
    cell["errors"] = c.errors;
    cell["seeds"] = c.seeds;
    cell["failures"] = c.failures;
    cells.push_back(std::move(cell));
  }
  j["cells"] = std::move(cells);
  return j;
}

std::string to_csv(const SweepReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "gamma,s,kind,mean_error,std_error,mean_seconds,mean_normalized_time,completed_trials,failures\n";
  for (const auto& c : report.cells)
    out << c.gamma << ',' << c.s << ',' << to_string(c.kind) << ',' << c.mean_error << ',' << c.std_error << ','
        << c.mean_seconds << ',' << c.mean_normalized_time << ',' << c.errors.size() << ',' << c.failures.size()
        << '\n';
  return out.str();
}

}  // namespace ccov::cli
