#include "ccov/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <thread>

#include "ccov/estimator.hpp"
#include "ccov/metrics.hpp"
#include "ccov/rng.hpp"
#include "ccov/sketch.hpp"

namespace ccov::oracle {
namespace {

// Shard count is fixed so results depend only on the seed, never on `jobs`.
constexpr std::size_t kShards = 8;

// Entrywise Welford mean / sum of squared deviations, mergeable (Chan et al.).
class RunningMoments {
 public:
  RunningMoments(Eigen::Index rows, Eigen::Index cols)
      : mean_(Eigen::MatrixXd::Zero(rows, cols)), m2_(Eigen::MatrixXd::Zero(rows, cols)) {}

  void add(const Eigen::MatrixXd& x) {
    ++count_;
    const Eigen::MatrixXd delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_.array() += delta.array() * (x - mean_).array();
  }

  void merge(const RunningMoments& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    const Eigen::MatrixXd delta = other.mean_ - mean_;
    mean_ += delta * (nb / n);
    m2_ += other.m2_ + delta.cwiseProduct(delta) * (na * nb / n);
    count_ += other.count_;
  }

  MonteCarloMean result() const {
    MonteCarloMean out;
    out.mean = mean_;
    out.trials = count_;
    const double n = static_cast<double>(count_);
    out.standard_error = (m2_.array().max(0.0) / (n - 1.0) / n).sqrt().matrix();
    return out;
  }

 private:
  Eigen::MatrixXd mean_;
  Eigen::MatrixXd m2_;
  std::size_t count_ = 0;
};

// Runs `trial(shard_seed, index_in_shard, acc)` for every trial, sharded.
MonteCarloMean run_sharded(Eigen::Index rows, Eigen::Index cols, std::size_t trials,
                           std::uint64_t seed, unsigned jobs,
                           const std::function<void(std::uint64_t, std::size_t, RunningMoments&)>& trial) {
  std::vector<RunningMoments> shards(kShards, RunningMoments(rows, cols));
  auto run_shard = [&](std::size_t s) {
    const std::uint64_t shard_seed = stream_seed(seed, s);
    const std::size_t begin = trials * s / kShards;
    const std::size_t end = trials * (s + 1) / kShards;
    for (std::size_t t = begin; t < end; ++t) trial(shard_seed, t - begin, shards[s]);
  };
  jobs = std::clamp<unsigned>(jobs, 1, kShards);
  if (jobs == 1) {
    for (std::size_t s = 0; s < kShards; ++s) run_shard(s);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < kShards; s += jobs) run_shard(s);
      });
  }
  RunningMoments total(rows, cols);
  for (const auto& s : shards) total.merge(s);
  return total.result();
}

void require_trials(std::size_t trials, std::size_t minimum, const char* what) {
  if (trials < minimum) {
    std::ostringstream msg;
    msg << what << " needs at least " << minimum << " trials (got " << trials << ")";
    throw std::invalid_argument(msg.str());
  }
}

std::string describe(const DistributionSpec& dist, std::size_t m, std::size_t p) {
  std::ostringstream out;
  out << dist.name() << ", m=" << m << ", p=" << p;
  return out.str();
}

}  // namespace

std::string to_string(MomentTarget target) {
  switch (target) {
    case MomentTarget::Ekk: return "Ekk";
    case MomentTarget::Ekl: return "Ekl";
    case MomentTarget::SingleSampleExpectation: return "SingleSampleExpectation";
    case MomentTarget::FullEstimatorExpectation: return "FullEstimatorExpectation";
  }
  return "unknown";
}

Eigen::MatrixXd closed_form_Ekk(const DistributionSpec& dist, std::size_t m, std::size_t p, std::size_t k) {
  if (k >= p) throw std::invalid_argument("closed_form_Ekk: k out of range");
  const Moments mom = dist.moments();
  const double md = static_cast<double>(m);
  const double base = md * mom.mu2 * mom.mu2;
  const auto n = static_cast<Eigen::Index>(p);
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd e = base * Eigen::MatrixXd::Identity(n, n);
  e(kk, kk) += base * (mom.kappa + md + 1.0);
  return e;
}

Eigen::MatrixXd closed_form_Ekl(const DistributionSpec& dist, std::size_t m, std::size_t p,
                                std::size_t k, std::size_t l) {
  if (k == l) throw std::invalid_argument("closed_form_Ekl: k == l, use closed_form_Ekk");
  if (k >= p || l >= p) throw std::invalid_argument("closed_form_Ekl: index out of range");
  const double mu2 = dist.moments().mu2;
  const double md = static_cast<double>(m);
  const auto n = static_cast<Eigen::Index>(p);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, n);
  e(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = md * md * mu2 * mu2;
  e(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = md * mu2 * mu2;
  return e;
}

Eigen::MatrixXd closed_form_single_sample(const DistributionSpec& dist, std::size_t m,
                                          const Eigen::VectorXd& x) {
  const Moments mom = dist.moments();
  const double md = static_cast<double>(m);
  const double mu2sq = mom.mu2 * mom.mu2;
  const Eigen::MatrixXd xx = x * x.transpose();
  Eigen::MatrixXd e = (md * md + md) * mu2sq * xx;
  e.diagonal() += mom.kappa * md * mu2sq * xx.diagonal();
  e.diagonal().array() += md * mu2sq * xx.trace();
  return e;
}

Eigen::MatrixXd closed_form_biased_mean(const Eigen::MatrixXd& c, double kappa, std::size_t m) {
  const double mp1 = static_cast<double>(m) + 1.0;
  Eigen::MatrixXd e = c;
  e.diagonal() += (kappa / mp1) * c.diagonal();
  e.diagonal().array() += c.trace() / mp1;
  return e;
}

MonteCarloMean monte_carlo_Ekl(const DistributionSpec& dist, std::size_t m, std::size_t p,
                               std::size_t k, std::size_t l, std::size_t trials, std::uint64_t seed,
                               unsigned jobs) {
  require_trials(trials, kMinMomentTrials, "monte_carlo_Ekl");
  if (k >= p || l >= p) throw std::invalid_argument("monte_carlo_Ekl: index out of range");
  const auto n = static_cast<Eigen::Index>(p);
  return run_sharded(n, n, trials, seed, jobs, [&](std::uint64_t shard_seed, std::size_t t, RunningMoments& acc) {
    const ProjectionSpec spec(dist, p, m, shard_seed);
    const Eigen::MatrixXd r = generate_dense(spec, t);
    const Eigen::MatrixXd rrt = r * r.transpose();
    acc.add(rrt.col(static_cast<Eigen::Index>(k)) * rrt.col(static_cast<Eigen::Index>(l)).transpose());
  });
}

MomentCheckReport compare(const MonteCarloMean& mc, const Eigen::MatrixXd& expected, bool symmetric) {
  MomentCheckReport report;
  report.trials = mc.trials;
  report.passed = true;
  double worst_ratio = -1.0;
  for (Eigen::Index j = 0; j < expected.cols(); ++j) {
    for (Eigen::Index i = 0; i < expected.rows(); ++i) {
      if (symmetric && i > j) continue;
      const double dev = std::abs(mc.mean(i, j) - expected(i, j));
      const double se = mc.standard_error(i, j);
      const double band = kBandSigmas * se + 1e-12 * (1.0 + std::abs(expected(i, j)));
      ++report.entries_compared;
      if (se > 0.0) {
        ++report.entries_with_variance;
        report.max_z = std::max(report.max_z, dev / se);
      }
      const double ratio = dev / band;
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        report.max_abs_deviation = dev;
        report.max_allowed = band;
        report.worst_row = i;
        report.worst_col = j;
      }
      if (dev > band) report.passed = false;
    }
  }
  const double tail = std::erfc(kBandSigmas / std::sqrt(2.0));  // P(|Z| > 4)
  report.false_failure_bound = static_cast<double>(report.entries_with_variance) * tail;
  return report;
}

MomentCheckReport check_moment_matrix(const DistributionSpec& dist, std::size_t m, std::size_t p,
                                      std::size_t k, std::size_t l, std::size_t trials,
                                      std::uint64_t seed, unsigned jobs) {
  const MonteCarloMean mc = monte_carlo_Ekl(dist, m, p, k, l, trials, seed, jobs);
  const bool diagonal = k == l;
  const Eigen::MatrixXd expected =
      diagonal ? closed_form_Ekk(dist, m, p, k) : closed_form_Ekl(dist, m, p, k, l);
  MomentCheckReport report = compare(mc, expected, diagonal);
  report.target = diagonal ? MomentTarget::Ekk : MomentTarget::Ekl;
  report.seed = seed;
  std::ostringstream label;
  label << (diagonal ? "E_kk" : "E_kl") << " [" << describe(dist, m, p) << ", k=" << k;
  if (!diagonal) label << ", l=" << l;
  label << "]";
  report.label = label.str();
  return report;
}

MomentCheckReport single_sample_expectation_check(const DistributionSpec& dist, std::size_t m,
                                                  const Eigen::VectorXd& x, std::size_t trials,
                                                  std::uint64_t seed, unsigned jobs) {
  require_trials(trials, kMinMomentTrials, "single_sample_expectation_check");
  if (x.isZero(0.0)) throw std::invalid_argument("single_sample_expectation_check: x must be nonzero");
  const auto p = static_cast<std::size_t>(x.size());
  const auto n = x.size();
  const MonteCarloMean mc =
      run_sharded(n, n, trials, seed, jobs, [&](std::uint64_t shard_seed, std::size_t t, RunningMoments& acc) {
        const ProjectionSpec spec(dist, p, m, shard_seed);
        const Eigen::MatrixXd r = generate_dense(spec, t);
        const Eigen::VectorXd z = r * (r.transpose() * x);
        acc.add(z * z.transpose());
      });
  MomentCheckReport report = compare(mc, closed_form_single_sample(dist, m, x), true);
  report.target = MomentTarget::SingleSampleExpectation;
  report.seed = seed;
  report.label = "E[RR^T xx^T RR^T] [" + describe(dist, m, p) + "]";
  return report;
}

MomentCheckReport theorem1_check(const DistributionSpec& dist, std::size_t m, const Eigen::MatrixXd& data,
                                 std::size_t trials, std::uint64_t seed, unsigned jobs) {
  require_trials(trials, kMinEstimatorTrials, "theorem1_check");
  const auto p = static_cast<std::size_t>(data.rows());
  const auto d = data.rows();
  // Biased and unbiased estimates are stacked side by side: [C_hat | Sigma_hat].
  const MonteCarloMean mc =
      run_sharded(d, 2 * d, trials, seed, jobs, [&](std::uint64_t shard_seed, std::size_t t, RunningMoments& acc) {
        const ProjectionSpec spec(dist, p, m, stream_seed(shard_seed, t));
        const CovEstimate biased = estimate(sketch_dataset(spec, data), EstimateKind::Biased);
        Eigen::MatrixXd both(d, 2 * d);
        both << biased.matrix, debias(biased.matrix, biased.params.kappa, m);
        acc.add(both);
      });

  const Eigen::MatrixXd cn = (data * data.transpose()) / static_cast<double>(data.cols());
  MonteCarloMean biased_part{mc.mean.leftCols(d), mc.standard_error.leftCols(d), mc.trials};
  MomentCheckReport report =
      compare(biased_part, closed_form_biased_mean(cn, dist.moments().kappa, m), true);
  report.target = MomentTarget::FullEstimatorExpectation;
  report.seed = seed;
  std::ostringstream label;
  label << "E[C_hat_n] [" << describe(dist, m, p) << ", n=" << data.cols() << "]";
  report.label = label.str();

  const double cn_norm = spectral_norm(cn);
  report.biased_relative_error = spectral_norm(Eigen::MatrixXd(mc.mean.leftCols(d) - cn)) / cn_norm;
  report.unbiased_relative_error = spectral_norm(Eigen::MatrixXd(mc.mean.rightCols(d) - cn)) / cn_norm;
  return report;
}

Eigen::MatrixXd fixed_dataset(std::size_t p, std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = rng.normal();
  return x;
}

std::vector<MomentCheckReport> default_grid(std::uint64_t seed, std::size_t trials, unsigned jobs) {
  require_trials(trials, kMinMomentTrials, "verification grid");
  const std::vector<DistributionSpec> dists = {
      DistributionSpec::gaussian(),       DistributionSpec::sparse_sign(1.0),
      DistributionSpec::sparse_sign(2.0), DistributionSpec::sparse_sign(3.0),
      DistributionSpec::sparse_sign(5.0)};
  constexpr std::size_t p = 3;
  constexpr std::size_t m = 2;

  std::vector<MomentCheckReport> reports;
  std::uint64_t check = 0;
  for (const auto& dist : dists) {
    reports.push_back(check_moment_matrix(dist, m, p, 1, 1, trials, stream_seed(seed, check++), jobs));
    reports.push_back(check_moment_matrix(dist, m, p, 0, 2, trials, stream_seed(seed, check++), jobs));
  }
  const Eigen::VectorXd x = fixed_dataset(6, 1, stream_seed(seed, check++));
  reports.push_back(single_sample_expectation_check(DistributionSpec::sparse_sign(5.0), 3, x, trials,
                                                    stream_seed(seed, check++), jobs));
  const Eigen::MatrixXd data = fixed_dataset(8, 4, stream_seed(seed, check++));
  reports.push_back(theorem1_check(DistributionSpec::sparse_sign(4.0), 3, data,
                                   std::max<std::size_t>(trials / 5, kMinEstimatorTrials),
                                   stream_seed(seed, check++), jobs));
  return reports;
}

}  // namespace ccov::oracle
