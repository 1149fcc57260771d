#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccov/projection.hpp"

namespace ccov::oracle {

// Brute-force and Monte Carlo checks of the expectation identities behind
// the unbiased estimator. The closed forms here are written out directly
// from the moment algebra and share no code with the estimator.

enum class MomentTarget { Ekk, Ekl, SingleSampleExpectation, FullEstimatorExpectation };

std::string to_string(MomentTarget target);

/// Entrywise Monte Carlo mean and standard error of the mean.
struct MonteCarloMean {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd standard_error;
  std::size_t trials = 0;
};

/// Outcome of comparing a Monte Carlo mean with its closed form.
///
/// Each entry passes when |mean - expected| <= 4 * standard_error + floor,
/// where floor = 1e-12 * (1 + |expected|) absorbs rounding on entries whose
/// sampled value never varies. `max_abs_deviation` and `max_allowed` are
/// reported at the entry with the largest deviation-to-band ratio, so
/// `passed == (max_abs_deviation <= max_allowed)`.
struct MomentCheckReport {
  MomentTarget target = MomentTarget::Ekk;
  std::string label;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  double max_abs_deviation = 0.0;
  double max_allowed = 0.0;
  double max_z = 0.0;  // largest |deviation| / standard_error over varying entries
  Eigen::Index worst_row = 0;
  Eigen::Index worst_col = 0;
  std::size_t entries_compared = 0;
  std::size_t entries_with_variance = 0;
  /// Bonferroni bound on a false failure: entries_with_variance * P(|Z| > 4).
  double false_failure_bound = 0.0;
  bool passed = false;

  // FullEstimatorExpectation only: ||mean - C_n||_2 / ||C_n||_2.
  std::optional<double> biased_relative_error;
  std::optional<double> unbiased_relative_error;
};

inline constexpr double kBandSigmas = 4.0;
inline constexpr std::size_t kMinMomentTrials = 10000;
inline constexpr std::size_t kMinEstimatorTrials = 1000;

/// E[c_k c_k^T] = m mu2^2 (kappa + m + 1) e_k e_k^T + m mu2^2 I,
/// c_k the k-th column of R R^T.
Eigen::MatrixXd closed_form_Ekk(const DistributionSpec& dist, std::size_t m, std::size_t p, std::size_t k);

/// E[c_k c_l^T] = m^2 mu2^2 e_k e_l^T + m mu2^2 e_l e_k^T for k != l.
/// Throws std::invalid_argument when k == l.
Eigen::MatrixXd closed_form_Ekl(const DistributionSpec& dist, std::size_t m, std::size_t p,
                                std::size_t k, std::size_t l);

/// E[R R^T x x^T R R^T] = (m^2+m) mu2^2 x x^T + kappa m mu2^2 diag(x x^T)
///                       + m mu2^2 ||x||^2 I.
Eigen::MatrixXd closed_form_single_sample(const DistributionSpec& dist, std::size_t m,
                                          const Eigen::VectorXd& x);

/// E[C_hat] = C + kappa/(m+1) diag(C) + tr(C)/(m+1) I.
Eigen::MatrixXd closed_form_biased_mean(const Eigen::MatrixXd& c, double kappa, std::size_t m);

/// Empirical mean of c_k c_l^T over `trials` fresh draws of R (k == l allowed).
MonteCarloMean monte_carlo_Ekl(const DistributionSpec& dist, std::size_t m, std::size_t p,
                               std::size_t k, std::size_t l, std::size_t trials, std::uint64_t seed,
                               unsigned jobs = 1);

/// Compare Monte Carlo against closed_form_Ekk / closed_form_Ekl.
MomentCheckReport check_moment_matrix(const DistributionSpec& dist, std::size_t m, std::size_t p,
                                      std::size_t k, std::size_t l, std::size_t trials,
                                      std::uint64_t seed, unsigned jobs = 1);

MomentCheckReport single_sample_expectation_check(const DistributionSpec& dist, std::size_t m,
                                                  const Eigen::VectorXd& x, std::size_t trials,
                                                  std::uint64_t seed, unsigned jobs = 1);

/// Monte Carlo over independent master seeds of the full biased estimator on
/// fixed data (p x n), compared with closed_form_biased_mean. Also records the
/// relative spectral error of the biased and unbiased means against C_n.
MomentCheckReport theorem1_check(const DistributionSpec& dist, std::size_t m,
                                 const Eigen::MatrixXd& data, std::size_t trials,
                                 std::uint64_t seed, unsigned jobs = 1);

/// Score a Monte Carlo mean against a closed form. Only the upper triangle is
/// counted when `symmetric` is set.
MomentCheckReport compare(const MonteCarloMean& mc, const Eigen::MatrixXd& expected, bool symmetric);

/// Seeded standard-normal p x n matrix used as the fixed verification dataset.
Eigen::MatrixXd fixed_dataset(std::size_t p, std::size_t n, std::uint64_t seed);

/// The default verification grid run by `ccov verify`.
std::vector<MomentCheckReport> default_grid(std::uint64_t seed, std::size_t trials, unsigned jobs = 1);

}  // namespace ccov::oracle
