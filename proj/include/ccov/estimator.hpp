#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "ccov/projection.hpp"
#include "ccov/sketch.hpp"

namespace ccov {

enum class EstimateKind { Biased, Unbiased };

std::string to_string(EstimateKind kind);

/// Which rank-1 update kernel `CovAccumulator::add` uses. Auto picks Sparse
/// when nnz(z) <= p/2.
enum class UpdatePath { Auto, Sparse, Dense };

/// Mergeable running sum of back-projected outer products, sum_i z_i z_i^T.
///
/// Only the upper triangle is written; `sum()` mirrors it. The sum is kept
/// unscaled, so merging shards is a plain matrix addition.
struct CovEstimate;

class CovAccumulator {
 public:
  explicit CovAccumulator(ProjectionSpec spec);

  /// sum += z z^T over the nonzero index pairs of z; count += 1.
  void add(const ProjectedSample& z, UpdatePath path = UpdatePath::Auto);

  /// Requires an identical ProjectionSpec.
  void merge(const CovAccumulator& other);

  std::size_t count() const noexcept { return count_; }
  std::size_t dim() const noexcept { return spec_.p; }
  const ProjectionSpec& spec() const noexcept { return spec_; }

  /// Full symmetric sum.
  Eigen::MatrixXd sum() const;
  /// Running sum; only the upper triangle is maintained.
  const Eigen::MatrixXd& upper() const noexcept { return upper_; }

 private:
  friend CovEstimate finalize_biased(CovAccumulator&& acc);
  ProjectionSpec spec_;
  Eigen::MatrixXd upper_;
  std::size_t count_ = 0;
};

struct BiasCoefficients {
  double alpha1;  // weight on diag(C_hat)
  double alpha2;  // weight on tr(C_hat) I
};

/// Provenance recorded with every estimate.
struct EstimateParams {
  std::size_t p = 0;
  std::size_t m = 0;
  DistributionSpec dist = DistributionSpec::gaussian();
  double kappa = 0.0;
  std::size_t n = 0;
  std::optional<double> gamma;
  std::optional<BiasCoefficients> coefficients;  // set once debiased
};

struct CovEstimate {
  Eigen::MatrixXd matrix;
  EstimateKind kind = EstimateKind::Biased;
  EstimateParams params;
  double wall_time_seconds = 0.0;
};

/// C_hat = sum / (n (m^2 + m) mu2^2). Throws std::invalid_argument when empty.
CovEstimate finalize_biased(const CovAccumulator& acc);
/// Same result; reuses the accumulator's storage and leaves it empty.
CovEstimate finalize_biased(CovAccumulator&& acc);

/// alpha1 = (k/(m+1)) / (1 + k/(m+1)),
/// alpha2 = 1 / ((1 + k/(m+1)) (m + 1 + k + p)).
/// Throws SingularCoefficientError when a denominator vanishes.
BiasCoefficients bias_coefficients(double kappa, std::size_t m, std::size_t p);

/// M - alpha1 diag(M) - alpha2 tr(M) I.
Eigen::MatrixXd debias(const Eigen::MatrixXd& biased, double kappa, std::size_t m);

/// Unbiased estimate from a Biased one, using the kappa and m it recorded.
CovEstimate debias(const CovEstimate& biased);

/// Accumulate samples [begin, end) of a sketch set, regenerating each R_i.
CovAccumulator accumulate_range(const SketchSet& sketches, std::size_t begin, std::size_t end);

/// Full pipeline: regenerate, backproject, accumulate, finalize and, for
/// Unbiased, debias. Samples are sharded over `jobs` accumulators and merged.
CovEstimate estimate(const SketchSet& sketches, EstimateKind kind, unsigned jobs = 1);

/// Exact C_n = (1/n) X X^T for a p x n data matrix.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& data);

}  // namespace ccov
