#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

#include "ccov/estimator.hpp"

namespace ccov {

struct PowerOptions {
  /// Use the dense symmetric eigensolver when p <= dense_cutoff.
  std::size_t dense_cutoff = 64;
  std::size_t max_iterations = 5000;
  double tolerance = 1e-13;  // relative Rayleigh-quotient stagnation
  std::uint64_t seed = 0x5EED;
};

/// max |lambda(A)| for symmetric A. Power iteration on A^2 (so that +-lambda
/// pairs cannot stall it), falling back to a dense eigensolver for small p or
/// on non-convergence. Throws std::invalid_argument if A is not symmetric to
/// 1e-10 relative.
double spectral_norm(const Eigen::MatrixXd& a, const PowerOptions& opts = {});

double frobenius_norm(const Eigen::MatrixXd& a);

/// ||F||_F^2 / ||F||_2^2; throws std::invalid_argument for the zero matrix.
double stable_rank(const Eigen::MatrixXd& c, const PowerOptions& opts = {});

struct ErrorReport {
  double normalized_error = 0.0;
  double spectral_norm_target = 0.0;
  double spectral_norm_diff = 0.0;
  std::optional<double> gamma;
  EstimateKind kind = EstimateKind::Unbiased;
};

/// ||estimate - reference||_2 / ||reference||_2.
ErrorReport normalized_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& reference,
                             const PowerOptions& opts = {});
ErrorReport normalized_error(const CovEstimate& estimate, const Eigen::MatrixXd& reference,
                             const PowerOptions& opts = {});

struct SpectrumSummary {
  Eigen::VectorXd eigenvalues;   // leading k, descending by |lambda|
  Eigen::MatrixXd eigenvectors;  // p x k, unit columns
  double stable_rank = 0.0;
};

/// k leading eigenpairs by |lambda|. Each eigenvector's largest-magnitude
/// coordinate is made positive (first such coordinate on ties).
SpectrumSummary top_eigenvectors(const Eigen::MatrixXd& c, std::size_t k,
                                 const PowerOptions& opts = {});

/// Flip v so its largest-magnitude coordinate is positive.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v);

}  // namespace ccov
