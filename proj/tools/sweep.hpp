#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ccov/estimator.hpp"

namespace ccov::cli {

struct SweepConfig {
  std::optional<std::size_t> m;  // overrides m_ratio when set
  double m_ratio = 0.4;
  std::vector<double> gammas;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  std::vector<EstimateKind> kinds = {EstimateKind::Biased, EstimateKind::Unbiased};
  unsigned jobs = 1;
};

struct SweepCell {
  double gamma = 0.0;
  double s = 0.0;
  EstimateKind kind = EstimateKind::Unbiased;
  double mean_error = 0.0;
  double std_error = 0.0;  // sample standard deviation over trials
  double mean_seconds = 0.0;
  double mean_normalized_time = 0.0;  // mean_seconds / reference_seconds
  std::vector<double> errors;         // per trial, in trial order
  std::vector<std::uint64_t> seeds;   // master seed of each trial
  std::vector<std::string> failures;
};

struct SweepReport {
  std::size_t p = 0;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  double reference_stable_rank = 0.0;
  double reference_seconds = 0.0;
  std::string source;
  std::vector<SweepCell> cells;

  const SweepCell& cell(double gamma, EstimateKind kind) const;
};

/// m used for a p-dimensional dataset: explicit m, else round(m_ratio * p)
/// clamped to [1, p - 1].
std::size_t resolve_m(const SweepConfig& config, std::size_t p);

/// Master seed of trial `t` at gamma index `g`.
std::uint64_t trial_seed(std::uint64_t seed, std::size_t g, std::size_t t);

/// Exact C_n and the wall time its dense construction took (measured after
/// one warm-up run).
struct Reference {
  Eigen::MatrixXd covariance;
  double seconds = 0.0;
};

Reference build_reference(const Eigen::MatrixXd& data);

/// For every gamma and trial: fresh master seed, sketch, estimate each
/// requested kind, and score against the exact reference C_n. A failing
/// cell is recorded in the report and the sweep continues. `reference` may be
/// supplied (e.g. from a cache); otherwise it is built from `data`.
SweepReport run_sweep(const SweepConfig& config, const Eigen::MatrixXd& data,
                      const Reference* reference = nullptr, std::string source = {});

nlohmann::json to_json(const SweepReport& report);
std::string to_csv(const SweepReport& report);

}  // namespace ccov::cli
