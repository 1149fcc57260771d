#include "ccov/serialize.hpp"

#include <stdexcept>

namespace ccov {
namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const ProjectionSpec& spec) {
  nlohmann::json j;
  if (spec.dist.family() == Family::SparseSign) {
    j["family"] = "sparse_sign";
    j["s"] = spec.dist.sparsity();
  } else {
    j["family"] = "gaussian";
    j["s"] = nullptr;
  }
  j["p"] = spec.p;
  j["m"] = spec.m;
  j["master_seed"] = spec.master_seed;
  return j;
}

ProjectionSpec projection_spec_from_json(const nlohmann::json& j) {
  try {
    const auto family = j.at("family").get<std::string>();
    DistributionSpec dist = DistributionSpec::gaussian();
    if (family == "sparse_sign")
      dist = DistributionSpec::sparse_sign(j.at("s").get<double>());
    else if (family != "gaussian")
      throw std::invalid_argument("unknown projection family '" + family + "'");
    return ProjectionSpec(dist, j.at("p").get<std::size_t>(), j.at("m").get<std::size_t>(),
                          j.at("master_seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("projection spec: ") + e.what());
  }
}

nlohmann::json to_json(const CovEstimate& estimate) {
  const EstimateParams& params = estimate.params;
  nlohmann::json p;
  p["p"] = params.p;
  p["m"] = params.m;
  p["family"] = params.dist.family() == Family::SparseSign ? "sparse_sign" : "gaussian";
  p["s"] = params.dist.family() == Family::SparseSign ? nlohmann::json(params.dist.sparsity())
                                                      : nlohmann::json(nullptr);
  p["kappa"] = params.kappa;
  p["n"] = params.n;
  p["gamma"] = optional_number(params.gamma);
  p["alpha1"] = params.coefficients ? nlohmann::json(params.coefficients->alpha1) : nlohmann::json(nullptr);
  p["alpha2"] = params.coefficients ? nlohmann::json(params.coefficients->alpha2) : nlohmann::json(nullptr);

  nlohmann::json j;
  j["version"] = 1;
  j["kind"] = to_string(estimate.kind);
  j["params"] = std::move(p);
  j["wall_time_seconds"] = estimate.wall_time_seconds;
  return j;
}

nlohmann::json to_json(const ErrorReport& report) {
  nlohmann::json j;
  j["version"] = 1;
  j["normalized_error"] = report.normalized_error;
  j["spectral_norm_target"] = report.spectral_norm_target;
  j["spectral_norm_diff"] = report.spectral_norm_diff;
  j["gamma"] = optional_number(report.gamma);
  j["kind"] = to_string(report.kind);
  return j;
}

nlohmann::json to_json(const SpectrumSummary& summary) {
  nlohmann::json j;
  j["version"] = 1;
  j["eigenvalues"] = std::vector<double>(summary.eigenvalues.data(),
                                         summary.eigenvalues.data() + summary.eigenvalues.size());
  nlohmann::json vectors = nlohmann::json::array();
  for (Eigen::Index k = 0; k < summary.eigenvectors.cols(); ++k) {
    const Eigen::VectorXd v = summary.eigenvectors.col(k);
    vectors.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  }
  j["eigenvectors"] = std::move(vectors);
  j["stable_rank"] = summary.stable_rank;
  return j;
}

nlohmann::json to_json(const oracle::MomentCheckReport& report) {
  nlohmann::json j;
  j["target"] = oracle::to_string(report.target);
  j["label"] = report.label;
  j["trials"] = report.trials;
  j["seed"] = report.seed;
  j["max_abs_deviation"] = report.max_abs_deviation;
  j["max_allowed"] = report.max_allowed;
  j["max_z"] = report.max_z;
  j["worst_entry"] = {report.worst_row, report.worst_col};
  j["entries_compared"] = report.entries_compared;
  j["entries_with_variance"] = report.entries_with_variance;
  j["false_failure_bound"] = report.false_failure_bound;
  j["passed"] = report.passed;
  if (report.biased_relative_error) j["biased_relative_error"] = *report.biased_relative_error;
  if (report.unbiased_relative_error) j["unbiased_relative_error"] = *report.unbiased_relative_error;
  return j;
}

}  // namespace ccov
