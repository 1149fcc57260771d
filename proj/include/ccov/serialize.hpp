#pragma once

#include <json.hpp>

#include "ccov/estimator.hpp"
#include "ccov/metrics.hpp"
#include "ccov/oracle.hpp"
#include "ccov/projection.hpp"

namespace ccov {

/// {"family": "sparse_sign"|"gaussian", "s": real|null, "p", "m", "master_seed"}
nlohmann::json to_json(const ProjectionSpec& spec);

/// Inverse of to_json; throws std::invalid_argument on missing or bad fields.
ProjectionSpec projection_spec_from_json(const nlohmann::json& j);

/// Sidecar written next to an estimate's Matrix Market file.
nlohmann::json to_json(const CovEstimate& estimate);

nlohmann::json to_json(const ErrorReport& report);
nlohmann::json to_json(const SpectrumSummary& summary);
nlohmann::json to_json(const oracle::MomentCheckReport& report);

}  // namespace ccov
