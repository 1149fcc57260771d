#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ccov/errors.hpp"

namespace ccov {

/// n samples of dimension p, stored as the columns of a p x n matrix.
struct Dataset {
  Eigen::MatrixXd samples;
  std::string source;

  std::size_t p() const noexcept { return static_cast<std::size_t>(samples.rows()); }
  std::size_t n() const noexcept { return static_cast<std::size_t>(samples.cols()); }
};

enum class Orientation { ColumnsAreSamples, RowsAreSamples };

/// Columns are samples unless `orientation` says otherwise.
Dataset load_matrix_market(const std::filesystem::path& path,
                           Orientation orientation = Orientation::ColumnsAreSamples);

/// Rows are samples unless `orientation` says otherwise. Ragged rows and
/// non-numeric cells raise FormatError naming the 1-based row and column.
Dataset load_csv(const std::filesystem::path& path, Orientation orientation = Orientation::RowsAreSamples);
Dataset parse_csv(std::string_view text, Orientation orientation, std::string source = "<memory>");

/// Dispatch on extension (.mtx / .mm vs anything else as CSV), using each
/// format's default orientation unless one is given.
Dataset load_dataset(const std::filesystem::path& path, std::optional<Orientation> orientation = std::nullopt);

/// x_i = sum_j sqrt(spike_j) g_ij u_j + sigma w_i with seeded orthonormal u_j.
struct SpikedModel {
  std::size_t p = 0;
  std::vector<double> spikes;  // one strength per component; rank r = spikes.size()
  double sigma = 0.0;
};

/// Gaussian data whose population covariance has stable rank `beta`: one unit
/// eigenvalue and p - 1 equal eigenvalues t = sqrt((beta - 1) / (p - 1)),
/// rotated by a seeded orthonormal basis.
struct StableRankModel {
  std::size_t p = 0;
  double beta = 1.0;
};

struct SynthSpec {
  std::variant<SpikedModel, StableRankModel> model;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

Dataset generate_spiked(const SynthSpec& spec);
Dataset generate_stable_rank(const SynthSpec& spec);
Dataset generate_synthetic(const SynthSpec& spec);

/// Population covariance of the model behind `spec`.
Eigen::MatrixXd population_covariance(const SynthSpec& spec);

/// Eigenvalues of the two-level spectrum used for a stable-rank target.
Eigen::VectorXd stable_rank_spectrum(std::size_t p, double beta);

/// {"model":"spiked","p","spikes":[..],"sigma","n","seed"} or
/// {"model":"stable_rank","p","beta","n","seed"}.
nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

/// Write samples as a Matrix Market array with samples in columns.
void save_dataset(const std::filesystem::path& path, const Dataset& data);

}  // namespace ccov
