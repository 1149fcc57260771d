#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace ccov {

enum class Family { SparseSign, Gaussian };

struct Moments {
  double mu2;
  double mu4;
  double kappa;
};

/// Zero-mean entry distribution of a projection matrix.
///
/// SparseSign(s) puts mass 1/(2s) on each of -1 and +1 and 1 - 1/s on 0, so
/// mu2 = mu4 = 1/s and kappa = s - 3. Any real s >= 1 is accepted.
/// Gaussian is N(0, 1) with kappa = 0.
class DistributionSpec {
 public:
  static DistributionSpec sparse_sign(double s);
  static DistributionSpec gaussian() { return DistributionSpec(Family::Gaussian, 1.0); }

  Family family() const noexcept { return family_; }
  /// Sparsity parameter s; 1 for Gaussian (every entry nonzero).
  double sparsity() const noexcept { return s_; }
  /// Probability that an entry is nonzero.
  double density() const noexcept { return family_ == Family::Gaussian ? 1.0 : 1.0 / s_; }

  Moments moments() const noexcept;
  std::string name() const;

  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;

 private:
  DistributionSpec(Family family, double s) : family_(family), s_(s) {}

  Family family_;
  double s_;
};

/// Closed-form (mu2, mu4, kappa) of `dist`.
inline Moments moments(const DistributionSpec& dist) { return dist.moments(); }

/// Everything needed to regenerate R_i for any sample index i.
struct ProjectionSpec {
  DistributionSpec dist;
  std::size_t p;  // ambient dimension
  std::size_t m;  // measurement dimension
  std::uint64_t master_seed;

  /// Throws std::invalid_argument unless 1 <= m < p.
  ProjectionSpec(DistributionSpec dist, std::size_t p, std::size_t m, std::uint64_t master_seed);

  /// Compression factor m / s; only defined for SparseSign.
  std::optional<double> gamma() const;

  /// Non-fatal advisories (currently: gamma >= 1 forfeits the cost advantage).
  std::vector<std::string> warnings() const;

  friend bool operator==(const ProjectionSpec&, const ProjectionSpec&) = default;
};

/// A realized p x m sign matrix in compressed sparse column form. Values are
/// the unscaled signs; the 1/sqrt(s) scale lives in mu2 and never appears here.
struct SparseProjection {
  std::size_t rows = 0;  // p
  std::size_t cols = 0;  // m
  std::vector<std::size_t> col_start;  // cols + 1 offsets into row_index / sign
  std::vector<std::uint32_t> row_index;
  std::vector<std::int8_t> sign;

  std::size_t nnz() const noexcept { return row_index.size(); }

  std::span<const std::uint32_t> column_rows(std::size_t j) const {
    return {row_index.data() + col_start[j], col_start[j + 1] - col_start[j]};
  }
  std::span<const std::int8_t> column_signs(std::size_t j) const {
    return {sign.data() + col_start[j], col_start[j + 1] - col_start[j]};
  }

  Eigen::MatrixXd to_dense() const;

  /// Throws std::invalid_argument if the CSC structure is inconsistent
  /// (unsorted or out-of-range rows, bad offsets, values other than +-1).
  void check() const;

  /// Build from explicit per-column (row, sign) lists.
  static SparseProjection from_columns(
      std::size_t rows, const std::vector<std::vector<std::pair<std::uint32_t, int>>>& columns);
};

using Projection = std::variant<SparseProjection, Eigen::MatrixXd>;

/// R_i for `sample_index`; a pure function of (spec, sample_index).
/// SparseSign yields a SparseProjection, Gaussian a dense matrix.
Projection generate(const ProjectionSpec& spec, std::uint64_t sample_index);

/// SparseSign only; throws std::invalid_argument for Gaussian specs.
SparseProjection generate_sparse(const ProjectionSpec& spec, std::uint64_t sample_index);

/// Dense view of R_i for either family.
Eigen::MatrixXd generate_dense(const ProjectionSpec& spec, std::uint64_t sample_index);

/// Sample excess kurtosis of `num_entries` entries drawn from consecutive
/// projections (indices 0, 1, ...) of `spec`, zeros included.
double empirical_kurtosis(const ProjectionSpec& spec, std::size_t num_entries);

}  // namespace ccov
