#include "ccov/projection.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ccov/rng.hpp"

namespace ccov {

DistributionSpec DistributionSpec::sparse_sign(double s) {
  if (!(s >= 1.0) || !std::isfinite(s)) {
    std::ostringstream msg;
    msg << "sparse sign distribution requires finite s >= 1 (got " << s << ")";
    throw std::invalid_argument(msg.str());
  }
  return DistributionSpec(Family::SparseSign, s);
}

Moments DistributionSpec::moments() const noexcept {
  if (family_ == Family::Gaussian) return {1.0, 3.0, 0.0};
  const double mu = 1.0 / s_;
  // mu4 / mu2^2 - 3 = (1/s) / (1/s^2) - 3 = s - 3, stated exactly.
  return {mu, mu, s_ - 3.0};
}

std::string DistributionSpec::name() const {
  if (family_ == Family::Gaussian) return "gaussian";
  std::ostringstream out;
  out << "sparse_sign(s=" << s_ << ")";
  return out.str();
}

ProjectionSpec::ProjectionSpec(DistributionSpec dist_, std::size_t p_, std::size_t m_,
                               std::uint64_t master_seed_)
    : dist(dist_), p(p_), m(m_), master_seed(master_seed_) {
  if (m < 1 || m >= p) {
    std::ostringstream msg;
    msg << "projection requires 1 <= m < p (got m=" << m << ", p=" << p << ")";
    throw std::invalid_argument(msg.str());
  }
  if (p > std::numeric_limits<std::uint32_t>::max())
    throw std::invalid_argument("projection dimension p exceeds 2^32 - 1");
}

std::optional<double> ProjectionSpec::gamma() const {
  if (dist.family() != Family::SparseSign) return std::nullopt;
  return static_cast<double>(m) / dist.sparsity();
}

std::vector<std::string> ProjectionSpec::warnings() const {
  std::vector<std::string> out;
  if (auto g = gamma(); g && *g >= 1.0) {
    std::ostringstream msg;
    msg << "compression factor gamma = m/s = " << *g
        << " >= 1; the estimate is still valid but sparse projection saves no work";
    out.push_back(msg.str());
  }
  return out;
}

Eigen::MatrixXd SparseProjection::to_dense() const {
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(rows, cols);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t k = col_start[j]; k < col_start[j + 1]; ++k)
      dense(row_index[k], j) = sign[k];
  return dense;
}

void SparseProjection::check() const {
  if (col_start.size() != cols + 1 || col_start.front() != 0 || col_start.back() != nnz() ||
      sign.size() != nnz())
    throw std::invalid_argument("sparse projection: inconsistent column offsets");
  for (std::size_t j = 0; j < cols; ++j) {
    if (col_start[j] > col_start[j + 1])
      throw std::invalid_argument("sparse projection: decreasing column offsets");
    for (std::size_t k = col_start[j]; k < col_start[j + 1]; ++k) {
      if (row_index[k] >= rows)
        throw std::invalid_argument("sparse projection: row index out of range");
      if (k > col_start[j] && row_index[k] <= row_index[k - 1])
        throw std::invalid_argument("sparse projection: row indices not strictly increasing");
      if (sign[k] != 1 && sign[k] != -1)
        throw std::invalid_argument("sparse projection: stored value is not +-1");
    }
  }
}

SparseProjection SparseProjection::from_columns(
    std::size_t rows, const std::vector<std::vector<std::pair<std::uint32_t, int>>>& columns) {
  SparseProjection r;
  r.rows = rows;
  r.cols = columns.size();
  r.col_start.reserve(r.cols + 1);
  r.col_start.push_back(0);
  for (const auto& col : columns) {
    for (auto [row, value] : col) {
      r.row_index.push_back(row);
      r.sign.push_back(static_cast<std::int8_t>(value));
    }
    r.col_start.push_back(r.row_index.size());
  }
  r.check();
  return r;
}

namespace {

// Walks the p*m entries in column-major order, jumping over runs of zeros
// with geometric gaps. The gap between nonzeros of an i.i.d. Bernoulli(1/s)
// sequence is Geometric(1/s), so this draws exactly the same distribution as
// testing each entry, at O(nnz) cost.
SparseProjection draw_sparse_sign(const ProjectionSpec& spec, std::uint64_t index) {
  const std::size_t p = spec.p;
  const std::size_t m = spec.m;
  const std::size_t total = p * m;
  const double s = spec.dist.sparsity();

  RandomStream rng(spec.master_seed, index);
  SparseProjection r;
  r.rows = p;
  r.cols = m;
  r.col_start.assign(m + 1, 0);
  const auto expected = static_cast<std::size_t>(static_cast<double>(total) / s * 1.1) + 8;
  r.row_index.reserve(expected);
  r.sign.reserve(expected);

  const double log_keep = std::log1p(-1.0 / s);  // log P(entry == 0); -inf when s == 1
  std::size_t pos = 0;
  while (true) {
    if (s > 1.0) {
      const double gap = std::floor(std::log(rng.uniform_open0()) / log_keep);
      if (gap >= static_cast<double>(total - pos)) break;
      pos += static_cast<std::size_t>(gap);
    }
    if (pos >= total) break;
    const std::size_t col = pos / p;
    r.row_index.push_back(static_cast<std::uint32_t>(pos - col * p));
    r.sign.push_back(rng.coin() ? 1 : -1);
    ++r.col_start[col + 1];
    ++pos;
  }
  for (std::size_t j = 0; j < m; ++j) r.col_start[j + 1] += r.col_start[j];
  return r;
}

Eigen::MatrixXd draw_gaussian(const ProjectionSpec& spec, std::uint64_t index) {
  RandomStream rng(spec.master_seed, index);
  Eigen::MatrixXd r(spec.p, spec.m);
  double* data = r.data();
  for (Eigen::Index k = 0; k < r.size(); ++k) data[k] = rng.normal();
  return r;
}

void check_index(std::uint64_t index) {
  if (index >> 63) throw std::invalid_argument("sample index must be < 2^63");
}

}  // namespace

Projection generate(const ProjectionSpec& spec, std::uint64_t sample_index) {
  check_index(sample_index);
  if (spec.dist.family() == Family::Gaussian) return draw_gaussian(spec, sample_index);
  return draw_sparse_sign(spec, sample_index);
}

SparseProjection generate_sparse(const ProjectionSpec& spec, std::uint64_t sample_index) {
  check_index(sample_index);
  if (spec.dist.family() != Family::SparseSign)
    throw std::invalid_argument("generate_sparse: distribution is not sparse sign");
  return draw_sparse_sign(spec, sample_index);
}

Eigen::MatrixXd generate_dense(const ProjectionSpec& spec, std::uint64_t sample_index) {
  return std::visit(
      [](auto&& r) -> Eigen::MatrixXd {
        if constexpr (std::is_same_v<std::decay_t<decltype(r)>, SparseProjection>)
          return r.to_dense();
        else
          return std::move(r);
      },
      generate(spec, sample_index));
}

double empirical_kurtosis(const ProjectionSpec& spec, std::size_t num_entries) {
  if (num_entries < 10000) throw std::invalid_argument("empirical_kurtosis needs >= 1e4 entries");
  // Raw power sums; the distributions are symmetric with bounded or Gaussian
  // tails, so the central moments below are well conditioned.
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  std::size_t remaining = num_entries;
  const std::size_t per_matrix = spec.p * spec.m;
  for (std::uint64_t index = 0; remaining > 0; ++index) {
    const std::size_t take = std::min(remaining, per_matrix);
    auto add = [&](double v) {
      const double v2 = v * v;
      s1 += v;
      s2 += v2;
      s3 += v2 * v;
      s4 += v2 * v2;
    };
    if (spec.dist.family() == Family::SparseSign) {
      const SparseProjection r = generate_sparse(spec, index);
      for (std::size_t j = 0; j < r.cols; ++j) {
        const auto rows = r.column_rows(j);
        const auto signs = r.column_signs(j);
        for (std::size_t k = 0; k < rows.size(); ++k)
          if (j * spec.p + rows[k] < take) add(signs[k]);
      }
    } else {
      const Eigen::MatrixXd r = generate_dense(spec, index);
      for (std::size_t k = 0; k < take; ++k) add(r.data()[k]);
    }
    remaining -= take;
  }
  const double n = static_cast<double>(num_entries);
  const double mean = s1 / n;
  const double m2 = s2 / n - mean * mean;
  const double m4 = s4 / n - 4 * mean * s3 / n + 6 * mean * mean * s2 / n - 3 * std::pow(mean, 4);
  return m4 / (m2 * m2) - 3.0;
}

}  // namespace ccov
