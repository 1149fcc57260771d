#include "ccov/estimator.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

namespace ccov {

std::string to_string(EstimateKind kind) {
  return kind == EstimateKind::Biased ? "Biased" : "Unbiased";
}

CovAccumulator::CovAccumulator(ProjectionSpec spec)
    : spec_(std::move(spec)),
      upper_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spec_.p),
                                   static_cast<Eigen::Index>(spec_.p))) {}

void CovAccumulator::add(const ProjectedSample& z, UpdatePath path) {
  if (z.dim != spec_.p) {
    std::ostringstream msg;
    msg << "accumulate: projected sample has dimension " << z.dim << ", accumulator has " << spec_.p;
    throw DimensionError(msg.str());
  }
  if (path == UpdatePath::Auto)
    path = 2 * z.nnz() <= spec_.p ? UpdatePath::Sparse : UpdatePath::Dense;

  if (path == UpdatePath::Sparse) {
    const std::size_t k = z.nnz();
    double* data = upper_.data();
    const std::size_t p = spec_.p;
    for (std::size_t b = 0; b < k; ++b) {
      double* column = data + static_cast<std::size_t>(z.index[b]) * p;
      const double zb = z.value[b];
      for (std::size_t a = 0; a <= b; ++a) column[z.index[a]] += z.value[a] * zb;
    }
  } else {
    upper_.selfadjointView<Eigen::Upper>().rankUpdate(z.to_dense());
  }
  ++count_;
}

void CovAccumulator::merge(const CovAccumulator& other) {
  if (!(other.spec_ == spec_))
    throw std::invalid_argument("merge: accumulators were built under different projection specs");
  upper_.triangularView<Eigen::Upper>() += other.upper_;
  count_ += other.count_;
}

Eigen::MatrixXd CovAccumulator::sum() const {
  return upper_.selfadjointView<Eigen::Upper>();
}

namespace {

// Divides the upper triangle by `d` and mirrors it into the lower one. Tiled
// so the transposed writes stay in cache for large p.
void mirror_divide(Eigen::MatrixXd& a, double d) {
  const Eigen::Index p = a.rows();
  constexpr Eigen::Index kTile = 64;
  for (Eigen::Index jb = 0; jb < p; jb += kTile) {
    const Eigen::Index jend = std::min(p, jb + kTile);
    for (Eigen::Index ib = 0; ib <= jb; ib += kTile) {
      for (Eigen::Index j = jb; j < jend; ++j) {
        const Eigen::Index iend = std::min(ib + kTile, j + 1);
        for (Eigen::Index i = ib; i < iend; ++i) a(j, i) = a(i, j) = a(i, j) / d;
      }
    }
  }
}

void correct_in_place(Eigen::MatrixXd& c, const BiasCoefficients& k) {
  const double trace_shift = k.alpha2 * c.trace();
  c.diagonal() -= k.alpha1 * c.diagonal();
  c.diagonal().array() -= trace_shift;
}

void debias_in_place(CovEstimate& est) {
  if (est.kind != EstimateKind::Biased) throw std::invalid_argument("debias: estimate is already unbiased");
  const BiasCoefficients k = bias_coefficients(est.params.kappa, est.params.m, est.params.p);
  correct_in_place(est.matrix, k);
  est.params.coefficients = k;
  est.kind = EstimateKind::Unbiased;
}

}  // namespace

namespace {

CovEstimate biased_shell(const CovAccumulator& acc, double& scale) {
  if (acc.count() == 0) throw std::invalid_argument("finalize: accumulator holds no samples");
  const ProjectionSpec& spec = acc.spec();
  const Moments mom = spec.dist.moments();
  const double m = static_cast<double>(spec.m);
  scale = static_cast<double>(acc.count()) * (m * m + m) * mom.mu2 * mom.mu2;

  CovEstimate est;
  est.kind = EstimateKind::Biased;
  est.params.p = spec.p;
  est.params.m = spec.m;
  est.params.dist = spec.dist;
  est.params.kappa = mom.kappa;
  est.params.n = acc.count();
  est.params.gamma = spec.gamma();
  return est;
}

}  // namespace

CovEstimate finalize_biased(const CovAccumulator& acc) {
  double scale = 0;
  CovEstimate est = biased_shell(acc, scale);
  est.matrix = acc.upper();
  mirror_divide(est.matrix, scale);
  return est;
}

CovEstimate finalize_biased(CovAccumulator&& acc) {
  double scale = 0;
  CovEstimate est = biased_shell(acc, scale);
  est.matrix = std::move(acc.upper_);
  acc.count_ = 0;
  mirror_divide(est.matrix, scale);
  return est;
}

BiasCoefficients bias_coefficients(double kappa, std::size_t m, std::size_t p) {
  const double mp1 = static_cast<double>(m) + 1.0;
  const double shrink = 1.0 + kappa / mp1;
  const double spread = mp1 + kappa + static_cast<double>(p);
  if (std::abs(shrink) < 1e-12) {
    std::ostringstream msg;
    msg << "bias coefficients are singular: 1 + kappa/(m+1) = 0 for kappa=" << kappa << ", m=" << m;
    if (m == 1 && kappa == -2.0) msg << " (sparse sign with s = 1 cannot be used with m = 1)";
    throw SingularCoefficientError(msg.str());
  }
  if (std::abs(spread) < 1e-12) {
    std::ostringstream msg;
    msg << "bias coefficients are singular: m + 1 + kappa + p = 0 for kappa=" << kappa
        << ", m=" << m << ", p=" << p;
    throw SingularCoefficientError(msg.str());
  }
  return {(kappa / mp1) / shrink, 1.0 / (shrink * spread)};
}

Eigen::MatrixXd debias(const Eigen::MatrixXd& biased, double kappa, std::size_t m) {
  if (biased.rows() != biased.cols()) throw DimensionError("debias: matrix is not square");
  Eigen::MatrixXd out = biased;
  correct_in_place(out, bias_coefficients(kappa, m, static_cast<std::size_t>(biased.rows())));
  return out;
}

CovEstimate debias(const CovEstimate& biased) {
  CovEstimate out = biased;
  debias_in_place(out);
  return out;
}

CovAccumulator accumulate_range(const SketchSet& sketches, std::size_t begin, std::size_t end) {
  const ProjectionSpec& spec = sketches.spec;
  CovAccumulator acc(spec);
  if (spec.dist.family() == Family::SparseSign) {
    BackprojectWorkspace work(spec.p);
    for (std::size_t i = begin; i < end; ++i)
      acc.add(backproject(generate_sparse(spec, i), sketches.measurement(i), work));
  } else {
    for (std::size_t i = begin; i < end; ++i)
      acc.add(backproject(generate_dense(spec, i), sketches.measurement(i)));
  }
  return acc;
}

CovEstimate estimate(const SketchSet& sketches, EstimateKind kind, unsigned jobs) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = sketches.n();
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));

  std::vector<std::optional<CovAccumulator>> shards(jobs);
  if (jobs == 1) {
    shards[0] = accumulate_range(sketches, 0, n);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t)
      pool.emplace_back([&, t] { shards[t] = accumulate_range(sketches, n * t / jobs, n * (t + 1) / jobs); });
  }
  CovAccumulator& total = *shards[0];
  for (unsigned t = 1; t < jobs; ++t) total.merge(*shards[t]);

  CovEstimate est = finalize_biased(std::move(total));
  if (kind == EstimateKind::Unbiased) debias_in_place(est);
  est.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return est;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& data) {
  if (data.cols() < 1) throw std::invalid_argument("sample_covariance: empty dataset");
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(data.rows(), data.rows());
  c.selfadjointView<Eigen::Lower>().rankUpdate(data, 1.0 / static_cast<double>(data.cols()));
  return c.selfadjointView<Eigen::Lower>();
}

}  // namespace ccov
