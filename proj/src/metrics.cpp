#include "ccov/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ccov/rng.hpp"

namespace ccov {
namespace {

void require_symmetric(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw DimensionError("matrix is not square");
  const double scale = a.cwiseAbs().maxCoeff();
  const double skew = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (skew > 1e-10 * scale) {
    std::ostringstream msg;
    msg << "matrix is not symmetric (max |A - A^T| = " << skew << ", max |A| = " << scale << ")";
    throw std::invalid_argument(msg.str());
  }
}

// Normalized all-ones vector plus a seeded unit-norm perturbation.
Eigen::VectorXd start_vector(Eigen::Index p, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  Eigen::VectorXd u(p);
  for (Eigen::Index i = 0; i < p; ++i) u[i] = rng.normal();
  Eigen::VectorXd v = Eigen::VectorXd::Constant(p, 1.0 / std::sqrt(static_cast<double>(p))) + u.normalized();
  return v.normalized();
}

// Eigenpairs sorted by descending |lambda|; stable so equal magnitudes keep
// the solver's ascending order.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> dense_eigenpairs(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  const Eigen::VectorXd& values = solver.eigenvalues();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return std::abs(values[x]) > std::abs(values[y]);
  });
  Eigen::VectorXd sorted_values(values.size());
  Eigen::MatrixXd sorted_vectors(a.rows(), a.cols());
  for (std::size_t k = 0; k < order.size(); ++k) {
    sorted_values[static_cast<Eigen::Index>(k)] = values[order[k]];
    sorted_vectors.col(static_cast<Eigen::Index>(k)) = solver.eigenvectors().col(order[k]);
  }
  return {sorted_values, sorted_vectors};
}

double dense_spectral_norm(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

double spectral_norm(const Eigen::MatrixXd& a, const PowerOptions& opts) {
  require_symmetric(a);
  if (a.size() == 0) return 0.0;
  if (static_cast<std::size_t>(a.rows()) <= opts.dense_cutoff) return dense_spectral_norm(a);

  Eigen::VectorXd v = start_vector(a.rows(), opts.seed);
  double previous = 0.0;
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    const Eigen::VectorXd av = a * v;
    const double estimate = av.norm() / v.norm();  // sqrt of the Rayleigh quotient of A^2
    if (estimate == 0.0) return 0.0;
    if (it > 0 && std::abs(estimate - previous) <= opts.tolerance * estimate) return estimate;
    previous = estimate;
    v = a * av;
    const double norm = v.norm();
    if (norm == 0.0) return estimate;
    v /= norm;
  }
  return dense_spectral_norm(a);
}

double frobenius_norm(const Eigen::MatrixXd& a) { return a.norm(); }

double stable_rank(const Eigen::MatrixXd& c, const PowerOptions& opts) {
  const double spec = spectral_norm(c, opts);
  if (spec == 0.0) throw std::invalid_argument("stable_rank: zero matrix");
  return c.squaredNorm() / (spec * spec);
}

ErrorReport normalized_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& reference,
                             const PowerOptions& opts) {
  if (estimate.rows() != reference.rows() || estimate.cols() != reference.cols())
    throw DimensionError("normalized_error: estimate and reference differ in shape");
  ErrorReport report;
  report.spectral_norm_target = spectral_norm(reference, opts);
  if (report.spectral_norm_target == 0.0)
    throw std::invalid_argument("normalized_error: reference matrix is zero");
  report.spectral_norm_diff = spectral_norm(estimate - reference, opts);
  report.normalized_error = report.spectral_norm_diff / report.spectral_norm_target;
  return report;
}

ErrorReport normalized_error(const CovEstimate& estimate, const Eigen::MatrixXd& reference,
                             const PowerOptions& opts) {
  ErrorReport report = normalized_error(estimate.matrix, reference, opts);
  report.gamma = estimate.params.gamma;
  report.kind = estimate.kind;
  return report;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  if (v.size() == 0) return;
  Eigen::Index at = 0;
  v.cwiseAbs().maxCoeff(&at);
  if (v[at] < 0) v = -v;
}

SpectrumSummary top_eigenvectors(const Eigen::MatrixXd& c, std::size_t k, const PowerOptions& opts) {
  require_symmetric(c);
  const auto p = static_cast<std::size_t>(c.rows());
  if (k < 1 || k > p) {
    std::ostringstream msg;
    msg << "top_eigenvectors: k must satisfy 1 <= k <= p (k=" << k << ", p=" << p << ")";
    throw std::invalid_argument(msg.str());
  }

  SpectrumSummary out;
  out.eigenvalues.resize(static_cast<Eigen::Index>(k));
  out.eigenvectors.resize(c.rows(), static_cast<Eigen::Index>(k));

  auto use_dense = [&] {
    auto [values, vectors] = dense_eigenpairs(c);
    out.eigenvalues = values.head(static_cast<Eigen::Index>(k));
    out.eigenvectors = vectors.leftCols(static_cast<Eigen::Index>(k));
  };

  if (p <= opts.dense_cutoff) {
    use_dense();
  } else {
    // Deflated power iteration: each new vector is kept orthogonal to the
    // ones already found.
    const double scale = std::max(c.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    bool converged_all = true;
    for (std::size_t j = 0; j < k && converged_all; ++j) {
      const auto found = static_cast<Eigen::Index>(j);
      auto deflate = [&](Eigen::VectorXd& v) {
        for (int pass = 0; pass < 2; ++pass)
          v -= out.eigenvectors.leftCols(found) * (out.eigenvectors.leftCols(found).transpose() * v);
      };
      Eigen::VectorXd v = start_vector(c.rows(), splitmix64(opts.seed + j));
      deflate(v);
      v.normalize();
      bool converged = false;
      double lambda = 0.0;
      for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        Eigen::VectorXd w = c * v;
        lambda = v.dot(w);
        const double residual = (w - lambda * v).norm();
        if (residual <= 1e-11 * std::max(std::abs(lambda), scale)) {
          converged = true;
          break;
        }
        deflate(w);
        const double norm = w.norm();
        if (norm == 0.0) {
          converged = true;  // v lies in the null space of the deflated operator
          break;
        }
        v = w / norm;
      }
      if (!converged) {
        converged_all = false;
        break;
      }
      out.eigenvalues[found] = lambda;
      out.eigenvectors.col(found) = v;
    }
    if (!converged_all) use_dense();
  }

  for (Eigen::Index j = 0; j < out.eigenvectors.cols(); ++j) fix_sign(out.eigenvectors.col(j));
  const double spec = std::abs(out.eigenvalues[0]);
  const double fro = c.norm();
  out.stable_rank = spec > 0.0 ? (fro * fro) / (spec * spec) : 0.0;
  return out;
}

}  // namespace ccov
