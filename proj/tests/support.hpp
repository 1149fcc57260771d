#pragma once
// Test-only reference implementations. Nothing here calls into the library's
// numerical code, so agreement with it is a genuine cross-check.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace testing {

inline Eigen::MatrixXd random_symmetric(std::size_t p, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(p, p);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i <= j; ++i) a(i, j) = a(j, i) = nd(gen);
  return a;
}

inline Eigen::MatrixXd random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = nd(gen);
  return a;
}

// Cyclic Jacobi rotations; eigenvalues sorted by decreasing magnitude.
struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

inline EigenPairs jacobi(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < j; ++i) off += a(i, j) * a(i, j);
    if (off < 1e-30 * std::max(1.0, a.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return std::abs(a(x, x)) > std::abs(a(y, y)); });
  EigenPairs out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

inline double spectral_norm(const Eigen::MatrixXd& a) { return std::abs(jacobi(a).values[0]); }

// E[C_hat] as a function of the true covariance.
inline Eigen::MatrixXd forward_bias(const Eigen::MatrixXd& c, double kappa, double m) {
  Eigen::MatrixXd b = c;
  for (Eigen::Index i = 0; i < c.rows(); ++i) b(i, i) += kappa / (m + 1) * c(i, i) + c.trace() / (m + 1);
  return b;
}

// Correction written entry by entry from the coefficient formulas.
inline Eigen::MatrixXd debias_reference(const Eigen::MatrixXd& c, double kappa, double m) {
  const double p = static_cast<double>(c.rows());
  const double r = kappa / (m + 1);
  const double a1 = r / (1 + r);
  const double a2 = 1 / ((1 + r) * (m + 1 + kappa + p));
  Eigen::MatrixXd out = c;
  const double tr = c.trace();
  for (Eigen::Index i = 0; i < c.rows(); ++i) out(i, i) = c(i, i) - a1 * c(i, i) - a2 * tr;
  return out;
}

// Biased estimate from explicit dense projections: one p x m matrix per sample.
inline Eigen::MatrixXd dense_biased(const std::vector<Eigen::MatrixXd>& rs, const Eigen::MatrixXd& x, double mu2) {
  const Eigen::Index p = x.rows();
  const double m = static_cast<double>(rs.front().cols());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const Eigen::MatrixXd& r = rs[static_cast<std::size_t>(i)];
    const Eigen::VectorXd z = r * (r.transpose() * x.col(i));
    sum += z * z.transpose();
  }
  return sum / (static_cast<double>(x.cols()) * (m * m + m) * mu2 * mu2);
}

inline double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(max_abs(a), max_abs(b));
  return scale == 0.0 ? 0.0 : max_abs(a - b) / scale;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ccov-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
