#include <doctest.h>

#include "ccov/oracle.hpp"
#include "ccov/serialize.hpp"
#include "support.hpp"

using namespace ccov;
using namespace ccov::oracle;

namespace {

// Entrywise transcription of the moment identities, written independently of
// the library's closed forms.
double ekl_entry(double mu2, double kappa, double m, std::size_t k, std::size_t l, std::size_t i, std::size_t j) {
  double v = 0.0;
  if (k == l) {
    if (i == j) v += m * mu2 * mu2;
    if (i == k && j == k) v += m * mu2 * mu2 * (kappa + m + 1);
  } else {
    if (i == k && j == l) v += m * m * mu2 * mu2;
    if (i == l && j == k) v += m * mu2 * mu2;
  }
  return v;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("closed forms on hand-evaluated cases") {
  Eigen::Matrix2d a;
  a << 3, 0, 0, 1;
  CHECK(closed_form_Ekk(DistributionSpec::gaussian(), 1, 2, 0) == a);

  const Eigen::MatrixXd b = closed_form_Ekk(DistributionSpec::sparse_sign(3), 2, 2, 1);
  CHECK(b(0, 0) == doctest::Approx(2.0 / 9).epsilon(1e-15));
  CHECK(b(1, 1) == doctest::Approx(8.0 / 9).epsilon(1e-15));
  CHECK(b(0, 1) == 0.0);
  CHECK(b(1, 0) == 0.0);

  const Eigen::MatrixXd c = closed_form_Ekl(DistributionSpec::gaussian(), 2, 3, 0, 1);
  CHECK(c(0, 1) == 4.0);
  CHECK(c(1, 0) == 2.0);
  CHECK((c.array() != 0).count() == 2);

  const Eigen::MatrixXd d = closed_form_Ekl(DistributionSpec::sparse_sign(2), 3, 3, 2, 0);
  CHECK(d(2, 0) == doctest::Approx(9.0 / 4).epsilon(1e-15));
  CHECK(d(0, 2) == doctest::Approx(3.0 / 4).epsilon(1e-15));
  CHECK((d.array() != 0).count() == 2);

  CHECK_THROWS(closed_form_Ekl(DistributionSpec::gaussian(), 2, 3, 1, 1));
  CHECK_THROWS(closed_form_Ekk(DistributionSpec::gaussian(), 2, 3, 3));
}

TEST_CASE("closed forms match an entrywise transcription") {
  for (auto dist : {DistributionSpec::gaussian(), DistributionSpec::sparse_sign(1), DistributionSpec::sparse_sign(2),
                    DistributionSpec::sparse_sign(7.5)}) {
    const double mu2 = dist.family() == Family::Gaussian ? 1.0 : 1.0 / dist.sparsity();
    const double kappa = dist.family() == Family::Gaussian ? 0.0 : dist.sparsity() - 3;
    for (std::size_t m : {1, 3}) {
      const std::size_t p = 5;
      for (std::size_t k = 0; k < p; ++k) {
        for (std::size_t l = 0; l < p; ++l) {
          const Eigen::MatrixXd e = k == l ? closed_form_Ekk(dist, m, p, k) : closed_form_Ekl(dist, m, p, k, l);
          if (k != l) CHECK((e.array() != 0).count() == 2);
          else CHECK((e - e.diagonal().asDiagonal().toDenseMatrix()).isZero(0));
          for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j)
              CHECK(e(i, j) == doctest::Approx(ekl_entry(mu2, kappa, static_cast<double>(m), k, l, i, j))
                                   .epsilon(1e-14));
        }
      }
    }
  }
}

TEST_CASE("single-sample closed form") {
  Eigen::Vector2d e0(1, 0);
  Eigen::Matrix2d expected;
  expected << 3, 0, 0, 1;
  CHECK(closed_form_single_sample(DistributionSpec::gaussian(), 1, e0) == expected);

  std::mt19937_64 gen(1);
  const Eigen::VectorXd x = testing::random_matrix(6, 1, gen);
  const auto dist = DistributionSpec::sparse_sign(5);
  CHECK((closed_form_single_sample(dist, 3, x) - closed_form_single_sample(dist, 3, -x)).isZero(0));

  // Linear combination of the moment matrices: sum_kl x_k x_l E_kl.
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(6, 6);
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t l = 0; l < 6; ++l)
      sum += x[static_cast<Eigen::Index>(k)] * x[static_cast<Eigen::Index>(l)] *
             (k == l ? closed_form_Ekk(dist, 3, 6, k) : closed_form_Ekl(dist, 3, 6, k, l));
  CHECK(testing::rel_diff(sum, closed_form_single_sample(dist, 3, x)) <= 1e-13);

  // With n = 1 the estimator mean is the single-sample form divided by (m^2 + m) mu2^2.
  const double scale = (9.0 + 3.0) / 25.0;
  CHECK(testing::rel_diff(closed_form_biased_mean(x * x.transpose(), 2.0, 3),
                          closed_form_single_sample(dist, 3, x) / scale) <= 1e-13);
}

TEST_CASE("Monte Carlo moment matrices") {
  const auto g = check_moment_matrix(DistributionSpec::gaussian(), 2, 4, 0, 2, 100000, 5);
  CHECK(g.passed);
  CHECK(g.trials == 100000);
  CHECK(g.entries_compared == 16);

  const auto kk = check_moment_matrix(DistributionSpec::gaussian(), 2, 4, 1, 1, 100000, 6);
  CHECK(kk.passed);
  CHECK(kk.entries_compared == 10);

  const MonteCarloMean mc = monte_carlo_Ekl(DistributionSpec::sparse_sign(2), 2, 3, 1, 1, 20000, 7);
  CHECK(compare(mc, closed_form_Ekk(DistributionSpec::sparse_sign(2), 2, 3, 1), true).passed);

  // Deterministic in the seed, independent of the worker count.
  const auto a = monte_carlo_Ekl(DistributionSpec::sparse_sign(3), 2, 3, 0, 1, 10000, 9, 1);
  const auto b = monte_carlo_Ekl(DistributionSpec::sparse_sign(3), 2, 3, 0, 1, 10000, 9, 3);
  CHECK((a.mean.array() == b.mean.array()).all());
  CHECK((a.standard_error.array() == b.standard_error.array()).all());
  const auto c = monte_carlo_Ekl(DistributionSpec::sparse_sign(3), 2, 3, 0, 1, 10000, 10, 1);
  CHECK((a.mean.array() != c.mean.array()).any());

  CHECK_THROWS(check_moment_matrix(DistributionSpec::gaussian(), 2, 4, 0, 2, 500, 5));
}

TEST_CASE("Monte Carlo single-sample expectation") {
  const auto r1 = single_sample_expectation_check(DistributionSpec::gaussian(), 1, Eigen::Vector2d(1, 0), 100000, 3);
  CHECK(r1.passed);
  std::mt19937_64 gen(2);
  const auto r2 =
      single_sample_expectation_check(DistributionSpec::sparse_sign(5), 3, testing::random_matrix(6, 1, gen), 100000, 4);
  CHECK(r2.passed);
  CHECK(r2.target == MomentTarget::SingleSampleExpectation);
}

TEST_CASE("compare flags deviations outside the band") {
  MonteCarloMean mc{Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Constant(2, 2, 0.1), 1000};
  Eigen::Matrix2d expected = Eigen::Matrix2d::Zero();
  expected(1, 0) = 0.39;
  auto ok = compare(mc, expected, false);
  CHECK(ok.passed);
  CHECK(ok.worst_row == 1);
  CHECK(ok.worst_col == 0);
  CHECK(ok.max_z == doctest::Approx(3.9));
  expected(1, 0) = 0.41;
  auto bad = compare(mc, expected, false);
  CHECK_FALSE(bad.passed);
  CHECK(bad.max_abs_deviation == doctest::Approx(0.41));
  // The lower triangle is ignored in symmetric mode.
  CHECK(compare(mc, expected, true).passed);
  CHECK(compare(mc, expected, true).entries_compared == 3);
  CHECK(bad.false_failure_bound == doctest::Approx(4 * std::erfc(4 / std::sqrt(2.0))));

  // Entries with zero variance must match to rounding.
  MonteCarloMean exact{Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1), 10};
  CHECK(compare(exact, Eigen::MatrixXd::Ones(1, 1), false).passed);
  CHECK_FALSE(compare(exact, Eigen::MatrixXd::Constant(1, 1, 1.001), false).passed);
}

TEST_CASE("estimator expectation on a fixed dataset") {
  const Eigen::MatrixXd data = fixed_dataset(8, 4, 123);
  const auto r = theorem1_check(DistributionSpec::sparse_sign(4), 3, data, 20000, 11);
  CHECK(r.passed);
  REQUIRE(r.biased_relative_error);
  REQUIRE(r.unbiased_relative_error);
  CHECK(*r.unbiased_relative_error <= *r.biased_relative_error);
  CHECK(*r.unbiased_relative_error <= 0.05);
  CHECK_THROWS(theorem1_check(DistributionSpec::sparse_sign(4), 3, data, 10, 11));
  const auto j = to_json(r);
  CHECK(j["seed"] == 11);
  CHECK(j["passed"] == true);
}

TEST_CASE("default grid") {
  const auto reports = default_grid(1, kMinMomentTrials);
  double bound = 0;
  for (const auto& r : reports) {
    CAPTURE(r.label);
    CHECK(r.passed);
    CHECK(r.seed != 0);
    bound += r.false_failure_bound;
  }
  CHECK(bound < 0.01);
  CHECK_THROWS(default_grid(1, 100));
}

}  // TEST_SUITE
