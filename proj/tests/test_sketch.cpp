#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ccov/errors.hpp"
#include "ccov/sketch.hpp"
#include "support.hpp"

using namespace ccov;

namespace {

SparseProjection example_two() { return SparseProjection::from_columns(2, {{{0, +1}, {1, -1}}}); }
SparseProjection example_three() { return SparseProjection::from_columns(3, {{{1, +1}}, {{0, -1}, {2, +1}}}); }

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_SUITE("sketch") {

TEST_CASE("measure small hand instances") {
  CHECK(measure(example_two(), vec({3, 5})) == vec({-2}));
  CHECK(measure(example_three(), vec({2, 7, 4})) == vec({7, 2}));
  CHECK(measure(example_three(), Eigen::VectorXd::Zero(3)).isZero(0));
  CHECK(measure(example_three().to_dense(), vec({2, 7, 4})) == vec({7, 2}));
  CHECK_THROWS_AS(measure(example_three(), vec({1, 2})), DimensionError);
  const Projection p = example_three();
  const Eigen::VectorXf xf = vec({2, 7, 4}).cast<float>();
  CHECK(measure(p, Eigen::Ref<const Eigen::VectorXf>(xf)) == vec({7, 2}));
}

TEST_CASE("backproject small hand instances") {
  CHECK(backproject(example_two(), vec({-2})).to_dense() == vec({-2, 2}));
  const ProjectedSample z = backproject(example_three(), vec({7, 2}));
  CHECK(z.to_dense() == vec({-2, 7, 2}));
  CHECK(z.nnz() == 3);
  CHECK(backproject(example_three().to_dense(), vec({7, 2})).to_dense() == vec({-2, 7, 2}));

  const ProjectedSample zero = backproject(example_three(), Eigen::VectorXd::Zero(2));
  CHECK(zero.nnz() == 0);
  CHECK(zero.to_dense().isZero(0));
  CHECK_THROWS_AS(backproject(example_three(), vec({1, 2, 3})), DimensionError);
}

TEST_CASE("measure and backproject agree with dense R R^T x") {
  std::mt19937_64 gen(41);
  std::uniform_int_distribution<std::size_t> pick_p(2, 64);
  std::uniform_real_distribution<double> pick_s(1.0, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t p = pick_p(gen);
    const std::size_t m = 1 + gen() % (p - 1);
    const ProjectionSpec spec(DistributionSpec::sparse_sign(pick_s(gen)), p, m, gen());
    const Eigen::VectorXd x = testing::random_matrix(p, 1, gen);
    const SparseProjection r = generate_sparse(spec, trial);
    BackprojectWorkspace work(p);
    const Eigen::VectorXd z = backproject(r, measure(r, x), work).to_dense();
    const Eigen::MatrixXd rd = r.to_dense();
    const Eigen::VectorXd expected = rd * (rd.transpose() * x);
    CHECK(testing::rel_diff(z, expected) <= 1e-12);
  }
}

TEST_CASE("projected samples are sorted and nonzero") {
  const ProjectionSpec spec(DistributionSpec::sparse_sign(3), 40, 7, 8);
  std::mt19937_64 gen(3);
  for (std::uint64_t i = 0; i < 50; ++i) {
    const SparseProjection r = generate_sparse(spec, i);
    const ProjectedSample z = backproject(r, measure(r, testing::random_matrix(40, 1, gen)));
    CHECK(std::is_sorted(z.index.begin(), z.index.end()));
    CHECK(std::adjacent_find(z.index.begin(), z.index.end()) == z.index.end());
    for (double v : z.value) CHECK(v != 0.0);
  }
}

TEST_CASE("mean nnz of z lies in [m p / (2 s), m p / s]") {
  for (double s : {8.0, 16.0}) {
    const std::size_t p = 128, m = 6;
    const ProjectionSpec spec(DistributionSpec::sparse_sign(s), p, m, 17);
    std::mt19937_64 gen(5);
    double total = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
      const SparseProjection r = generate_sparse(spec, t);
      total += static_cast<double>(backproject(r, measure(r, testing::random_matrix(p, 1, gen))).nnz());
    }
    const double mean = total / trials;
    const double bound = static_cast<double>(m * p) / s;
    CHECK(mean <= bound);
    CHECK(mean >= 0.5 * bound);
  }
}

TEST_CASE("sketch_dataset determinism and oracle agreement") {
  std::mt19937_64 gen(8);
  const Eigen::MatrixXd x = testing::random_matrix(8, 5, gen);
  const ProjectionSpec spec(DistributionSpec::sparse_sign(2), 8, 3, 44);
  const SketchSet set = sketch_dataset(spec, x);
  for (std::size_t i = 0; i < 5; ++i) {
    const Eigen::MatrixXd r = generate_dense(spec, i);
    CHECK(testing::rel_diff(set.measurement(i), r.transpose() * x.col(i)) <= 1e-15);
  }

  const ProjectionSpec one(DistributionSpec::sparse_sign(1), 8, 3, 45);
  const SketchSet single = sketch_dataset(one, x.leftCols(1));
  CHECK((single.measurement(0).array() == measure(generate(one, 0), x.col(0)).array()).all());

  CHECK(sketch_dataset(spec, Eigen::MatrixXd::Zero(8, 4)).measurements.isZero(0));

  const SketchSet threaded = sketch_dataset(spec, x, 3);
  CHECK((threaded.measurements.array() == set.measurements.array()).all());

  // Processing order does not matter: the projection is keyed by sample index.
  Sketcher sk(spec);
  for (Eigen::Index i = 0; i < x.cols(); ++i) sk.push(x.col(i));
  CHECK(sk.count() == 5);
  const SketchSet pushed = std::move(sk).finish();
  CHECK((pushed.measurements.array() == set.measurements.array()).all());
  for (Eigen::Index i = x.cols() - 1; i >= 0; --i)
    CHECK((measure(generate(spec, static_cast<std::uint64_t>(i)), x.col(i)).array() ==
           set.measurements.col(i).array())
              .all());
}

TEST_CASE("sketcher reports the offending sample") {
  Sketcher sk(ProjectionSpec(DistributionSpec::gaussian(), 4, 2, 1));
  sk.push(Eigen::VectorXd::Ones(4));
  CHECK_THROWS_WITH_AS(sk.push(Eigen::VectorXd::Ones(5)), doctest::Contains("sample 1"), DimensionError);
  CHECK_THROWS(Sketcher(ProjectionSpec(DistributionSpec::gaussian(), 4, 2, 1)).finish());
  CHECK_THROWS_AS(SketchSet(ProjectionSpec(DistributionSpec::gaussian(), 4, 2, 1), Eigen::MatrixXd::Zero(3, 2)),
                  DimensionError);
}

TEST_CASE("sketch file round trip and corruption") {
  std::mt19937_64 gen(12);
  const ProjectionSpec spec(DistributionSpec::sparse_sign(2.5), 10, 4, 0xABCDEF);
  const SketchSet set = sketch_dataset(spec, testing::random_matrix(10, 6, gen));
  std::stringstream buffer;
  write_sketch(buffer, set);
  const std::string bytes = buffer.str();

  std::istringstream in(bytes);
  const SketchSet back = read_sketch(in);
  CHECK(back.spec == spec);
  CHECK((back.measurements.array() == set.measurements.array()).all());

  SUBCASE("truncated payload") {
    std::istringstream cut(bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_WITH_AS(read_sketch(cut), doctest::Contains("byte offset"), FormatError);
  }
  SUBCASE("trailing bytes") {
    std::istringstream extra(bytes + "xyz");
    CHECK_THROWS_AS(read_sketch(extra), FormatError);
  }
  SUBCASE("garbage header") {
    std::istringstream junk("this is not a sketch\n");
    CHECK_THROWS_AS(read_sketch(junk), FormatError);
  }
  SUBCASE("empty") {
    std::istringstream empty("");
    CHECK_THROWS_AS(read_sketch(empty), FormatError);
  }
  SUBCASE("wrong version") {
    std::string v = bytes;
    const auto pos = v.find("\"version\":1");
    REQUIRE(pos != std::string::npos);
    v.replace(pos, 11, "\"version\":7");
    std::istringstream bad(v);
    CHECK_THROWS_AS(read_sketch(bad), FormatError);
  }
  SUBCASE("path overloads") {
    testing::TempDir dir("sketch");
    write_sketch(dir / "s.bin", set);
    CHECK((read_sketch(dir / "s.bin").measurements.array() == set.measurements.array()).all());
    CHECK_THROWS(read_sketch(dir / "missing.bin"));
  }
}

}  // TEST_SUITE
