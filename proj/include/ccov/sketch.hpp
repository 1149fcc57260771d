#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "ccov/errors.hpp"
#include "ccov/projection.hpp"

namespace ccov {

/// Sparse back-projected sample z = R y. Indices are sorted ascending.
struct ProjectedSample {
  std::size_t dim = 0;
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t nnz() const noexcept { return index.size(); }
  Eigen::VectorXd to_dense() const;
};

/// Reusable O(p) scratch for backproject; avoids a p-length allocation per
/// sample on the hot path.
class BackprojectWorkspace {
 public:
  explicit BackprojectWorkspace(std::size_t p) : scratch_(p, 0.0), touched_(p, 0) {}
  std::size_t dim() const noexcept { return scratch_.size(); }

 private:
  friend ProjectedSample backproject(const SparseProjection&, const Eigen::VectorXd&,
                                     BackprojectWorkspace&);
  std::vector<double> scratch_;
  std::vector<std::uint8_t> touched_;
  std::vector<std::uint32_t> rows_;
};

/// y = R^T x, touching only stored nonzeros.
Eigen::VectorXd measure(const SparseProjection& r, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd measure(const Eigen::MatrixXd& r, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd measure(const Projection& r, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Single-precision input is widened to double before projecting.
inline Eigen::VectorXd measure(const Projection& r, const Eigen::Ref<const Eigen::VectorXf>& x) {
  return measure(r, Eigen::VectorXd(x.cast<double>()));
}

/// z = R y. Overlapping columns sum into the same entry. The support is the
/// union of the supports of the columns of R.
ProjectedSample backproject(const SparseProjection& r, const Eigen::VectorXd& y,
                            BackprojectWorkspace& work);
ProjectedSample backproject(const SparseProjection& r, const Eigen::VectorXd& y);
/// Dense R: every coordinate is kept.
ProjectedSample backproject(const Eigen::MatrixXd& r, const Eigen::VectorXd& y);

/// n compressive measurements of one dataset under a single ProjectionSpec.
/// Column i of `measurements` is y_i = R_i^T x_i.
struct SketchSet {
  ProjectionSpec spec;
  Eigen::MatrixXd measurements;  // m x n

  SketchSet(ProjectionSpec spec, Eigen::MatrixXd measurements);

  std::size_t n() const noexcept { return static_cast<std::size_t>(measurements.cols()); }
  Eigen::VectorXd measurement(std::size_t i) const { return measurements.col(static_cast<Eigen::Index>(i)); }
};

/// Streaming single-pass sketcher. Sample i is projected through R_i, so the
/// index, not arrival order, binds a sample to its projection.
class Sketcher {
 public:
  explicit Sketcher(ProjectionSpec spec) : spec_(std::move(spec)) {}

  /// Sketch the next sample; throws DimensionError naming the sample index
  /// if its length is not p.
  void push(const Eigen::Ref<const Eigen::VectorXd>& x);

  std::size_t count() const noexcept { return columns_.size(); }
  SketchSet finish() &&;

 private:
  ProjectionSpec spec_;
  std::vector<Eigen::VectorXd> columns_;
};

/// Sketch every column of `data` (p x n). Samples are partitioned across
/// `jobs` threads; the result does not depend on `jobs`.
SketchSet sketch_dataset(const ProjectionSpec& spec, const Eigen::MatrixXd& data, unsigned jobs = 1);

// Sketch file: one JSON header line {"version":1,"spec":{...},"n":n} followed
// by n records of m little-endian IEEE-754 doubles in sample order.
void write_sketch(std::ostream& out, const SketchSet& sketches);
void write_sketch(const std::filesystem::path& path, const SketchSet& sketches);
/// Throws FormatError carrying the byte offset of the first problem.
SketchSet read_sketch(std::istream& in);
SketchSet read_sketch(const std::filesystem::path& path);

}  // namespace ccov
