#include "ccov/sketch.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "ccov/serialize.hpp"

namespace ccov {

Eigen::VectorXd ProjectedSample::to_dense() const {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < index.size(); ++k) z[index[k]] = value[k];
  return z;
}

Eigen::VectorXd measure(const SparseProjection& r, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (static_cast<std::size_t>(x.size()) != r.rows) {
    std::ostringstream msg;
    msg << "measure: sample has length " << x.size() << ", projection expects " << r.rows;
    throw DimensionError(msg.str());
  }
  Eigen::VectorXd y(static_cast<Eigen::Index>(r.cols));
  for (std::size_t j = 0; j < r.cols; ++j) {
    double acc = 0.0;
    for (std::size_t k = r.col_start[j]; k < r.col_start[j + 1]; ++k)
      acc += r.sign[k] > 0 ? x[r.row_index[k]] : -x[r.row_index[k]];
    y[static_cast<Eigen::Index>(j)] = acc;
  }
  return y;
}

Eigen::VectorXd measure(const Eigen::MatrixXd& r, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != r.rows()) {
    std::ostringstream msg;
    msg << "measure: sample has length " << x.size() << ", projection expects " << r.rows();
    throw DimensionError(msg.str());
  }
  return r.transpose() * x;
}

Eigen::VectorXd measure(const Projection& r, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return std::visit([&](const auto& mat) { return measure(mat, x); }, r);
}

ProjectedSample backproject(const SparseProjection& r, const Eigen::VectorXd& y,
                            BackprojectWorkspace& work) {
  if (static_cast<std::size_t>(y.size()) != r.cols)
    throw DimensionError("backproject: measurement length does not match projection columns");
  if (work.dim() != r.rows) throw DimensionError("backproject: workspace dimension mismatch");

  auto& scratch = work.scratch_;
  auto& touched = work.touched_;
  auto& rows = work.rows_;
  rows.clear();
  for (std::size_t j = 0; j < r.cols; ++j) {
    const double yj = y[static_cast<Eigen::Index>(j)];
    for (std::size_t k = r.col_start[j]; k < r.col_start[j + 1]; ++k) {
      const std::uint32_t row = r.row_index[k];
      if (!touched[row]) {
        touched[row] = 1;
        rows.push_back(row);
      }
      scratch[row] += r.sign[k] > 0 ? yj : -yj;
    }
  }
  std::sort(rows.begin(), rows.end());

  // Exact cancellations (and y = 0) are dropped so nnz counts true nonzeros.
  ProjectedSample z;
  z.dim = r.rows;
  z.index.reserve(rows.size());
  z.value.reserve(rows.size());
  for (const std::uint32_t row : rows) {
    if (scratch[row] != 0.0) {
      z.index.push_back(row);
      z.value.push_back(scratch[row]);
    }
    scratch[row] = 0.0;
    touched[row] = 0;
  }
  return z;
}

ProjectedSample backproject(const SparseProjection& r, const Eigen::VectorXd& y) {
  BackprojectWorkspace work(r.rows);
  return backproject(r, y, work);
}

ProjectedSample backproject(const Eigen::MatrixXd& r, const Eigen::VectorXd& y) {
  if (y.size() != r.cols())
    throw DimensionError("backproject: measurement length does not match projection columns");
  const Eigen::VectorXd dense = r * y;
  ProjectedSample z;
  z.dim = static_cast<std::size_t>(r.rows());
  for (Eigen::Index k = 0; k < dense.size(); ++k) {
    if (dense[k] != 0.0) {
      z.index.push_back(static_cast<std::uint32_t>(k));
      z.value.push_back(dense[k]);
    }
  }
  return z;
}

SketchSet::SketchSet(ProjectionSpec spec_, Eigen::MatrixXd measurements_)
    : spec(std::move(spec_)), measurements(std::move(measurements_)) {
  if (measurements.cols() < 1) throw std::invalid_argument("sketch set must hold n >= 1 samples");
  if (static_cast<std::size_t>(measurements.rows()) != spec.m)
    throw DimensionError("sketch set: measurement length differs from spec.m");
}

void Sketcher::push(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const std::size_t index = columns_.size();
  if (static_cast<std::size_t>(x.size()) != spec_.p) {
    std::ostringstream msg;
    msg << "sample " << index << " has length " << x.size() << ", expected p=" << spec_.p;
    throw DimensionError(msg.str());
  }
  columns_.push_back(measure(generate(spec_, index), x));
}

SketchSet Sketcher::finish() && {
  if (columns_.empty()) throw std::invalid_argument("sketch set must hold n >= 1 samples");
  Eigen::MatrixXd y(static_cast<Eigen::Index>(spec_.m), static_cast<Eigen::Index>(columns_.size()));
  for (std::size_t i = 0; i < columns_.size(); ++i) y.col(static_cast<Eigen::Index>(i)) = columns_[i];
  return SketchSet(spec_, std::move(y));
}

SketchSet sketch_dataset(const ProjectionSpec& spec, const Eigen::MatrixXd& data, unsigned jobs) {
  if (static_cast<std::size_t>(data.rows()) != spec.p) {
    std::ostringstream msg;
    msg << "sample 0 has length " << data.rows() << ", expected p=" << spec.p;
    throw DimensionError(msg.str());
  }
  const auto n = static_cast<std::size_t>(data.cols());
  if (n == 0) throw std::invalid_argument("sketch set must hold n >= 1 samples");
  Eigen::MatrixXd y(static_cast<Eigen::Index>(spec.m), static_cast<Eigen::Index>(n));

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      y.col(col) = measure(generate(spec, i), data.col(col));
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(work, n * t / jobs, n * (t + 1) / jobs);
  }
  return SketchSet(spec, std::move(y));
}

namespace {

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t out = 0;
    for (int b = 0; b < 8; ++b) out |= ((v >> (8 * b)) & 0xFF) << (8 * (7 - b));
    return out;
  }
}

}  // namespace

void write_sketch(std::ostream& out, const SketchSet& sketches) {
  nlohmann::json header;
  header["version"] = 1;
  header["spec"] = to_json(sketches.spec);
  header["n"] = sketches.n();
  out << header.dump() << '\n';

  const Eigen::MatrixXd& y = sketches.measurements;
  std::vector<char> record(static_cast<std::size_t>(y.rows()) * 8);
  for (Eigen::Index i = 0; i < y.cols(); ++i) {
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(y(j, i)));
      std::memcpy(record.data() + 8 * j, &bits, 8);
    }
    out.write(record.data(), static_cast<std::streamsize>(record.size()));
  }
  if (!out) throw std::runtime_error("write_sketch: stream write failed");
}

void write_sketch(const std::filesystem::path& path, const SketchSet& sketches) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_sketch(out, sketches);
}

SketchSet read_sketch(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || in.eof())
    throw FormatError("sketch header is not terminated by a newline", static_cast<std::int64_t>(line.size()));
  const auto header_bytes = static_cast<std::int64_t>(line.size()) + 1;

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("sketch header is not valid JSON: ") + e.what(),
                      static_cast<std::int64_t>(e.byte > 0 ? e.byte - 1 : 0));
  }

  std::size_t n = 0;
  std::optional<ProjectionSpec> spec;
  try {
    if (header.at("version").get<int>() != 1)
      throw FormatError("unsupported sketch version " + header.at("version").dump(), 0);
    n = header.at("n").get<std::size_t>();
    spec = projection_spec_from_json(header.at("spec"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("sketch header: ") + e.what(), 0);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("sketch header: ") + e.what(), 0);
  }
  if (n < 1) throw FormatError("sketch header declares n < 1", 0);

  const std::size_t m = spec->m;
  Eigen::MatrixXd y(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  std::vector<char> record(m * 8);
  for (std::size_t i = 0; i < n; ++i) {
    in.read(record.data(), static_cast<std::streamsize>(record.size()));
    const auto got = static_cast<std::int64_t>(in.gcount());
    if (got != static_cast<std::int64_t>(record.size())) {
      std::ostringstream msg;
      msg << "sketch payload truncated in record " << i << " of " << n;
      throw FormatError(msg.str(), header_bytes + static_cast<std::int64_t>(i * record.size()) + got);
    }
    for (std::size_t j = 0; j < m; ++j) {
      std::uint64_t bits;
      std::memcpy(&bits, record.data() + 8 * j, 8);
      y(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
          std::bit_cast<double>(to_little_endian(bits));
    }
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing bytes after sketch payload",
                      header_bytes + static_cast<std::int64_t>(n * record.size()));
  return SketchSet(*spec, std::move(y));
}

SketchSet read_sketch(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open sketch file '" + path.string() + "'");
  return read_sketch(in);
}

}  // namespace ccov
