#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "ccov/errors.hpp"

namespace ccov {

/// Reads real/integer/double Matrix Market files in array or coordinate
/// format with general or symmetric symmetry. Pattern and complex matrices
/// are rejected. Errors are FormatError with the byte offset of the
/// offending line.
Eigen::MatrixXd parse_matrix_market(std::string_view text);
Eigen::MatrixXd read_matrix_market(const std::filesystem::path& path);

/// Array format. With `symmetric`, only the lower triangle is written
/// (column by column) and `a` must be symmetric. Values use the shortest
/// representation that round-trips exactly.
void write_matrix_market(std::ostream& out, const Eigen::MatrixXd& a, bool symmetric,
                         std::string_view comment = {});
void write_matrix_market(const std::filesystem::path& path, const Eigen::MatrixXd& a, bool symmetric,
                         std::string_view comment = {});

/// Shortest round-trip decimal form of `v`.
std::string format_double(double v);

/// Correctly rounded parse of a whole token; false if any character is left.
bool parse_double(std::string_view token, double& out);

/// Reads a whole file into memory; throws std::runtime_error naming the path.
std::string read_file(const std::filesystem::path& path);

}  // namespace ccov
