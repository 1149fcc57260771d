#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

namespace ccov::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,          // bad arguments, missing files, validation failures
  kCorrupt = 3,        // malformed sketch / dataset / covariance files
  kVerifyFailed = 4,   // a verification check failed
};

/// Entry point shared by the `ccov` binary and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a over the shape and raw bytes of `data`.
std::uint64_t content_hash(const Eigen::MatrixXd& data);

/// Location of the cached reference covariance for a dataset file.
std::filesystem::path reference_cache_path(const std::filesystem::path& dataset, std::uint64_t hash);

}  // namespace ccov::cli
