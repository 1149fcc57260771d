#include "ccov/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace ccov {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_index(std::string_view token, long long& out) {
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

// Line cursor that remembers byte offsets for diagnostics.
class Lines {
 public:
  explicit Lines(std::string_view text) : text_(text) {}

  bool next(std::string_view& line, std::int64_t& offset) {
    if (pos_ >= text_.size()) return false;
    offset = static_cast<std::int64_t>(pos_);
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    return true;
  }

  // Next line that is neither blank nor a comment.
  bool next_data(std::string_view& line, std::int64_t& offset) {
    while (next(line, offset)) {
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string_view::npos || line[first] == '%') continue;
      return true;
    }
    return false;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

bool parse_double(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size() && !token.empty();
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Eigen::MatrixXd parse_matrix_market(std::string_view text) {
  Lines lines(text);
  std::string_view line;
  std::int64_t offset = 0;
  if (!lines.next(line, offset)) throw FormatError("empty Matrix Market file", 0);

  const auto banner = split_ws(line);
  if (banner.size() != 5 || lower(banner[0]) != "%%matrixmarket" || lower(banner[1]) != "matrix")
    throw FormatError("malformed Matrix Market header '" + std::string(line) + "'", offset);
  const std::string format = lower(banner[2]);
  const std::string field = lower(banner[3]);
  const std::string symmetry = lower(banner[4]);
  if (format != "array" && format != "coordinate")
    throw FormatError("unknown Matrix Market format '" + format + "'", offset);
  if (field == "pattern") throw FormatError("pattern Matrix Market files carry no values", offset);
  if (field != "real" && field != "double" && field != "integer")
    throw FormatError("unsupported Matrix Market field '" + field + "'", offset);
  if (symmetry != "general" && symmetry != "symmetric")
    throw FormatError("unsupported Matrix Market symmetry '" + symmetry + "'", offset);
  const bool symmetric = symmetry == "symmetric";
  const bool coordinate = format == "coordinate";

  if (!lines.next_data(line, offset)) throw FormatError("missing Matrix Market size line", offset);
  const auto size = split_ws(line);
  long long rows = 0, cols = 0, entries = 0;
  if (size.size() != (coordinate ? 3u : 2u) || !parse_index(size[0], rows) || !parse_index(size[1], cols) ||
      (coordinate && !parse_index(size[2], entries)) || rows < 1 || cols < 1 || entries < 0)
    throw FormatError("malformed Matrix Market size line '" + std::string(line) + "'", offset);
  if (symmetric && rows != cols) throw FormatError("symmetric Matrix Market matrix is not square", offset);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
  if (coordinate) {
    for (long long e = 0; e < entries; ++e) {
      if (!lines.next_data(line, offset)) {
        std::ostringstream msg;
        msg << "Matrix Market file ends after " << e << " of " << entries << " entries";
        throw FormatError(msg.str(), static_cast<std::int64_t>(text.size()));
      }
      const auto tok = split_ws(line);
      long long i = 0, j = 0;
      double v = 0;
      if (tok.size() != 3 || !parse_index(tok[0], i) || !parse_index(tok[1], j) || !parse_double(tok[2], v))
        throw FormatError("malformed Matrix Market entry '" + std::string(line) + "'", offset);
      if (i < 1 || i > rows || j < 1 || j > cols) {
        std::ostringstream msg;
        msg << "Matrix Market entry (" << i << ", " << j << ") outside " << rows << " x " << cols;
        throw FormatError(msg.str(), offset);
      }
      a(i - 1, j - 1) = v;
      if (symmetric) a(j - 1, i - 1) = v;
    }
  } else {
    for (long long j = 0; j < cols; ++j) {
      for (long long i = symmetric ? j : 0; i < rows; ++i) {
        if (!lines.next_data(line, offset))
          throw FormatError("Matrix Market array file ends early", static_cast<std::int64_t>(text.size()));
        const auto tok = split_ws(line);
        double v = 0;
        if (tok.size() != 1 || !parse_double(tok[0], v))
          throw FormatError("malformed Matrix Market value '" + std::string(line) + "'", offset);
        a(i, j) = v;
        if (symmetric) a(j, i) = v;
      }
    }
  }
  if (lines.next_data(line, offset)) throw FormatError("unexpected data after Matrix Market entries", offset);
  return a;
}

Eigen::MatrixXd read_matrix_market(const std::filesystem::path& path) {
  return parse_matrix_market(read_file(path));
}

void write_matrix_market(std::ostream& out, const Eigen::MatrixXd& a, bool symmetric, std::string_view comment) {
  if (symmetric && (a.rows() != a.cols() || a != a.transpose()))
    throw std::invalid_argument("write_matrix_market: matrix is not exactly symmetric");
  out << "%%MatrixMarket matrix array real " << (symmetric ? "symmetric" : "general") << '\n';
  if (!comment.empty()) {
    std::istringstream lines{std::string(comment)};
    for (std::string l; std::getline(lines, l);) out << '%' << l << '\n';
  }
  out << a.rows() << ' ' << a.cols() << '\n';
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = symmetric ? j : 0; i < a.rows(); ++i) out << format_double(a(i, j)) << '\n';
  if (!out) throw std::runtime_error("write_matrix_market: stream write failed");
}

void write_matrix_market(const std::filesystem::path& path, const Eigen::MatrixXd& a, bool symmetric,
                         std::string_view comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_matrix_market(out, a, symmetric, comment);
}

}  // namespace ccov
