#include "ccov/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ccov/matrix_market.hpp"
#include "ccov/rng.hpp"

namespace ccov {
namespace {

Dataset orient(Eigen::MatrixXd m, Orientation orientation, std::string source) {
  Dataset d;
  d.samples = orientation == Orientation::ColumnsAreSamples ? std::move(m) : Eigen::MatrixXd(m.transpose());
  d.source = std::move(source);
  return d;
}

// RFC 4180 record splitter: quoted fields may contain commas, doubled
// quotes and line breaks.
struct CsvCell {
  std::string text;
  std::int64_t offset;
};

std::vector<std::vector<CsvCell>> split_csv(std::string_view text) {
  std::vector<std::vector<CsvCell>> rows;
  std::vector<CsvCell> row;
  CsvCell cell{{}, 0};
  bool quoted = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.text += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.text += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      row_has_content = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell = {{}, static_cast<std::int64_t>(i + 1)};
      row_has_content = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (row_has_content || !cell.text.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
      }
      row.clear();
      cell = {{}, static_cast<std::int64_t>(i + 1)};
      row_has_content = false;
    } else {
      cell.text += c;
      row_has_content = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field", cell.offset);
  if (row_has_content || !cell.text.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

Eigen::MatrixXd random_orthonormal(std::size_t p, std::size_t cols, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  Eigen::MatrixXd g(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(cols));
  for (Eigen::Index k = 0; k < g.size(); ++k) g.data()[k] = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  // Sign convention from R's diagonal makes the basis Haar distributed.
  const Eigen::MatrixXd r = qr.matrixQR();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

const SpikedModel& spiked_model(const SynthSpec& spec) {
  const auto* model = std::get_if<SpikedModel>(&spec.model);
  if (!model) throw std::invalid_argument("synthetic spec is not a spiked covariance model");
  const std::size_t r = model->spikes.size();
  if (r < 1 || r >= model->p) {
    std::ostringstream msg;
    msg << "spiked model needs 1 <= rank < p (rank=" << r << ", p=" << model->p << ")";
    throw std::invalid_argument(msg.str());
  }
  for (double l : model->spikes)
    if (!(l > 0.0)) throw std::invalid_argument("spike strengths must be positive");
  if (!(model->sigma >= 0.0)) throw std::invalid_argument("noise level sigma must be >= 0");
  return *model;
}

const StableRankModel& stable_model(const SynthSpec& spec) {
  const auto* model = std::get_if<StableRankModel>(&spec.model);
  if (!model) throw std::invalid_argument("synthetic spec is not a stable-rank model");
  if (model->p < 1 || !(model->beta >= 1.0) || model->beta > static_cast<double>(model->p)) {
    std::ostringstream msg;
    msg << "infeasible stable rank beta=" << model->beta << " for p=" << model->p << " (need 1 <= beta <= p)";
    throw std::invalid_argument(msg.str());
  }
  return *model;
}

void require_samples(const SynthSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("synthetic spec needs n >= 1");
}

}  // namespace

Dataset load_matrix_market(const std::filesystem::path& path, Orientation orientation) {
  return orient(read_matrix_market(path), orientation, path.string());
}

Dataset parse_csv(std::string_view text, Orientation orientation, std::string source) {
  const auto rows = split_csv(text);
  if (rows.empty()) throw FormatError("CSV input '" + source + "' is empty", 0);
  const std::size_t width = rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != width) {
      std::ostringstream msg;
      msg << "CSV row " << i + 1 << " has " << rows[i].size() << " cells, row 1 has " << width;
      throw FormatError(msg.str(), rows[i].front().offset);
    }
    for (std::size_t j = 0; j < width; ++j) {
      double v = 0;
      if (!parse_double(trim(rows[i][j].text), v)) {
        std::ostringstream msg;
        msg << "CSV cell at row " << i + 1 << ", column " << j + 1 << " is not numeric: '" << rows[i][j].text << "'";
        throw FormatError(msg.str(), rows[i][j].offset);
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return orient(std::move(m), orientation, std::move(source));
}

Dataset load_csv(const std::filesystem::path& path, Orientation orientation) {
  return parse_csv(read_file(path), orientation, path.string());
}

Dataset load_dataset(const std::filesystem::path& path, std::optional<Orientation> orientation) {
  const std::string ext = path.extension().string();
  if (ext == ".mtx" || ext == ".mm")
    return load_matrix_market(path, orientation.value_or(Orientation::ColumnsAreSamples));
  return load_csv(path, orientation.value_or(Orientation::RowsAreSamples));
}

Dataset generate_spiked(const SynthSpec& spec) {
  const SpikedModel& model = spiked_model(spec);
  require_samples(spec);
  const std::size_t r = model.spikes.size();
  const Eigen::MatrixXd u = random_orthonormal(model.p, r, spec.seed);
  Eigen::VectorXd scale(static_cast<Eigen::Index>(r));
  for (std::size_t j = 0; j < r; ++j) scale[static_cast<Eigen::Index>(j)] = std::sqrt(model.spikes[j]);

  Dataset d;
  d.samples.resize(static_cast<Eigen::Index>(model.p), static_cast<Eigen::Index>(spec.n));
  Eigen::VectorXd g(static_cast<Eigen::Index>(r));
  Eigen::VectorXd w(static_cast<Eigen::Index>(model.p));
  for (std::size_t i = 0; i < spec.n; ++i) {
    RandomStream rng(spec.seed, i + 1);  // stream 0 is the basis
    for (Eigen::Index j = 0; j < g.size(); ++j) g[j] = rng.normal();
    for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = rng.normal();
    d.samples.col(static_cast<Eigen::Index>(i)) = u * scale.cwiseProduct(g) + model.sigma * w;
  }
  std::ostringstream src;
  src << "synthetic:spiked(p=" << model.p << ", rank=" << r << ", sigma=" << model.sigma << ", n=" << spec.n
      << ", seed=" << spec.seed << ")";
  d.source = src.str();
  return d;
}

Eigen::VectorXd stable_rank_spectrum(std::size_t p, double beta) {
  if (p < 1 || !(beta >= 1.0) || beta > static_cast<double>(p)) {
    std::ostringstream msg;
    msg << "infeasible stable rank beta=" << beta << " for p=" << p;
    throw std::invalid_argument(msg.str());
  }
  Eigen::VectorXd lambda(static_cast<Eigen::Index>(p));
  lambda[0] = 1.0;
  if (p > 1) {
    const double tail = std::min(1.0, std::sqrt((beta - 1.0) / static_cast<double>(p - 1)));
    lambda.tail(static_cast<Eigen::Index>(p - 1)).setConstant(tail);
  }
  return lambda;
}

Dataset generate_stable_rank(const SynthSpec& spec) {
  const StableRankModel& model = stable_model(spec);
  require_samples(spec);
  const Eigen::VectorXd sd = stable_rank_spectrum(model.p, model.beta).cwiseSqrt();
  const Eigen::MatrixXd q = random_orthonormal(model.p, model.p, spec.seed);

  Dataset d;
  d.samples.resize(static_cast<Eigen::Index>(model.p), static_cast<Eigen::Index>(spec.n));
  Eigen::VectorXd g(static_cast<Eigen::Index>(model.p));
  for (std::size_t i = 0; i < spec.n; ++i) {
    RandomStream rng(spec.seed, i + 1);
    for (Eigen::Index j = 0; j < g.size(); ++j) g[j] = rng.normal();
    d.samples.col(static_cast<Eigen::Index>(i)) = q * sd.cwiseProduct(g);
  }
  std::ostringstream src;
  src << "synthetic:stable_rank(p=" << model.p << ", beta=" << model.beta << ", n=" << spec.n
      << ", seed=" << spec.seed << ")";
  d.source = src.str();
  return d;
}

Dataset generate_synthetic(const SynthSpec& spec) {
  return std::holds_alternative<SpikedModel>(spec.model) ? generate_spiked(spec) : generate_stable_rank(spec);
}

Eigen::MatrixXd population_covariance(const SynthSpec& spec) {
  if (std::holds_alternative<SpikedModel>(spec.model)) {
    const SpikedModel& model = spiked_model(spec);
    const std::size_t r = model.spikes.size();
    const Eigen::MatrixXd u = random_orthonormal(model.p, r, spec.seed);
    Eigen::VectorXd lambda(static_cast<Eigen::Index>(r));
    for (std::size_t j = 0; j < r; ++j) lambda[static_cast<Eigen::Index>(j)] = model.spikes[j];
    Eigen::MatrixXd c = u * lambda.asDiagonal() * u.transpose();
    c.diagonal().array() += model.sigma * model.sigma;
    return c;
  }
  const StableRankModel& model = stable_model(spec);
  const Eigen::MatrixXd q = random_orthonormal(model.p, model.p, spec.seed);
  return q * stable_rank_spectrum(model.p, model.beta).asDiagonal() * q.transpose();
}

nlohmann::json to_json(const SynthSpec& spec) {
  nlohmann::json j;
  if (const auto* s = std::get_if<SpikedModel>(&spec.model)) {
    j["model"] = "spiked";
    j["p"] = s->p;
    j["spikes"] = s->spikes;
    j["sigma"] = s->sigma;
  } else {
    const auto& r = std::get<StableRankModel>(spec.model);
    j["model"] = "stable_rank";
    j["p"] = r.p;
    j["beta"] = r.beta;
  }
  j["n"] = spec.n;
  j["seed"] = spec.seed;
  return j;
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  try {
    SynthSpec spec;
    spec.n = j.at("n").get<std::size_t>();
    spec.seed = j.value("seed", std::uint64_t{0});
    const auto model = j.at("model").get<std::string>();
    if (model == "spiked") {
      SpikedModel s;
      s.p = j.at("p").get<std::size_t>();
      s.spikes = j.at("spikes").get<std::vector<double>>();
      s.sigma = j.value("sigma", 0.0);
      spec.model = s;
    } else if (model == "stable_rank") {
      StableRankModel r;
      r.p = j.at("p").get<std::size_t>();
      r.beta = j.at("beta").get<double>();
      spec.model = r;
    } else {
      throw std::invalid_argument("unknown synthetic model '" + model + "'");
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("synthetic spec: ") + e.what());
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  write_matrix_market(path, data.samples, false, "samples are columns; source: " + data.source);
}

}  // namespace ccov
