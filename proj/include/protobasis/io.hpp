#pragma once

#include <nlohmann/json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "protobasis/eval.hpp"
#include "protobasis/model.hpp"

namespace protobasis::io {

namespace fs = std::filesystem;

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& where) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kParse, where + ": cannot parse '" + std::string(text) + "' as a number");
  }
  return v;
}

inline std::vector<std::string> split(const std::string& line, char delim = ',') {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  return out;
}

/// Reads a headerless numeric CSV into a matrix; every row must have the
/// same number of fields. Blank lines are skipped.
inline Matrix read_matrix_csv(const fs::path& path, bool skip_header = false) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_header && lineno == 1) continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_double(f, path.string() + ":" + std::to_string(lineno)));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::kShapeMismatch,
                  path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(rows.front().size()) + " fields, found " + std::to_string(row.size()),
                  lineno);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::kShapeMismatch, path.string() + ": no data rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

inline void write_matrix_csv(const fs::path& path, const Matrix& m) {
  auto out = open_out(path);
  write_matrix_csv(out, m);
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Dictionary: curves.csv (p rows: grid, X_1..X_N) and params.csv (N x d)

inline void save_dictionary(const fs::path& dir, const Dictionary& dict) {
  Matrix curves(dict.length(), dict.size() + 1);
  curves.col(0) = dict.sample_grid;
  curves.rightCols(dict.size()) = dict.curves;
  write_matrix_csv(dir / "curves.csv", curves);
  write_matrix_csv(dir / "params.csv", dict.params);
}

inline Dictionary load_dictionary(const fs::path& dir) {
  const Matrix curves = read_matrix_csv(dir / "curves.csv");
  if (curves.cols() < 2) throw Error(ErrorCode::kShapeMismatch, "curves.csv needs a grid column and at least one curve");
  Dictionary dict;
  dict.sample_grid = curves.col(0);
  dict.curves = curves.rightCols(curves.cols() - 1);
  dict.params = read_matrix_csv(dir / "params.csv");
  require_valid(dict);
  return dict;
}

// ---------------------------------------------------------------------------
// Observations: observations.csv (one row of p values per observation),
// truth.csv (one row per observation: rho_1..rho_d, gamma_1..gamma_N),
// noise.csv (optional; one row per observation or a single shared row).

inline void save_observations(const fs::path& dir, const std::vector<Observation>& obs) {
  if (obs.empty()) throw Error(ErrorCode::kInvalidArgument, "no observations to save");
  Matrix y(static_cast<Index>(obs.size()), obs.front().y.size());
  for (std::size_t j = 0; j < obs.size(); ++j) y.row(static_cast<Index>(j)) = obs[j].y.transpose();
  write_matrix_csv(dir / "observations.csv", y);
  if (obs.front().truth) {
    const Index d = obs.front().truth->rho.size();
    const Index n = obs.front().truth->gamma.size();
    Matrix t(static_cast<Index>(obs.size()), d + n);
    for (std::size_t j = 0; j < obs.size(); ++j) {
      t.row(static_cast<Index>(j)) << obs[j].truth->rho.transpose(), obs[j].truth->gamma.transpose();
    }
    write_matrix_csv(dir / "truth.csv", t);
  }
  if (obs.front().noise_scale) {
    Matrix s(static_cast<Index>(obs.size()), obs.front().y.size());
    for (std::size_t j = 0; j < obs.size(); ++j) s.row(static_cast<Index>(j)) = obs[j].noise_scale->transpose();
    write_matrix_csv(dir / "noise.csv", s);
  }
}

inline std::vector<Observation> load_observations(const fs::path& obs_path,
                                                  const std::optional<fs::path>& noise_path = std::nullopt,
                                                  const std::optional<fs::path>& truth_path = std::nullopt,
                                                  Index param_dim = 1) {
  const Matrix y = read_matrix_csv(obs_path);
  std::vector<Observation> out(static_cast<std::size_t>(y.rows()));
  for (Index j = 0; j < y.rows(); ++j) out[static_cast<std::size_t>(j)].y = y.row(j).transpose();
  if (noise_path) {
    const Matrix s = read_matrix_csv(*noise_path);
    if (s.cols() != y.cols() || (s.rows() != 1 && s.rows() != y.rows())) {
      throw Error(ErrorCode::kDimensionMismatch, "noise file shape does not match observations");
    }
    for (Index j = 0; j < y.rows(); ++j) out[static_cast<std::size_t>(j)].noise_scale = s.row(s.rows() == 1 ? 0 : j).transpose();
  }
  if (truth_path) {
    const Matrix t = read_matrix_csv(*truth_path);
    if (t.rows() != y.rows() || t.cols() <= param_dim) {
      throw Error(ErrorCode::kDimensionMismatch, "truth file shape does not match observations");
    }
    for (Index j = 0; j < y.rows(); ++j) {
      out[static_cast<std::size_t>(j)].truth =
          Truth{t.row(j).tail(t.cols() - param_dim).transpose(), t.row(j).head(param_dim).transpose()};
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prototype basis: basis.csv holds alpha (N rows x K columns); the JSON
// sidecar basis.csv.json records provenance and the config echo.

inline fs::path sidecar_path(const fs::path& basis_csv) { return fs::path(basis_csv.string() + ".json"); }

inline void save_basis(const fs::path& path, const PrototypeBasis& basis, const nlohmann::json& config_echo) {
  write_matrix_csv(path, basis.alpha());
  nlohmann::json side;
  side["method"] = basis.method_tag();
  side["K"] = basis.size();
  side["N"] = basis.alpha().rows();
  side["source_fingerprint"] = basis.source_fingerprint();
  std::vector<std::vector<double>> pp(static_cast<std::size_t>(basis.size()));
  for (Index k = 0; k < basis.size(); ++k)
    for (Index c = 0; c < basis.proto_params().cols(); ++c) pp[static_cast<std::size_t>(k)].push_back(basis.proto_params()(k, c));
  side["proto_params"] = pp;
  side["config_echo"] = config_echo;
  auto out = open_out(sidecar_path(path));
  out << side.dump(2) << '\n';
}

inline nlohmann::json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

/// Loads alpha and rebuilds the basis against `dict`; when a sidecar exists
/// its fingerprint must match the dictionary.
inline PrototypeBasis load_basis(const fs::path& path, const Dictionary& dict) {
  const Matrix alpha = read_matrix_csv(path);
  std::string tag = "loaded";
  if (fs::exists(sidecar_path(path))) {
    const auto side = read_json(sidecar_path(path));
    tag = side.value("method", tag);
    if (side.contains("source_fingerprint") && side.at("source_fingerprint").get<std::uint64_t>() != fingerprint(dict)) {
      throw Error(ErrorCode::kDimensionMismatch, "basis was built from a different dictionary");
    }
  }
  return PrototypeBasis(dict, alpha, tag);
}

// ---------------------------------------------------------------------------
// Fits and reports

inline void write_fits(const fs::path& path, const std::vector<MixtureFit>& fits, const PrototypeBasis& basis) {
  auto out = open_out(path);
  const Index K = basis.size();
  const Index d = basis.proto_params().cols();
  out << "scale";
  for (Index k = 0; k < K; ++k) out << ",beta_" << k + 1;
  out << ",residual_ss,chi_square";
  for (Index c = 0; c < d; ++c) out << ",rho_hat_" << c + 1;
  for (Index c = 0; c < d; ++c) out << ",rho_hat_raw_" << c + 1;
  out << ",flags\n";
  for (const auto& f : fits) {
    out << format_double(f.scale);
    for (Index k = 0; k < K; ++k) out << ',' << format_double(f.beta(k));
    out << ',' << format_double(f.residual_ss) << ',' << (f.chi_square ? format_double(*f.chi_square) : "");
    const Vector rho = estimate_target(f, basis, TargetWeighting::kSimplex);
    const Vector raw = estimate_target(f, basis, TargetWeighting::kRaw);
    for (Index c = 0; c < d; ++c) out << ',' << format_double(rho(c));
    for (Index c = 0; c < d; ++c) out << ',' << format_double(raw(c));
    out << ',' << (f.zero_fit ? "zero_fit" : "") << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

/// Reads a fits CSV written by write_fits for a basis of K prototypes. The
/// derived rho_hat columns are not read back.
inline std::vector<MixtureFit> read_fits(const fs::path& path, Index K) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kShapeMismatch, path.string() + ": missing header");
  const auto header = split(line);
  if (static_cast<Index>(header.size()) < K + 4 || header[0] != "scale") {
    throw Error(ErrorCode::kShapeMismatch, path.string() + ": header does not match K=" + std::to_string(K));
  }
  std::vector<MixtureFit> fits;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split(line);
    if (f.size() != header.size()) {
      throw Error(ErrorCode::kShapeMismatch, path.string() + ":" + std::to_string(lineno) + ": wrong field count", lineno);
    }
    const std::string where = path.string() + ":" + std::to_string(lineno);
    MixtureFit fit;
    fit.scale = parse_double(f[0], where);
    fit.beta.resize(K);
    for (Index k = 0; k < K; ++k) fit.beta(k) = parse_double(f[static_cast<std::size_t>(k + 1)], where);
    fit.residual_ss = parse_double(f[static_cast<std::size_t>(K + 1)], where);
    if (!f[static_cast<std::size_t>(K + 2)].empty()) fit.chi_square = parse_double(f[static_cast<std::size_t>(K + 2)], where);
    fit.zero_fit = f.back().find("zero_fit") != std::string::npos;
    fits.push_back(std::move(fit));
  }
  return fits;
}

inline void write_report(std::ostream& out, const ExperimentReport& report) {
  out << "method,K,rep_count,mean_mse,band_low,band_high,failed,reason\n";
  for (const auto& r : report.rows) {
    std::string reason = r.reason;
    for (auto& ch : reason)
      if (ch == ',' || ch == '\n' || ch == '"') ch = ';';
    out << r.method_tag << ',' << r.K << ',' << r.rep_count << ',';
    if (r.failed) {
      out << ",,," << "true," << reason << '\n';
    } else {
      out << format_double(r.mean_mse) << ',' << format_double(r.band_low) << ',' << format_double(r.band_high)
          << ",false," << '\n';
    }
  }
}

inline void write_report(const fs::path& path, const ExperimentReport& report) {
  auto out = open_out(path);
  write_report(out, report);
  nlohmann::json side;
  side["seed"] = report.seed;
  side["config_echo"] = report.config_echo;
  side["wall_time"] = nlohmann::json::object();
  for (const auto& r : report.rows) side["wall_time"][r.method_tag + ":" + std::to_string(r.K)] = r.wall_time;
  auto sout = open_out(fs::path(path.string() + ".json"));
  sout << side.dump(2) << '\n';
}

/// Appends a run record to the single manifest.json of an output directory.
inline void record_manifest(const fs::path& dir, const nlohmann::json& run) {
  const fs::path path = dir.empty() ? fs::path("manifest.json") : dir / "manifest.json";
  nlohmann::json manifest = {{"runs", nlohmann::json::array()}};
  if (fs::exists(path)) {
    try {
      manifest = read_json(path);
    } catch (const Error&) {
      manifest = {{"runs", nlohmann::json::array()}};
    }
    if (!manifest.contains("runs") || !manifest["runs"].is_array()) manifest = {{"runs", nlohmann::json::array()}};
  }
  manifest["runs"].push_back(run);
  auto out = open_out(path);
  out << manifest.dump(2) << '\n';
}

/// Hex digest of a JSON value's canonical dump, for manifest config hashes.
inline std::string config_hash(const nlohmann::json& j) {
  const std::string s = j.dump();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(tag_hash(s)));
  return buf;
}

}  // namespace protobasis::io
