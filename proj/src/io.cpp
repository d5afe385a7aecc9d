#include "lgnb/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "lgnb/errors.hpp"

#ifndef LGNB_SOURCE_DATA_DIR
#define LGNB_SOURCE_DATA_DIR "data"
#endif

namespace lgnb {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(first, last - first + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(const std::string& cell, const std::string& where) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw IngestionError("non-numeric cell '" + cell + "' at " + where);
  }
  return value;
}

std::uint64_t as_count(double v, const std::string& what, std::size_t row) {
  if (v < 0.0 || v != std::floor(v) || v > 9.0e15) {
    throw IngestionError(what + " at data row " + std::to_string(row + 1) +
                         " must be a non-negative integer, got " + std::to_string(v));
  }
  return static_cast<std::uint64_t>(v);
}

// Encodes non-finite doubles as strings so the document round-trips.
json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double unnum(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw IngestionError("report: bad number '" + s + "'");
}

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::vector<double> unnums(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(unnum(x));
  return v;
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same(a[i], b[i])) return false;
  }
  return true;
}

json histogram_json(const Histogram& h) { return {{"edges", nums(h.edges)}, {"counts", h.counts}}; }

Histogram histogram_from(const json& j) {
  Histogram h;
  h.edges = unnums(j.at("edges"));
  h.counts = j.at("counts").get<std::vector<std::size_t>>();
  return h;
}

json scalar_json(const ScalarSummary& s) {
  json q = json::array();
  for (const auto& [p, v] : s.quantiles) q.push_back({num(p), num(v)});
  json ac = json::array();
  for (const auto& [lag, v] : s.autocorr) ac.push_back({lag, num(v)});
  return {{"mean", num(s.mean)},         {"sd", num(s.sd)},
          {"quantiles", q},              {"autocorrelation", ac},
          {"degenerate", s.degenerate},  {"histogram", histogram_json(s.hist)}};
}

ScalarSummary scalar_from(const json& j) {
  ScalarSummary s;
  s.mean = unnum(j.at("mean"));
  s.sd = unnum(j.at("sd"));
  for (const auto& q : j.at("quantiles")) s.quantiles[unnum(q.at(0))] = unnum(q.at(1));
  for (const auto& a : j.at("autocorrelation")) s.autocorr[a.at(0).get<std::size_t>()] = unnum(a.at(1));
  s.degenerate = j.at("degenerate").get<bool>();
  s.hist = histogram_from(j.at("histogram"));
  return s;
}

}  // namespace

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == name) return c;
  }
  throw IngestionError("missing column '" + name + "'");
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  CsvTable table;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_commas(line);
    if (table.columns.empty()) {
      table.columns = std::move(cells);
      continue;
    }
    if (cells.size() != table.columns.size()) {
      throw IngestionError(source + ": line " + std::to_string(line_no) + " has " +
                           std::to_string(cells.size()) + " fields, header has " +
                           std::to_string(table.columns.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      row.push_back(parse_number(cells[c], source + " line " + std::to_string(line_no) +
                                               ", column '" + table.columns[c] + "'"));
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty()) throw IngestionError(source + ": no header row");
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path.string());
}

Dataset dataset_from_table(const CsvTable& table, const std::string& response,
                           const std::optional<std::string>& weight) {
  const std::size_t yc = table.column_index(response);
  const std::optional<std::size_t> wc =
      weight ? std::optional<std::size_t>(table.column_index(*weight)) : std::nullopt;
  std::vector<std::size_t> covariates;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c != yc && (!wc || c != *wc)) covariates.push_back(c);
  }
  std::vector<std::size_t> source_rows;
  Counts y;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::uint64_t reps = wc ? as_count(table.rows[r][*wc], "weight '" + *weight + "'", r) : 1;
    const std::uint64_t value = as_count(table.rows[r][yc], "response '" + response + "'", r);
    for (std::uint64_t k = 0; k < reps; ++k) {
      y.push_back(value);
      source_rows.push_back(r);
    }
  }
  if (y.empty()) throw IngestionError("dataset has no observations");
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(covariates.size() + 1));
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    d.X(ii, 0) = 1.0;
    for (std::size_t c = 0; c < covariates.size(); ++c) {
      d.X(ii, static_cast<Eigen::Index>(c + 1)) = table.rows[source_rows[i]][covariates[c]];
    }
  }
  d.y = std::move(y);
  return d;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& response,
                 const std::optional<std::string>& weight) {
  return dataset_from_table(read_csv(path), response, weight);
}

UnivariateSample sample_from_table(const CsvTable& table, const std::string& response,
                                   const std::optional<std::string>& weight) {
  CsvTable only;
  only.columns.push_back(response);
  if (weight) only.columns.push_back(*weight);
  const std::size_t yc = table.column_index(response);
  const std::optional<std::size_t> wc =
      weight ? std::optional<std::size_t>(table.column_index(*weight)) : std::nullopt;
  for (const auto& row : table.rows) {
    std::vector<double> r{row[yc]};
    if (wc) r.push_back(row[*wc]);
    only.rows.push_back(std::move(r));
  }
  return UnivariateSample{dataset_from_table(only, response, weight).y};
}

UnivariateSample load_sample(const std::filesystem::path& path, const std::string& response,
                             const std::optional<std::string>& weight) {
  return sample_from_table(read_csv(path), response, weight);
}

UnivariateSample bundled_redmites() {
  static const std::pair<std::uint64_t, std::size_t> kFrequencies[] = {
      {0, 70}, {1, 38}, {2, 17}, {3, 10}, {4, 9}, {5, 3}, {6, 2}, {7, 1}};
  UnivariateSample s;
  for (const auto& [value, leaves] : kFrequencies) s.y.insert(s.y.end(), leaves, value);
  return s;
}

std::filesystem::path data_directory() {
  if (const char* env = std::getenv("LGNB_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return LGNB_SOURCE_DATA_DIR;
}

const ExternalDataset& nascar_layout() {
  static const ExternalDataset layout{"nascar", "nascar.csv", "leads", 151, 3};
  return layout;
}

const ExternalDataset& motorins_layout() {
  static const ExternalDataset layout{"motorins", "motorins.csv", "claims", 315, 19};
  return layout;
}

std::optional<std::filesystem::path> find_external(const ExternalDataset& layout) {
  const auto path = data_directory() / layout.file;
  if (std::filesystem::exists(path)) return path;
  return std::nullopt;
}

Dataset load_external(const ExternalDataset& layout) {
  const auto path = find_external(layout);
  if (!path) {
    throw IngestionError("dataset '" + layout.name + "' not found; place " + layout.file + " in " +
                         data_directory().string() + " (see data/README.md)");
  }
  Dataset d = load_csv(*path, layout.response);
  if (d.n() != layout.rows || d.n_coef() != layout.covariates + 1) {
    throw IngestionError("dataset '" + layout.name + "' has " + std::to_string(d.n()) + " rows and " +
                         std::to_string(d.n_coef() - 1) + " covariates; expected " +
                         std::to_string(layout.rows) + " and " + std::to_string(layout.covariates));
  }
  return d;
}

bool operator==(const FitSummary& a, const FitSummary& b) {
  if (a.model != b.model || a.method != b.method || !same(a.beta, b.beta) || !same(a.elbo, b.elbo) ||
      a.converged != b.converged || a.boundary != b.boundary || a.iterations != b.iterations) {
    return false;
  }
  if (a.scalars.size() != b.scalars.size() || a.beta_correlation.size() != b.beta_correlation.size()) {
    return false;
  }
  for (auto ia = a.scalars.begin(), ib = b.scalars.begin(); ia != a.scalars.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !same(ia->second, ib->second)) return false;
  }
  for (std::size_t k = 0; k < a.beta_correlation.size(); ++k) {
    if (!same(a.beta_correlation[k], b.beta_correlation[k])) return false;
  }
  return true;
}

bool operator==(const DiagnosticsReport& a, const DiagnosticsReport& b) {
  return a.model == b.model && same(a.fitted_mean, b.fitted_mean) && same(a.kappa, b.kappa) &&
         same(a.pearson, b.pearson) && same(a.residuals, b.residuals);
}

bool operator==(const Histogram& a, const Histogram& b) {
  return same(a.edges, b.edges) && a.counts == b.counts;
}

bool operator==(const ScalarSummary& a, const ScalarSummary& b) {
  if (!same(a.mean, b.mean) || !same(a.sd, b.sd) || a.degenerate != b.degenerate) return false;
  if (a.quantiles.size() != b.quantiles.size() || a.autocorr.size() != b.autocorr.size()) return false;
  for (auto ia = a.quantiles.begin(), ib = b.quantiles.begin(); ia != a.quantiles.end(); ++ia, ++ib) {
    if (!same(ia->first, ib->first) || !same(ia->second, ib->second)) return false;
  }
  for (auto ia = a.autocorr.begin(), ib = b.autocorr.begin(); ia != a.autocorr.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !same(ia->second, ib->second)) return false;
  }
  return a.hist == b.hist;
}

bool operator==(const TraceSummary& a, const TraceSummary& b) { return a.parameters == b.parameters; }

bool operator==(const ReportEnvelope& a, const ReportEnvelope& b) {
  return a.config == b.config && a.fits == b.fits && a.diagnostics == b.diagnostics &&
         a.traces == b.traces && a.provenance == b.provenance;
}

json to_json(const ReportEnvelope& report) {
  json doc;
  doc["config"] = report.config;
  doc["fits"] = json::array();
  for (const auto& f : report.fits) {
    json scalars = json::object();
    for (const auto& [k, v] : f.scalars) scalars[k] = num(v);
    json corr = json::array();
    for (const auto& row : f.beta_correlation) corr.push_back(nums(row));
    doc["fits"].push_back({{"model", f.model},
                           {"method", f.method},
                           {"beta", nums(f.beta)},
                           {"scalars", scalars},
                           {"beta_correlation", corr},
                           {"elbo", nums(f.elbo)},
                           {"converged", f.converged},
                           {"boundary", f.boundary},
                           {"iterations", f.iterations}});
  }
  doc["diagnostics"] = json::array();
  for (const auto& d : report.diagnostics) {
    doc["diagnostics"].push_back({{"model", d.model},
                                  {"kappa", num(d.kappa)},
                                  {"pearson", num(d.pearson)},
                                  {"fitted_mean", nums(d.fitted_mean)},
                                  {"residuals", nums(d.residuals)}});
  }
  doc["traces"] = json::object();
  for (const auto& [label, t] : report.traces) {
    json params = json::object();
    for (const auto& [name, s] : t.parameters) params[name] = scalar_json(s);
    doc["traces"][label] = params;
  }
  doc["provenance"] = {{"version", report.provenance.version},
                       {"seed", report.provenance.seed},
                       {"command", report.provenance.command},
                       {"created", report.provenance.created}};
  return doc;
}

ReportEnvelope report_from_json(const json& doc) {
  ReportEnvelope r;
  r.config = doc.at("config");
  for (const auto& f : doc.at("fits")) {
    FitSummary s;
    s.model = f.at("model").get<std::string>();
    s.method = f.at("method").get<std::string>();
    s.beta = unnums(f.at("beta"));
    for (const auto& [k, v] : f.at("scalars").items()) s.scalars[k] = unnum(v);
    for (const auto& row : f.at("beta_correlation")) s.beta_correlation.push_back(unnums(row));
    s.elbo = unnums(f.at("elbo"));
    s.converged = f.at("converged").get<bool>();
    s.boundary = f.at("boundary").get<bool>();
    s.iterations = f.at("iterations").get<std::size_t>();
    r.fits.push_back(std::move(s));
  }
  for (const auto& d : doc.at("diagnostics")) {
    DiagnosticsReport rep;
    rep.model = d.at("model").get<std::string>();
    rep.kappa = unnum(d.at("kappa"));
    rep.pearson = unnum(d.at("pearson"));
    rep.fitted_mean = unnums(d.at("fitted_mean"));
    rep.residuals = unnums(d.at("residuals"));
    r.diagnostics.push_back(std::move(rep));
  }
  for (const auto& [label, params] : doc.at("traces").items()) {
    TraceSummary t;
    for (const auto& [name, s] : params.items()) t.parameters[name] = scalar_from(s);
    r.traces[label] = std::move(t);
  }
  const auto& p = doc.at("provenance");
  r.provenance.version = p.at("version").get<std::string>();
  r.provenance.seed = p.at("seed").get<std::uint64_t>();
  r.provenance.command = p.at("command").get<std::string>();
  r.provenance.created = p.at("created").get<std::string>();
  return r;
}

std::string serialize_report(const ReportEnvelope& report) { return to_json(report).dump(2) + "\n"; }

ReportEnvelope deserialize_report(const std::string& text) {
  try {
    return report_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw IngestionError(std::string("report: ") + e.what());
  }
}

void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw DomainError("write_table: header/column mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write '" + path.string() + "'");
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  char buf[64];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, columns[c].at(r));
      out << (c ? "," : "") << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

}  // namespace lgnb
