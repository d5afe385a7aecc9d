#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "lgnb/diagnostics.hpp"
#include "lgnb/model.hpp"

namespace lgnb {

/// Parsed comma-delimited table: header names and numeric cells in file order.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const;
};

/// Locale-independent reader (decimal point only). Errors carry row/column.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& source = "<memory>");

/// Dataset from a table: the response column gives y, every other column
/// except the weight column becomes a covariate (file order), and an
/// intercept column is prepended. A weight column repeats each row that
/// many times (frequency tables).
Dataset dataset_from_table(const CsvTable& table, const std::string& response,
                           const std::optional<std::string>& weight = std::nullopt);
Dataset load_csv(const std::filesystem::path& path, const std::string& response,
                 const std::optional<std::string>& weight = std::nullopt);

UnivariateSample sample_from_table(const CsvTable& table, const std::string& response,
                                   const std::optional<std::string>& weight = std::nullopt);
UnivariateSample load_sample(const std::filesystem::path& path, const std::string& response,
                             const std::optional<std::string>& weight = std::nullopt);

/// Red mites on apple leaves: 150 leaves, 172 mites,
/// counts 0..7 seen on 70, 38, 17, 10, 9, 3, 2, 1 leaves.
UnivariateSample bundled_redmites();

/// Directory searched for external datasets: $LGNB_DATA_DIR, else the
/// repository data/ directory.
std::filesystem::path data_directory();

/// Expected layout of an external dataset.
struct ExternalDataset {
  std::string name;
  std::string file;
  std::string response;
  std::size_t rows = 0;
  std::size_t covariates = 0;
};

const ExternalDataset& nascar_layout();
const ExternalDataset& motorins_layout();

/// Path of a known external dataset if present, otherwise nullopt.
std::optional<std::filesystem::path> find_external(const ExternalDataset& layout);

/// Loads an external dataset and checks its row/covariate counts.
Dataset load_external(const ExternalDataset& layout);

// ----------------------------------------------------------------------------
// Report document

struct FitSummary {
  std::string model;
  std::string method;
  std::vector<double> beta;
  std::map<std::string, double> scalars;  ///< r, sigma2, phi_disp, kappa, ...
  std::vector<std::vector<double>> beta_correlation;
  std::vector<double> elbo;
  bool converged = true;
  bool boundary = false;
  std::size_t iterations = 0;
};

struct Provenance {
  std::string version;
  std::uint64_t seed = 0;
  std::string command;
  std::string created;  ///< empty unless a timestamp was requested

  bool operator==(const Provenance&) const = default;
};

struct ReportEnvelope {
  nlohmann::json config;
  std::vector<FitSummary> fits;
  std::vector<DiagnosticsReport> diagnostics;
  std::map<std::string, TraceSummary> traces;  ///< keyed by fit label
  Provenance provenance;
};

/// Field-wise equality; NaN compares equal to NaN.
bool operator==(const FitSummary& a, const FitSummary& b);
bool operator==(const DiagnosticsReport& a, const DiagnosticsReport& b);
bool operator==(const Histogram& a, const Histogram& b);
bool operator==(const ScalarSummary& a, const ScalarSummary& b);
bool operator==(const TraceSummary& a, const TraceSummary& b);
bool operator==(const ReportEnvelope& a, const ReportEnvelope& b);

nlohmann::json to_json(const ReportEnvelope& report);
ReportEnvelope report_from_json(const nlohmann::json& doc);

std::string serialize_report(const ReportEnvelope& report);
ReportEnvelope deserialize_report(const std::string& text);

/// Writes columns as comma-delimited text with a header row.
void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& columns);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace lgnb
