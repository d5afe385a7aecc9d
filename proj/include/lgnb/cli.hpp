#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lgnb/io.hpp"
#include "lgnb/model.hpp"

namespace lgnb {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitIngestion = 3,
  kExitNumerical = 4,
  kExitNotConverged = 5,
};

/// Everything needed to replay a run; echoed into the report.
struct RunConfig {
  std::string command = "fit";  ///< fit | univariate
  std::string model = "lgnb";   ///< poisson | nb | lgnb | lgnb-fixed-r
  std::string method = "gibbs"; ///< mle | gibbs | vb; univariate adds mme, mqle, all
  double fixed_r = 1000.0;
  bool fixed_r_given = false;
  std::size_t iterations = 20000;
  std::size_t burn_in = 10000;
  std::size_t thin = 5;
  std::size_t vb_sweeps = 500;
  double vb_tolerance = 1e-6;
  std::size_t mc_samples = 1000;
  int pg_truncation = 2000;
  std::uint64_t seed = 0;
  std::size_t chains = 1;
  std::map<std::string, double> hyper;
  std::string data;
  std::string response;
  std::string weight;
  std::string out;
  std::string trace_out;
  bool timestamp = false;

  /// Throws ConfigError on incompatible model/method/flag combinations.
  void validate() const;
  Hyperparameters hyperparameters() const;
  nlohmann::json to_json() const;
};

/// Builds the report for a parsed configuration and optionally writes the
/// trace table. `converged` is cleared when any fit failed to converge.
ReportEnvelope execute(const RunConfig& config, const std::string& command_line, bool& converged);

/// Parses arguments (without the program name), runs, writes the report to
/// --out or `out`, and returns an ExitCode. Diagnostics go to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lgnb
