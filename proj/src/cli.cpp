#include "lgnb/cli.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>

#include "CLI11.hpp"

#include "lgnb/baselines.hpp"
#include "lgnb/diagnostics.hpp"
#include "lgnb/errors.hpp"
#include "lgnb/gibbs.hpp"
#include "lgnb/vb.hpp"

namespace lgnb {

namespace {

const std::vector<std::size_t> kLags{0, 1, 5, 10, 20, 50};
constexpr std::size_t kVbSummaryDraws = 2000;

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::vector<std::vector<double>> to_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_std(m.row(i).transpose()));
  return rows;
}

std::vector<double> column(const Matrix& m, Eigen::Index c) { return to_std(m.col(c)); }

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string beta_name(Eigen::Index p) { return "beta" + std::to_string(p); }

/// Correlation of coefficient draws; empty when a column is constant.
std::vector<std::vector<double>> draw_correlation(const Matrix& draws) {
  if (draws.rows() < 2) return {};
  try {
    return to_rows(beta_correlation(sample_covariance(draws)));
  } catch (const DomainError&) {
    return {};
  }
}

bool is_bundled(const std::string& name) {
  return name == "redmites" || name == "nascar" || name == "motorins";
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.data == "redmites") return Dataset::intercept_only(bundled_redmites().y);
  if (cfg.data == "nascar") return load_external(nascar_layout());
  if (cfg.data == "motorins") return load_external(motorins_layout());
  const std::optional<std::string> weight =
      cfg.weight.empty() ? std::nullopt : std::optional<std::string>(cfg.weight);
  return load_csv(cfg.data, cfg.response, weight);
}

UnivariateSample load_univariate(const RunConfig& cfg) {
  if (cfg.data == "redmites") return bundled_redmites();
  if (cfg.data == "nascar" || cfg.data == "motorins") {
    const auto& layout = cfg.data == "nascar" ? nascar_layout() : motorins_layout();
    return UnivariateSample{load_external(layout).y};
  }
  const std::optional<std::string> weight =
      cfg.weight.empty() ? std::nullopt : std::optional<std::string>(cfg.weight);
  return load_sample(cfg.data, cfg.response, weight);
}

struct FitOutput {
  FitSummary summary;
  std::optional<DiagnosticsReport> diagnostics;
  std::map<std::string, TraceSummary> traces;
  std::vector<std::string> trace_header;
  std::vector<std::vector<double>> trace_columns;
};

void add_trace_column(FitOutput& out, const std::string& name, std::vector<double> values) {
  out.trace_header.push_back(name);
  out.trace_columns.push_back(std::move(values));
}

FitOutput fit_mle(const RunConfig& cfg, const Dataset& data) {
  FitOutput out;
  const bool nb = cfg.model == "nb";
  const MleFit fit = nb ? fit_nb_mle(data) : fit_poisson_mle(data);
  FitParameters params;
  params.family = nb ? ModelFamily::NegativeBinomial : ModelFamily::Poisson;
  params.beta = fit.beta;
  params.phi_disp = fit.phi_disp;
  out.summary.model = cfg.model;
  out.summary.method = "mle";
  out.summary.beta = to_std(fit.beta);
  out.summary.scalars["log_likelihood"] = fit.log_likelihood;
  out.summary.scalars["gradient_norm"] = fit.gradient_norm;
  if (nb) {
    out.summary.scalars["phi_disp"] = fit.phi_disp;
    out.summary.scalars["r"] = fit.r();
  }
  out.summary.scalars["kappa"] = quasi_dispersion(params);
  out.summary.converged = fit.converged;
  out.summary.boundary = fit.boundary;
  out.summary.iterations = fit.iterations;
  out.diagnostics = pearson_statistic(params, data);
  return out;
}

std::map<std::string, std::vector<double>> gibbs_named(const GibbsTrace& t, bool hold_r) {
  std::map<std::string, std::vector<double>> named{
      {"sigma2", t.sigma2}, {"kappa", t.kappa}, {"phi", t.phi}};
  if (!hold_r) {
    named["r"] = t.r;
    named["h"] = t.h;
  }
  for (Eigen::Index p = 0; p < t.beta.cols(); ++p) named[beta_name(p)] = column(t.beta, p);
  return named;
}

FitOutput fit_gibbs(const RunConfig& cfg, const Dataset& data, const Hyperparameters& hyper) {
  GibbsConfig gc;
  gc.iterations = cfg.iterations;
  gc.burn_in = cfg.burn_in;
  gc.thin = cfg.thin;
  gc.seed = cfg.seed;
  gc.pg_truncation = cfg.pg_truncation;
  const bool hold_r = cfg.model == "lgnb-fixed-r";
  if (hold_r) gc.fixed_r = cfg.fixed_r;

  const auto chains = run_gibbs_chains(data, hyper, gc, cfg.chains);
  const GibbsTrace pooled = chains.size() == 1 ? chains.front() : pool_traces(chains);

  FitOutput out;
  if (chains.size() == 1) {
    out.traces["gibbs"] = trace_summary(gibbs_named(pooled, hold_r), kLags);
  } else {
    for (std::size_t c = 0; c < chains.size(); ++c) {
      out.traces["gibbs/chain" + std::to_string(c)] = trace_summary(gibbs_named(chains[c], hold_r), kLags);
    }
    out.traces["gibbs/pooled"] = trace_summary(gibbs_named(pooled, hold_r), kLags);
  }

  const Vector beta_mean = pooled.beta.colwise().mean().transpose();
  FitParameters params;
  params.family = ModelFamily::Lgnb;
  params.beta = beta_mean;
  params.sigma2 = mean(pooled.sigma2);
  params.r = hold_r ? cfg.fixed_r : mean(pooled.r);

  out.summary.model = cfg.model;
  out.summary.method = "gibbs";
  out.summary.beta = to_std(beta_mean);
  out.summary.scalars["sigma2"] = params.sigma2;
  out.summary.scalars["r"] = params.r;
  out.summary.scalars["kappa"] = quasi_dispersion(params);
  out.summary.scalars["kappa_mean"] = mean(pooled.kappa);
  out.summary.beta_correlation = draw_correlation(pooled.beta);
  out.summary.iterations = cfg.iterations;
  out.diagnostics = pearson_statistic(params, data);

  if (!cfg.trace_out.empty()) {
    std::vector<double> chain_id;
    for (std::size_t c = 0; c < chains.size(); ++c) chain_id.insert(chain_id.end(), chains[c].size(), double(c));
    add_trace_column(out, "chain", chain_id);
    add_trace_column(out, "r", pooled.r);
    add_trace_column(out, "h", pooled.h);
    add_trace_column(out, "phi", pooled.phi);
    add_trace_column(out, "sigma2", pooled.sigma2);
    add_trace_column(out, "kappa", pooled.kappa);
    for (Eigen::Index p = 0; p < pooled.beta.cols(); ++p) add_trace_column(out, beta_name(p), column(pooled.beta, p));
  }
  return out;
}

FitOutput fit_vb(const RunConfig& cfg, const Dataset& data, const Hyperparameters& hyper) {
  VbConfig vc;
  vc.max_sweeps = cfg.vb_sweeps;
  vc.tolerance = cfg.vb_tolerance;
  vc.n_mc = cfg.mc_samples;
  vc.seed = cfg.seed;
  const bool hold_r = cfg.model == "lgnb-fixed-r";
  if (hold_r) vc.fixed_r = cfg.fixed_r;

  const VbResult res = run_vb(data, hyper, vc);
  const VbPosterior& post = res.posterior;
  RngStream draw_rng = RngStream(cfg.seed).derive(3);
  const VbSamples draws = sample_vb_posterior(post, kVbSummaryDraws, draw_rng);

  FitOutput out;
  std::map<std::string, std::vector<double>> named{{"sigma2", draws.sigma2}, {"kappa", draws.kappa}};
  if (!hold_r) named["r"] = draws.r;
  for (Eigen::Index p = 0; p < draws.beta.cols(); ++p) named[beta_name(p)] = column(draws.beta, p);
  out.traces["vb"] = trace_summary(named, kLags);

  FitParameters params;
  params.family = ModelFamily::Lgnb;
  params.beta = post.mu_beta;
  params.sigma2 = post.e_sigma2();
  params.r = post.e_r();

  out.summary.model = cfg.model;
  out.summary.method = "vb";
  out.summary.beta = to_std(post.mu_beta);
  out.summary.scalars["sigma2"] = params.sigma2;
  out.summary.scalars["r"] = params.r;
  out.summary.scalars["kappa"] = quasi_dispersion(params);
  out.summary.scalars["kappa_mean"] = mean(draws.kappa);
  out.summary.scalars["a_tilde"] = post.a_tilde;
  out.summary.scalars["h_tilde"] = post.h_tilde;
  out.summary.scalars["e_tilde"] = post.e_tilde;
  out.summary.scalars["f_tilde"] = post.f_tilde;
  out.summary.beta_correlation = to_rows(beta_correlation(post.sigma_beta));
  out.summary.elbo = res.elbo;
  out.summary.converged = res.converged;
  out.summary.iterations = res.sweeps;
  out.diagnostics = pearson_statistic(params, data);

  if (!cfg.trace_out.empty()) {
    add_trace_column(out, "r", draws.r);
    add_trace_column(out, "sigma2", draws.sigma2);
    add_trace_column(out, "kappa", draws.kappa);
    for (Eigen::Index p = 0; p < draws.beta.cols(); ++p) add_trace_column(out, beta_name(p), column(draws.beta, p));
  }
  return out;
}

FitSummary univariate_point(const std::string& method, const DispersionEstimate& est) {
  FitSummary s;
  s.model = "nb-univariate";
  s.method = method;
  s.scalars["r"] = est.r;
  s.boundary = est.boundary;
  return s;
}

void run_univariate(const RunConfig& cfg, ReportEnvelope& report, FitOutput& trace_out) {
  const UnivariateSample sample = load_univariate(cfg);
  const Hyperparameters hyper = cfg.hyperparameters();
  const bool all = cfg.method == "all";

  if (all || cfg.method == "mme") {
    try {
      report.fits.push_back(univariate_point("mme", {estimate_r_mme(sample), false}));
    } catch (const DomainError& e) {
      if (!all) throw;
      report.fits.push_back(univariate_point("mme", {std::numeric_limits<double>::infinity(), true}));
    }
  }
  if (all || cfg.method == "mle") report.fits.push_back(univariate_point("mle", estimate_r_mle_univariate(sample)));
  if (all || cfg.method == "mqle") report.fits.push_back(univariate_point("mqle", estimate_r_mqle(sample)));
  if (all || cfg.method == "gibbs") {
    UnivariateGibbsConfig gc;
    gc.iterations = cfg.iterations;
    gc.burn_in = cfg.burn_in;
    gc.thin = cfg.thin;
    gc.seed = cfg.seed;
    RngStream rng(cfg.seed);
    const UnivariateTrace t = univariate_gibbs(sample, hyper, gc, rng);
    FitSummary s;
    s.model = "nb-univariate";
    s.method = "gibbs";
    s.scalars["r"] = mean(t.r);
    s.scalars["p"] = mean(t.p);
    s.iterations = cfg.iterations;
    report.fits.push_back(s);
    report.traces["univariate/gibbs"] = trace_summary({{"r", t.r}, {"p", t.p}}, kLags);
    if (!cfg.trace_out.empty()) {
      add_trace_column(trace_out, "r", t.r);
      add_trace_column(trace_out, "p", t.p);
    }
  }
  if (all || cfg.method == "vb") {
    UnivariateVbConfig vc;
    vc.max_sweeps = cfg.vb_sweeps;
    const UnivariateVbResult v = univariate_vb(sample, hyper, vc);
    FitSummary s;
    s.model = "nb-univariate";
    s.method = "vb";
    s.scalars["r"] = v.e_r();
    s.scalars["a_tilde"] = v.a_tilde;
    s.scalars["h_tilde"] = v.h_tilde;
    s.scalars["alpha_tilde"] = v.alpha_tilde;
    s.scalars["beta_tilde"] = v.beta_tilde;
    s.elbo = v.elbo;
    s.converged = v.converged;
    s.iterations = v.sweeps;
    report.fits.push_back(s);
  }
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void RunConfig::validate() const {
  static const std::vector<std::string> models{"poisson", "nb", "lgnb", "lgnb-fixed-r"};
  if (command == "univariate") {
    static const std::vector<std::string> methods{"mme", "mle", "mqle", "gibbs", "vb", "all"};
    if (std::find(methods.begin(), methods.end(), method) == methods.end()) {
      throw ConfigError("univariate: unknown method '" + method + "'");
    }
    if (fixed_r_given) throw ConfigError("--fixed-r applies only to --model lgnb-fixed-r");
  } else {
    if (std::find(models.begin(), models.end(), model) == models.end()) {
      throw ConfigError("unknown model '" + model + "'");
    }
    const bool bayes = method == "gibbs" || method == "vb";
    if (method != "mle" && !bayes) throw ConfigError("unknown method '" + method + "'");
    if ((model == "poisson" || model == "nb") && bayes) {
      throw ConfigError("model '" + model + "' is fitted by mle only");
    }
    if ((model == "lgnb" || model == "lgnb-fixed-r") && method == "mle") {
      throw ConfigError("model '" + model + "' has no mle; use gibbs or vb");
    }
    if (fixed_r_given && model != "lgnb-fixed-r") {
      throw ConfigError("--fixed-r requires --model lgnb-fixed-r");
    }
    if (!(fixed_r > 0.0) || !std::isfinite(fixed_r)) throw ConfigError("--fixed-r must be positive");
    if (chains == 0) throw ConfigError("--chains must be >= 1");
    if (chains > 1 && method != "gibbs") throw ConfigError("--chains applies to gibbs only");
  }
  if (data.empty()) throw ConfigError("--data is required");
  if (!is_bundled(data) && response.empty()) throw ConfigError("--response is required for a data file");
  if (thin == 0 || iterations <= burn_in || (iterations - burn_in) / thin == 0) {
    throw ConfigError("--iters/--burnin/--thin retain no draws");
  }
  if (vb_sweeps == 0 || mc_samples == 0 || !(vb_tolerance >= 0.0)) {
    throw ConfigError("--vb-sweeps, --mc-samples must be >= 1 and --vb-tol >= 0");
  }
  if (pg_truncation < 1) throw ConfigError("--pg-trunc must be >= 1");
  hyperparameters();
}

Hyperparameters RunConfig::hyperparameters() const {
  Hyperparameters h;
  const std::map<std::string, double*> slots{{"a0", &h.a0}, {"b0", &h.b0}, {"c0", &h.c0},
                                             {"d0", &h.d0}, {"e0", &h.e0}, {"f0", &h.f0},
                                             {"g0", &h.g0}, {"beta_a", &h.beta_a}, {"beta_b", &h.beta_b}};
  for (const auto& [name, value] : hyper) {
    const auto it = slots.find(name);
    if (it == slots.end()) throw ConfigError("unknown hyperparameter '" + name + "'");
    *it->second = value;
  }
  try {
    h.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return h;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json hyper_json = nlohmann::json::object();
  const Hyperparameters h = hyperparameters();
  hyper_json = {{"a0", h.a0}, {"b0", h.b0}, {"c0", h.c0}, {"d0", h.d0}, {"e0", h.e0},
                {"f0", h.f0}, {"g0", h.g0}, {"beta_a", h.beta_a}, {"beta_b", h.beta_b}};
  return {{"command", command},         {"model", model},
          {"method", method},           {"fixed_r", fixed_r},
          {"iterations", iterations},   {"burn_in", burn_in},
          {"thin", thin},               {"vb_sweeps", vb_sweeps},
          {"vb_tolerance", std::isfinite(vb_tolerance) ? nlohmann::json(vb_tolerance) : nlohmann::json("inf")},
          {"mc_samples", mc_samples},   {"pg_truncation", pg_truncation},
          {"seed", seed},               {"chains", chains},
          {"hyper", hyper_json},        {"data", data},
          {"response", response},       {"weight", weight},
          {"trace_out", trace_out}};
}

ReportEnvelope execute(const RunConfig& cfg, const std::string& command_line, bool& converged) {
  cfg.validate();
  ReportEnvelope report;
  report.config = cfg.to_json();
  report.provenance.version = kVersion;
  report.provenance.seed = cfg.seed;
  report.provenance.command = command_line;
  if (cfg.timestamp) report.provenance.created = utc_now();

  FitOutput out;
  if (cfg.command == "univariate") {
    run_univariate(cfg, report, out);
  } else {
    const Dataset data = load_dataset(cfg);
    data.validate();
    if (data.n() == 0) throw IngestionError("dataset has no observations");
    const Hyperparameters hyper = cfg.hyperparameters();
    if (cfg.method == "mle") {
      out = fit_mle(cfg, data);
    } else if (cfg.method == "gibbs") {
      out = fit_gibbs(cfg, data, hyper);
    } else {
      out = fit_vb(cfg, data, hyper);
    }
    report.fits.push_back(out.summary);
    if (out.diagnostics) report.diagnostics.push_back(*out.diagnostics);
    for (auto& [label, t] : out.traces) report.traces[label] = std::move(t);
  }

  converged = std::all_of(report.fits.begin(), report.fits.end(),
                          [](const FitSummary& f) { return f.converged; });
  if (!cfg.trace_out.empty() && !out.trace_header.empty()) {
    write_table(cfg.trace_out, out.trace_header, out.trace_columns);
  }
  return report;
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::vector<std::string> hyper_items;

  CLI::App app{"Count regression with lognormal and gamma mixed negative binomial models", "lgnb"};
  app.require_subcommand(1);
  auto* fit = app.add_subcommand("fit", "Fit a count regression model");
  auto* uni = app.add_subcommand("univariate", "Estimate r for a univariate NB sample");

  for (auto* sub : {fit, uni}) {
    sub->add_option("--data", cfg.data, "CSV path or bundled name (redmites, nascar, motorins)");
    sub->add_option("--response", cfg.response, "Response column");
    sub->add_option("--weight", cfg.weight, "Frequency weight column");
    sub->add_option("--iters", cfg.iterations, "Gibbs iterations")->capture_default_str();
    sub->add_option("--burnin", cfg.burn_in, "Gibbs burn-in")->capture_default_str();
    sub->add_option("--thin", cfg.thin, "Gibbs thinning")->capture_default_str();
    sub->add_option("--vb-sweeps", cfg.vb_sweeps, "Maximum VB sweeps")->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    sub->add_option("--hyper", hyper_items, "Hyperparameter override name=value");
    sub->add_option("--out", cfg.out, "Report path (default stdout)");
    sub->add_option("--trace-out", cfg.trace_out, "Write draws as a table");
    sub->add_flag("--timestamp", cfg.timestamp, "Record the creation time in the report");
  }
  fit->add_option("--model", cfg.model, "poisson | nb | lgnb | lgnb-fixed-r")->capture_default_str();
  fit->add_option("--method", cfg.method, "mle | gibbs | vb")->capture_default_str();
  fit->add_option("--vb-tol", cfg.vb_tolerance, "VB relative tolerance")->capture_default_str();
  fit->add_option("--mc-samples", cfg.mc_samples, "VB Monte Carlo samples")->capture_default_str();
  fit->add_option("--pg-trunc", cfg.pg_truncation, "Polya-Gamma truncation")->capture_default_str();
  fit->add_option("--chains", cfg.chains, "Independent Gibbs chains")->capture_default_str();
  auto* fixed = fit->add_option("--fixed-r", cfg.fixed_r, "r for lgnb-fixed-r")->capture_default_str();
  uni->add_option("--method", cfg.method, "mme | mle | mqle | gibbs | vb | all")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  std::string command_line = "lgnb";
  for (const auto& a : args) command_line += " " + a;

  try {
    cfg.command = uni->parsed() ? "univariate" : "fit";
    cfg.fixed_r_given = fixed->count() > 0;
    for (const auto& item : hyper_items) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("--hyper expects name=value, got '" + item + "'");
      double value = 0.0;
      try {
        std::size_t used = 0;
        value = std::stod(item.substr(eq + 1), &used);
        if (used != item.size() - eq - 1) throw std::invalid_argument(item);
      } catch (const std::logic_error&) {
        throw ConfigError("--hyper value is not a number in '" + item + "'");
      }
      cfg.hyper[item.substr(0, eq)] = value;
    }

    bool converged = true;
    const ReportEnvelope report = execute(cfg, command_line, converged);
    const std::string text = serialize_report(report);
    if (cfg.out.empty()) {
      out << text;
    } else {
      std::ofstream file(cfg.out, std::ios::binary);
      if (!file) throw IngestionError("cannot write report '" + cfg.out + "'");
      file << text;
    }
    if (!converged) {
      err << "lgnb: warning: fit did not converge\n";
      return kExitNotConverged;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "lgnb: configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IngestionError& e) {
    err << "lgnb: ingestion error: " << e.what() << "\n";
    return kExitIngestion;
  } catch (const DomainError& e) {
    err << "lgnb: invalid input: " << e.what() << "\n";
    return kExitIngestion;
  } catch (const NumericalFault& e) {
    err << "lgnb: numerical fault: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace lgnb
