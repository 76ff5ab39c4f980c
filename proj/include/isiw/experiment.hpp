#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "isiw/config.hpp"
#include "isiw/field.hpp"
#include "isiw/inference.hpp"
#include "isiw/point_process.hpp"

namespace isiw {

enum class FitMethod { MLE, Vecchia, IsiwV, IsiwPM };

std::string to_string(FitMethod method);
FitMethod parse_fit_method(const std::string &name);

/// A fitting method paired with its weight source. Unweighted methods carry
/// the variant "none"; weighted ones carry "Known" or a bandwidth selector.
struct MethodSpec {
  FitMethod method = FitMethod::MLE;
  std::string variant = "none";

  bool weighted() const {
    return method == FitMethod::IsiwV || method == FitMethod::IsiwPM;
  }
  /// "METHOD" or "METHOD:variant".
  std::string label() const;
  static MethodSpec parse(const std::string &text);
  void validate() const;
};

struct Scenario {
  SamplerKind sampler = SamplerKind::LGCP;
  double beta = 1.0;
  double phi = 0.15;
  Index n = 100;

  /// e.g. LGCP_beta1_phi0.15_n100
  std::string label() const;
};

struct ExperimentConfig {
  int replicates = 50;
  GridSpec grid;
  double mu = 4.0;
  double sigma2 = 1.5;
  double nu = 1.0;
  double tau2 = 0.1;
  std::vector<double> phis{0.02, 0.15};
  std::vector<SamplerKind> samplers{SamplerKind::LGCP};
  std::vector<double> betas{1.0};
  std::vector<Index> ns{100, 800};
  double alpha = 0.0;
  double parent_rate = 0.0;
  double offspring_scale = 0.1;
  int max_retries = 1000;
  std::vector<MethodSpec> methods = default_methods();
  double threshold = 1e-2;
  Index m = 20;
  std::uint64_t seed = 20240601;
  int threads = 0; ///< 0 picks the hardware concurrency
  /// The MLE arm fits the exact likelihood up to this n and unweighted
  /// Vecchia beyond it.
  Index mle_exact_max_n = 200;
  double pm_cutoff = std::numeric_limits<double>::infinity();
  FitConfig fit;

  static std::vector<MethodSpec> default_methods();

  /// Scenario grid in the order sampler, beta, phi, n.
  std::vector<Scenario> scenarios() const;
  ModelParams truth(double phi) const;
  SamplerSpec sampler_spec(const Scenario &s) const;
  void validate() const;

  /// Reads the documented keys; unknown keys are rejected.
  static ExperimentConfig from_keyvalue(const KeyValueConfig &kv);
};

struct MetricsRow {
  int replicate = 0;
  std::string scenario;
  std::string method;
  std::string variant;
  double rmspe = std::numeric_limits<double>::quiet_NaN();
  ModelParams psi;
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  bool converged = false;
  bool failed = false;
  std::string error;
};

/// Root mean squared difference.
double rmspe(const Eigen::VectorXd &predictions, const Eigen::VectorXd &truth);

inline constexpr std::array<const char *, 5> kParamNames{"mu", "sigma2", "phi",
                                                         "tau2", "kappa"};

/// Relative bias and relative RMSE for mu, sigma2, phi, tau2 and kappa.
/// Entries whose true value is 0 are NaN.
struct ParamMetrics {
  std::array<double, 5> bias{};
  std::array<double, 5> rmse{};
};

ParamMetrics param_metrics(const std::vector<ModelParams> &fits,
                           const ModelParams &truth);

/// Simulate, sample, observe, then fit and krige with every configured
/// method. Method failures are recorded in their rows. When sim is given it
/// must match the grid and the scenario's covariance parameters.
std::vector<MetricsRow> run_replicate(const ExperimentConfig &config,
                                      const Scenario &scenario, int replicate,
                                      const FieldSimulator *sim = nullptr);

struct SummaryRow {
  std::string scenario;
  std::string method;
  std::string variant;
  int n_ok = 0;
  int n_failed = 0;
  double mean_rmspe = 0.0;
  double sd_rmspe = 0.0;
  double median_rank = 0.0;
  double mean_rank = 0.0;
  /// Share of replicates (in %) with RMSPE below the MLE row.
  double pct_lower_than_mle = std::numeric_limits<double>::quiet_NaN();
  ParamMetrics params;
};

std::vector<SummaryRow> summarize(const ExperimentConfig &config,
                                  const std::vector<MetricsRow> &rows);

struct ExperimentResult {
  std::vector<MetricsRow> rows; ///< ordered by scenario, replicate, method
  std::vector<SummaryRow> summary;
};

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

ExperimentResult run_experiment(const ExperimentConfig &config,
                                const ProgressCallback &progress = {});

/// Header replicate,scenario,method,variant,rmspe,mu,sigma2,phi,tau2,kappa,seconds,converged
void write_results_csv(std::ostream &out, const std::vector<MetricsRow> &rows);
void write_summary_csv(std::ostream &out, const std::vector<SummaryRow> &rows);
/// Long format: scenario,method,variant,parameter,rel_bias,rel_rmse
void write_params_csv(std::ostream &out, const std::vector<SummaryRow> &rows);

/// results.csv, summary.csv, params.csv and metadata.txt in dir.
void write_experiment_outputs(const std::string &dir,
                              const ExperimentConfig &config,
                              const ExperimentResult &result);

} // namespace isiw
