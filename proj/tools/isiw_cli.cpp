// isiw: command-line front end for simulation, intensity estimation, fitting,
// kriging and the replicated simulation experiment.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "isiw/config.hpp"
#include "isiw/csv.hpp"
#include "isiw/experiment.hpp"
#include "isiw/intensity.hpp"
#include "isiw/kriging.hpp"

namespace fs = std::filesystem;
using namespace isiw;

namespace {

struct Globals {
  std::optional<std::string> seed;
  std::string config;
  std::string out_dir = ".";
  std::optional<int> threads;
  std::string method = "ISIW-V";
  std::string weights = "estimated";
  std::string bandwidth = "diggle";
  std::optional<long> m;
  std::optional<double> threshold;
  std::string domain;
};

// Model and design flags; each maps onto an experiment config key.
struct ModelFlags {
  std::map<std::string, std::string> values;

  void add(CLI::App *cmd, const std::string &key, const std::string &help) {
    cmd->add_option_function<std::string>(
        "--" + key, [this, key](const std::string &v) { values[key] = v; },
        help);
  }
};

KeyValueConfig base_config(const Globals &g, const ModelFlags &flags) {
  KeyValueConfig kv =
      g.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(g.config);
  for (const auto &[k, v] : flags.values)
    kv.set(k, v);
  if (g.seed)
    kv.set("seed", *g.seed);
  if (g.threads)
    kv.set("threads", std::to_string(*g.threads));
  if (g.m)
    kv.set("m", std::to_string(*g.m));
  if (g.threshold)
    kv.set("threshold", format_double(*g.threshold));
  if (!g.domain.empty())
    kv.set("domain", g.domain);
  return kv;
}

ExperimentConfig load_config(const Globals &g, const ModelFlags &flags) {
  return ExperimentConfig::from_keyvalue(base_config(g, flags));
}

std::ofstream open_out(const Globals &g, const std::string &name) {
  fs::create_directories(g.out_dir);
  const fs::path p = fs::path(g.out_dir) / name;
  std::ofstream f(p);
  if (!f)
    throw DomainError("cannot write " + p.string());
  return f;
}

std::ifstream open_in(const std::string &path) {
  std::ifstream f(path);
  if (!f)
    throw DomainError("cannot open " + path);
  return f;
}

SeedStream cli_stream(const ExperimentConfig &c) { return SeedStream(c.seed, 0); }

FieldRealization field_for(const ExperimentConfig &c, const std::string &path) {
  const CovParams theta{c.sigma2, c.phis.front(), c.nu};
  if (path.empty())
    return simulate_field(c.grid, theta, cli_stream(c).child("field"));
  auto in = open_in(path);
  const CsvTable t = read_csv(in);
  FieldRealization f;
  f.grid = c.grid;
  f.values = t.column_values("s");
  if (f.values.size() != c.grid.cell_count())
    throw DomainError("field file has " + std::to_string(f.values.size()) +
                      " cells, grid expects " +
                      std::to_string(c.grid.cell_count()));
  return f;
}

BandwidthSpec bandwidth_for(const std::string &text, const Points &pts,
                            const Domain &domain) {
  std::size_t used = 0;
  double h = 0.0;
  try {
    h = std::stod(text, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == text.size() && used > 0) {
    BandwidthSpec bw;
    bw.method = BandwidthMethod::Fixed;
    bw.h = h;
    bw.validate();
    return bw;
  }
  return select_bandwidth(parse_bandwidth_method(text), pts, domain);
}

int cmd_simulate(const Globals &g, const ModelFlags &flags) {
  const ExperimentConfig c = load_config(g, flags);
  const FieldRealization f = field_for(c, "");
  auto out = open_out(g, "field.csv");
  write_field_csv(out, f);
  return 0;
}

int cmd_sample(const Globals &g, const ModelFlags &flags,
               const std::string &field_path) {
  const ExperimentConfig c = load_config(g, flags);
  const FieldRealization f = field_for(c, field_path);
  Scenario s{c.samplers.front(), c.betas.front(), c.phis.front(), c.ns.front()};
  const SamplerSpec spec = c.sampler_spec(s);
  const SeedStream stream = cli_stream(c);
  Points pts;
  if (spec.kind == SamplerKind::Thomas)
    pts = sample_thomas(f, spec, stream.child("points")).points;
  else
    pts = sample_conditioned(c.grid, compute_intensity(f, spec), spec.n,
                             stream.child("points"));
  {
    auto out = open_out(g, "points.csv");
    write_points_csv(out, pts);
  }
  const Dataset d = observe(f, pts, c.mu, c.tau2, stream.child("noise"));
  auto out = open_out(g, "data.csv");
  out << "x,y,value\n";
  for (Index i = 0; i < d.size(); ++i)
    out << format_double(d.locations(i, 0)) << ','
        << format_double(d.locations(i, 1)) << ','
        << format_double(d.values(i)) << '\n';
  return 0;
}

int cmd_intensity(const Globals &g, const ModelFlags &flags,
                  const std::string &points_path) {
  const ExperimentConfig c = load_config(g, flags);
  auto in = open_in(points_path);
  const Points pts = read_points_csv(in);
  const BandwidthSpec bw = bandwidth_for(g.bandwidth, pts, c.grid.domain);
  const IntensityEstimate est =
      estimate_intensity(pts, c.grid.domain, bw, c.grid);
  {
    auto out = open_out(g, "intensity.csv");
    write_intensity_grid_csv(out, est);
  }
  auto out = open_out(g, "weights.csv");
  write_weights_csv(out, pts, weights_from_intensity(est, c.threshold));
  std::cout << "bandwidth=" << format_double(bw.h) << '\n'
            << "method=" << to_string(bw.method) << '\n'
            << "at_boundary=" << (bw.at_boundary ? 1 : 0) << '\n';
  return 0;
}

int cmd_fit(const Globals &g, const ModelFlags &flags,
            const std::string &data_path) {
  const ExperimentConfig c = load_config(g, flags);
  auto in = open_in(data_path);
  const Dataset data = read_data_csv(in);
  data.validate(c.grid.domain);
  const FitMethod method = parse_fit_method(g.method);

  std::optional<Eigen::VectorXd> weights;
  std::string variant = "none";
  if (method == FitMethod::IsiwV || method == FitMethod::IsiwPM) {
    if (g.weights == "none") {
      weights = Eigen::VectorXd::Ones(data.size());
    } else if (g.weights == "estimated") {
      variant = g.bandwidth;
      const BandwidthSpec bw =
          bandwidth_for(g.bandwidth, data.locations, c.grid.domain);
      weights = weights_from_intensity(
                    estimate_intensity(data.locations, c.grid.domain, bw),
                    c.threshold)
                    .weights;
    } else {
      variant = "file";
      auto win = open_in(g.weights);
      weights = read_csv(win).column_values("weight");
      if (weights->size() != data.size())
        throw DomainError("weights file length differs from data");
    }
  }

  std::optional<Objective> objective;
  switch (method) {
  case FitMethod::MLE:
    objective = Objective::exact(data);
    break;
  case FitMethod::Vecchia:
    objective = Objective::vecchia(data, make_vecchia_plan(data.locations, c.m));
    break;
  case FitMethod::IsiwV:
    objective = Objective::vecchia(
        data, make_vecchia_plan(data.locations, c.m), weights);
    break;
  case FitMethod::IsiwPM:
    objective = Objective::pairwise_marginal(data, weights, c.pm_cutoff);
    break;
  }
  const ModelParams init = default_init(data, c.grid.domain, c.nu);
  const FitResult r = fit(*objective, init, c.grid.domain, c.fit);

  std::ostringstream report;
  report << "method=" << to_string(method) << '\n'
         << "variant=" << variant << '\n'
         << "n=" << data.size() << '\n'
         << "mu=" << format_double(r.psi_hat.mu) << '\n'
         << "sigma2=" << format_double(r.psi_hat.theta.sigma2) << '\n'
         << "phi=" << format_double(r.psi_hat.theta.phi) << '\n'
         << "nu=" << format_double(r.psi_hat.theta.nu) << '\n'
         << "tau2=" << format_double(r.psi_hat.tau2) << '\n'
         << "kappa=" << format_double(microergodic(r.psi_hat.theta)) << '\n'
         << "nll=" << format_double(r.nll) << '\n'
         << "iterations=" << r.iterations << '\n'
         << "converged=" << (r.converged ? 1 : 0) << '\n'
         << "gradient_norm=" << format_double(r.gradient_norm) << '\n'
         << "restarts=" << r.restarts_used << '\n'
         << "range_capped=" << (r.range_capped ? 1 : 0) << '\n';
  std::cout << report.str();
  auto out = open_out(g, "fit.txt");
  out << report.str();
  return 0;
}

int cmd_krige(const Globals &g, const ModelFlags &flags,
              const std::string &data_path, const std::string &params_path) {
  const ExperimentConfig c = load_config(g, flags);
  auto in = open_in(data_path);
  const Dataset data = read_data_csv(in);
  ModelParams psi = c.truth(c.phis.front());
  if (!params_path.empty()) {
    const KeyValueConfig p = KeyValueConfig::load(params_path);
    psi.mu = p.get_double("mu", psi.mu);
    psi.theta.sigma2 = p.get_double("sigma2", psi.theta.sigma2);
    psi.theta.phi = p.get_double("phi", psi.theta.phi);
    psi.theta.nu = p.get_double("nu", psi.theta.nu);
    psi.tau2 = p.get_double("tau2", psi.tau2);
  }
  const KrigingOutput surface = krige(psi, data, c.grid.centers());
  auto out = open_out(g, "surface.csv");
  write_surface_csv(out, surface);
  return 0;
}

int cmd_experiment(const Globals &g, const ModelFlags &flags, bool quiet) {
  const ExperimentConfig c = load_config(g, flags);
  const ExperimentResult r =
      run_experiment(c, [quiet](std::size_t done, std::size_t total) {
        if (!quiet)
          std::fprintf(stderr, "\r%zu/%zu replicates", done, total);
      });
  if (!quiet)
    std::fprintf(stderr, "\n");
  write_experiment_outputs(g.out_dir, c, r);
  write_summary_csv(std::cout, r.summary);
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Inverse sampling intensity weighting for preferentially "
               "sampled geostatistical data"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Root seed");
  app.add_option("--config", g.config, "key=value configuration file");
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");
  app.add_option("--method", g.method, "MLE, Vecchia, ISIW-V or ISIW-PM")
      ->capture_default_str();
  app.add_option("--weights", g.weights,
                 "estimated, none, or a CSV file with a weight column")
      ->capture_default_str();
  app.add_option("--bandwidth", g.bandwidth,
                 "scott, diggle, ppl, CvL, CvL.adaptive or a fixed value")
      ->capture_default_str();
  app.add_option("--m", g.m, "Vecchia conditioning-set size");
  app.add_option("--threshold", g.threshold, "Winsorization threshold");
  app.add_option("--domain", g.domain, "x_min,x_max,y_min,y_max");

  ModelFlags flags;
  auto model_flags = [&flags](CLI::App *cmd) {
    flags.add(cmd, "mu", "Mean");
    flags.add(cmd, "sigma2", "Partial sill");
    flags.add(cmd, "phi", "Range");
    flags.add(cmd, "nu", "Smoothness");
    flags.add(cmd, "tau2", "Nugget");
    flags.add(cmd, "grid_nx", "Grid cells along x");
    flags.add(cmd, "grid_ny", "Grid cells along y");
  };

  auto *simulate = app.add_subcommand("simulate", "Simulate a field on the grid");
  model_flags(simulate);

  std::string field_path;
  auto *sample = app.add_subcommand("sample", "Sample points and observations");
  model_flags(sample);
  flags.add(sample, "sampler", "LGCP, SCP or Thomas");
  flags.add(sample, "beta", "Preferentiality");
  flags.add(sample, "n", "Number of points");
  flags.add(sample, "parent_rate", "Thomas parents per unit area");
  flags.add(sample, "offspring_scale", "Thomas offspring sd");
  sample->add_option("--field", field_path, "Field CSV (x,y,s) to sample from");

  std::string points_path;
  auto *intensity = app.add_subcommand("intensity", "Kernel intensity and weights");
  intensity->add_option("--points", points_path, "Points CSV (x,y)")->required();
  flags.add(intensity, "grid_nx", "Grid cells along x");
  flags.add(intensity, "grid_ny", "Grid cells along y");

  std::string data_path;
  auto *fitcmd = app.add_subcommand("fit", "Fit model parameters to a data CSV");
  fitcmd->add_option("--data", data_path, "Data CSV (x,y,value)")->required();
  flags.add(fitcmd, "nu", "Smoothness (fixed)");
  flags.add(fitcmd, "pm_cutoff", "Pairwise distance cutoff");
  flags.add(fitcmd, "max_iterations", "Optimizer iteration limit");

  std::string krige_data, params_path;
  auto *krigecmd = app.add_subcommand("krige", "Predict on the grid");
  krigecmd->add_option("--data", krige_data, "Data CSV (x,y,value)")->required();
  krigecmd->add_option("--params", params_path, "Fitted parameter report");
  model_flags(krigecmd);

  bool quiet = false;
  auto *experiment = app.add_subcommand("experiment", "Run the replicated study");
  experiment->add_flag("--quiet", quiet, "No progress output");
  flags.add(experiment, "replicates", "Replicates per scenario");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*simulate)
      return cmd_simulate(g, flags);
    if (*sample)
      return cmd_sample(g, flags, field_path);
    if (*intensity)
      return cmd_intensity(g, flags, points_path);
    if (*fitcmd)
      return cmd_fit(g, flags, data_path);
    if (*krigecmd)
      return cmd_krige(g, flags, krige_data, params_path);
    if (*experiment)
      return cmd_experiment(g, flags, quiet);
  } catch (const std::invalid_argument &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
