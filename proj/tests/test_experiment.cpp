#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "isiw/experiment.hpp"

using namespace isiw;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.replicates = 2;
  c.grid.nx = c.grid.ny = 16;
  c.phis = {0.15};
  c.ns = {60};
  c.methods = {MethodSpec::parse("MLE"), MethodSpec::parse("Vecchia"),
               MethodSpec::parse("ISIW-V:Known"), MethodSpec::parse("ISIW-V:diggle"),
               MethodSpec::parse("ISIW-PM:Known")};
  c.m = 10;
  c.threads = 1;
  return c;
}

KeyValueConfig kv_from(const std::string &text) {
  std::istringstream in(text);
  return KeyValueConfig::parse(in);
}

} // namespace

TEST(Rmspe, Examples) {
  EXPECT_EQ(rmspe(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3)), 0.0);
  EXPECT_NEAR(rmspe(Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 4)),
              std::sqrt(12.5), 1e-15);
  EXPECT_THROW(rmspe(Eigen::Vector2d(0, 0), Eigen::Vector3d(0, 0, 0)), DomainError);
  EXPECT_THROW(rmspe(Eigen::VectorXd(), Eigen::VectorXd()), DomainError);
}

TEST(ParamMetrics, Examples) {
  const ModelParams truth{4.0, {1.5, 0.15, 1.0}, 0.1};
  ModelParams a = truth, b = truth;
  a.theta.sigma2 = 1.8; // +20%
  b.theta.sigma2 = 1.5;
  const ParamMetrics pm = param_metrics({a, b}, truth);
  EXPECT_NEAR(pm.bias[1], 0.1, 1e-14);
  EXPECT_NEAR(pm.rmse[1], std::sqrt(0.02), 1e-14);
  EXPECT_EQ(pm.bias[0], 0.0);
  EXPECT_EQ(pm.rmse[2], 0.0);

  ModelParams zero_mean = truth;
  zero_mean.mu = 0.0;
  EXPECT_TRUE(std::isnan(param_metrics({truth}, zero_mean).bias[0]));
  EXPECT_THROW(param_metrics({}, truth), DomainError);
}

TEST(MethodSpec, ParseAndLabel) {
  const MethodSpec s = MethodSpec::parse("ISIW-V:CvL.adaptive");
  EXPECT_EQ(s.method, FitMethod::IsiwV);
  EXPECT_EQ(s.variant, "CvL.adaptive");
  EXPECT_EQ(s.label(), "ISIW-V:CvL.adaptive");
  EXPECT_EQ(MethodSpec::parse("MLE").variant, "none");
  EXPECT_EQ(MethodSpec::parse("MLE").label(), "MLE");
  EXPECT_THROW(MethodSpec::parse("ISIW-V"), DomainError);
  EXPECT_THROW(MethodSpec::parse("ISIW-V:bogus"), DomainError);
  EXPECT_THROW(MethodSpec::parse("Kriging"), DomainError);
  EXPECT_THROW(MethodSpec::parse("MLE:Known"), DomainError);
}

TEST(Scenario, Label) {
  Scenario s;
  EXPECT_EQ(s.label(), "LGCP_beta1_phi0.15_n100");
  s.sampler = SamplerKind::Thomas;
  s.beta = 0.5;
  s.phi = 0.02;
  s.n = 800;
  EXPECT_EQ(s.label(), "Thomas_beta0.5_phi0.02_n800");
}

TEST(ExperimentConfig, DefaultsAndScenarioOrder) {
  const ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.methods.size(), 6u);
  const auto sc = c.scenarios();
  ASSERT_EQ(sc.size(), 4u);
  EXPECT_EQ(sc[0].label(), "LGCP_beta1_phi0.02_n100");
  EXPECT_EQ(sc[1].label(), "LGCP_beta1_phi0.02_n800");
  EXPECT_EQ(sc[3].label(), "LGCP_beta1_phi0.15_n800");
  const ModelParams t = c.truth(0.02);
  EXPECT_EQ(t.mu, 4.0);
  EXPECT_EQ(t.theta.sigma2, 1.5);
  EXPECT_EQ(t.theta.phi, 0.02);
  EXPECT_EQ(t.tau2, 0.1);
}

TEST(ExperimentConfig, FromKeyValue) {
  const ExperimentConfig c = ExperimentConfig::from_keyvalue(kv_from(
      "replicates = 7\n# comment\nphi = 0.05, 0.3\nn = 50\nsampler = LGCP,Thomas\n"
      "methods = MLE, ISIW-V:scott\nseed = 0x10\nthreshold = 0.05\nm = 5\n"));
  EXPECT_EQ(c.replicates, 7);
  EXPECT_EQ(c.phis, (std::vector<double>{0.05, 0.3}));
  EXPECT_EQ(c.ns, (std::vector<Index>{50}));
  EXPECT_EQ(c.samplers.size(), 2u);
  EXPECT_EQ(c.methods.size(), 2u);
  EXPECT_EQ(c.methods[1].variant, "scott");
  EXPECT_EQ(c.seed, 16u);
  EXPECT_EQ(c.threshold, 0.05);
  EXPECT_EQ(c.m, 5);
  EXPECT_EQ(c.scenarios().size(), 4u);
}

TEST(ExperimentConfig, RejectsBadInput) {
  EXPECT_THROW(ExperimentConfig::from_keyvalue(kv_from("replicatez = 3\n")),
               DomainError);
  EXPECT_THROW(ExperimentConfig::from_keyvalue(kv_from("replicates = 0\n")),
               DomainError);
  EXPECT_THROW(ExperimentConfig::from_keyvalue(kv_from("threshold = 1.5\n")),
               DomainError);
  EXPECT_THROW(ExperimentConfig::from_keyvalue(kv_from("sampler = Poisson\n")),
               DomainError);
  EXPECT_THROW(ExperimentConfig::from_keyvalue(kv_from("phi = -1\n")), DomainError);
}

TEST(RunReplicate, DeterministicRows) {
  const ExperimentConfig c = small_config();
  const Scenario s = c.scenarios().front();
  const auto a = run_replicate(c, s, 0);
  const auto b = run_replicate(c, s, 0);
  ASSERT_EQ(a.size(), c.methods.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_FALSE(a[k].failed) << a[k].error;
    EXPECT_EQ(a[k].method, to_string(c.methods[k].method));
    EXPECT_EQ(a[k].variant, c.methods[k].variant);
    EXPECT_EQ(a[k].rmspe, b[k].rmspe);
    EXPECT_EQ(a[k].psi.theta.phi, b[k].psi.theta.phi);
    EXPECT_GT(a[k].rmspe, 0.0);
    EXPECT_NEAR(a[k].kappa, microergodic(a[k].psi.theta), 1e-12 * a[k].kappa);
  }
  const auto other = run_replicate(c, s, 1);
  EXPECT_NE(other[0].rmspe, a[0].rmspe);
}

TEST(RunReplicate, UniformKnownIntensityCollapsesToVecchia) {
  ExperimentConfig c = small_config();
  c.betas = {0.0};
  c.methods = {MethodSpec::parse("Vecchia"), MethodSpec::parse("ISIW-V:Known")};
  const auto rows = run_replicate(c, c.scenarios().front(), 0);
  ASSERT_FALSE(rows[0].failed || rows[1].failed);
  EXPECT_EQ(rows[0].psi.mu, rows[1].psi.mu);
  EXPECT_EQ(rows[0].psi.theta.sigma2, rows[1].psi.theta.sigma2);
  EXPECT_EQ(rows[0].psi.theta.phi, rows[1].psi.theta.phi);
  EXPECT_EQ(rows[0].psi.tau2, rows[1].psi.tau2);
  EXPECT_EQ(rows[0].rmspe, rows[1].rmspe);
}

TEST(RunExperiment, SummaryAggregatesRows) {
  ExperimentConfig c = small_config();
  c.replicates = 3;
  const ExperimentResult r = run_experiment(c);
  ASSERT_EQ(r.rows.size(), 3 * c.methods.size());
  ASSERT_EQ(r.summary.size(), c.methods.size());
  for (std::size_t k = 0; k < c.methods.size(); ++k) {
    double sum = 0.0;
    for (int rep = 0; rep < 3; ++rep)
      sum += r.rows[rep * c.methods.size() + k].rmspe;
    EXPECT_NEAR(r.summary[k].mean_rmspe, sum / 3, 1e-14);
    EXPECT_EQ(r.summary[k].n_ok + r.summary[k].n_failed, 3);
    EXPECT_GE(r.summary[k].mean_rank, 1.0);
    EXPECT_LE(r.summary[k].mean_rank, double(c.methods.size()));
  }
  EXPECT_EQ(r.summary[0].pct_lower_than_mle, 0.0);
  double rank_total = 0.0;
  for (const SummaryRow &s : r.summary)
    rank_total += s.mean_rank;
  const double m = double(c.methods.size());
  EXPECT_NEAR(rank_total, m * (m + 1) / 2, 1e-12);

  // threads do not change the output
  c.threads = 3;
  const ExperimentResult t = run_experiment(c);
  for (std::size_t i = 0; i < r.rows.size(); ++i)
    EXPECT_EQ(r.rows[i].rmspe, t.rows[i].rmspe);
}

TEST(Summarize, SingleReplicateHasNoSpread) {
  ExperimentConfig c = small_config();
  c.replicates = 1;
  c.methods = {MethodSpec::parse("MLE"), MethodSpec::parse("Vecchia")};
  std::vector<MetricsRow> rows(2);
  const std::string label = c.scenarios().front().label();
  rows[0] = {0, label, "MLE", "none", 1.0};
  rows[1] = {0, label, "Vecchia", "none", 1.0};
  const auto s = summarize(c, rows);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_TRUE(std::isnan(s[0].sd_rmspe));
  EXPECT_EQ(s[0].mean_rmspe, 1.0);
  EXPECT_EQ(s[0].median_rank, 1.5);
  EXPECT_EQ(s[1].mean_rank, 1.5);
  EXPECT_EQ(s[1].pct_lower_than_mle, 0.0);
}

TEST(Summarize, FailuresAreCountedNotRanked) {
  ExperimentConfig c = small_config();
  c.replicates = 2;
  c.methods = {MethodSpec::parse("MLE"), MethodSpec::parse("Vecchia")};
  const std::string label = c.scenarios().front().label();
  std::vector<MetricsRow> rows(4);
  rows[0] = {0, label, "MLE", "none", 2.0};
  rows[1] = {0, label, "Vecchia", "none", 1.0};
  rows[2] = {1, label, "MLE", "none", 1.0};
  rows[3] = {1, label, "Vecchia", "none"};
  rows[3].failed = true;
  const auto s = summarize(c, rows);
  EXPECT_EQ(s[1].n_ok, 1);
  EXPECT_EQ(s[1].n_failed, 1);
  EXPECT_EQ(s[1].mean_rmspe, 1.0);
  EXPECT_EQ(s[1].pct_lower_than_mle, 100.0);
  EXPECT_EQ(s[0].mean_rank, 1.5);
  EXPECT_NEAR(s[0].sd_rmspe, std::sqrt(0.5), 1e-15);
}

TEST(Output, CsvHeaders) {
  std::ostringstream r, s, p;
  write_results_csv(r, {});
  write_summary_csv(s, {});
  write_params_csv(p, {});
  EXPECT_EQ(r.str(), "replicate,scenario,method,variant,rmspe,mu,sigma2,phi,tau2,"
                     "kappa,seconds,converged\n");
  EXPECT_EQ(s.str(), "scenario,method,variant,n_ok,n_failed,mean_rmspe,sd_rmspe,"
                     "median_rank,mean_rank,pct_lower_than_mle\n");
  EXPECT_EQ(p.str(), "scenario,method,variant,parameter,rel_bias,rel_rmse\n");
}

TEST(Output, FailedRowsPrintNan) {
  MetricsRow row{3, "S", "MLE", "none"};
  row.failed = true;
  std::ostringstream out;
  write_results_csv(out, {row});
  const std::string text = out.str();
  EXPECT_NE(text.find("\n3,S,MLE,none,nan,nan,nan,nan,nan,nan,"), std::string::npos);
  EXPECT_EQ(text.substr(text.size() - 3), ",0\n");
}
