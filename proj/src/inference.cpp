#include "isiw/inference.hpp"

#include <cmath>
#include <limits>

#include "isiw/random.hpp"

namespace isiw {

ParamVector to_unconstrained(const ModelParams &psi) {
  return {psi.mu, std::log(psi.theta.sigma2), std::log(psi.theta.phi),
          std::log(psi.tau2)};
}

ModelParams from_unconstrained(const ParamVector &x, double nu) {
  ModelParams psi;
  psi.mu = x(0);
  psi.theta = {std::exp(x(1)), std::exp(x(2)), nu};
  psi.tau2 = std::exp(x(3));
  return psi;
}

ModelParams default_init(const Dataset &data, const Domain &domain, double nu) {
  const Index n = data.size();
  if (n < 2)
    throw DomainError("default_init: needs at least 2 observations");
  domain.validate();
  const double mean = data.values.mean();
  const double var =
      (data.values.array() - mean).square().sum() / double(n - 1);
  ModelParams psi;
  psi.mu = mean;
  psi.theta.sigma2 = std::max(0.9 * var, 1e-6);
  psi.theta.phi = domain.diameter() / 10.0;
  psi.theta.nu = nu;
  psi.tau2 = std::max(0.1 * var, 1e-7);
  return psi;
}

ParamVector fd_gradient(const std::function<double(const ParamVector &)> &f,
                        const ParamVector &x, double rel_step,
                        const ParamVector &lower, const ParamVector &upper) {
  ParamVector g = ParamVector::Zero();
  double fx = std::numeric_limits<double>::quiet_NaN();
  auto f_at_x = [&]() {
    if (std::isnan(fx))
      fx = f(x);
    return fx;
  };
  for (int k = 0; k < 4; ++k) {
    if (lower(k) >= upper(k))
      continue;
    const double h = rel_step * std::max(1.0, std::abs(x(k)));
    ParamVector xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    const bool up_ok = xp(k) <= upper(k);
    const bool down_ok = xm(k) >= lower(k);
    double fp = up_ok ? f(xp) : std::numeric_limits<double>::infinity();
    double fm = down_ok ? f(xm) : std::numeric_limits<double>::infinity();
    if (std::isfinite(fp) && std::isfinite(fm))
      g(k) = (fp - fm) / (2.0 * h);
    else if (std::isfinite(fp) && std::isfinite(f_at_x()))
      g(k) = (fp - f_at_x()) / h;
    else if (std::isfinite(fm) && std::isfinite(f_at_x()))
      g(k) = (f_at_x() - fm) / h;
  }
  return g;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Problem {
  const ObjectiveFunction &objective;
  double nu;
  ParamVector lower;
  ParamVector upper;
  const FitConfig &config;
  long evaluations = 0;

  ParamVector project(const ParamVector &x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }

  double value(const ParamVector &x) {
    ++evaluations;
    try {
      const double v = objective(from_unconstrained(project(x), nu));
      return std::isfinite(v) ? v : kInf;
    } catch (const std::exception &) {
      return kInf;
    }
  }

  ParamVector gradient(const ParamVector &x) {
    return fd_gradient([this](const ParamVector &p) { return value(p); }, x,
                       config.fd_step, lower, upper);
  }

  // Zero the components pinned at a bound with the gradient pointing outward.
  ParamVector projected(const ParamVector &g, const ParamVector &x) const {
    ParamVector pg = g;
    for (int k = 0; k < 4; ++k) {
      const bool at_lower = x(k) <= lower(k) && g(k) > 0;
      const bool at_upper = x(k) >= upper(k) && g(k) < 0;
      if (at_lower || at_upper || lower(k) >= upper(k))
        pg(k) = 0.0;
    }
    return pg;
  }
};

struct RunResult {
  ParamVector x;
  double f = kInf;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = kInf;
};

RunResult minimise(Problem &prob, const ParamVector &start) {
  const FitConfig &cfg = prob.config;
  RunResult out;
  ParamVector x = prob.project(start);
  double f = prob.value(x);
  out.x = x;
  out.f = f;
  if (!std::isfinite(f))
    return out;

  ParamVector g = prob.gradient(x);
  Eigen::Matrix4d h_inv = Eigen::Matrix4d::Identity();
  bool fresh = true;
  double rel_change = kInf;
  int iter = 0;
  for (;; ++iter) {
    const ParamVector pg = prob.projected(g, x);
    out.gradient_norm = pg.norm();
    if (out.gradient_norm < cfg.grad_tol && (iter == 0 || rel_change < cfg.rel_tol)) {
      out.converged = true;
      break;
    }
    if (iter >= cfg.max_iterations)
      break;

    ParamVector d = -h_inv * pg;
    for (int k = 0; k < 4; ++k)
      if (pg(k) == 0.0)
        d(k) = 0.0;
    if (d.dot(pg) >= 0) {
      h_inv.setIdentity();
      fresh = true;
      d = -pg;
    }
    if (fresh && d.norm() > 1.0)
      d /= d.norm();

    double t = 1.0;
    bool accepted = false;
    ParamVector xn;
    double fn = kInf;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      xn = prob.project(x + t * d);
      if ((xn - x).cwiseAbs().maxCoeff() == 0.0)
        break;
      fn = prob.value(xn);
      if (fn <= f + 1e-4 * pg.dot(xn - x)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!fresh) {
        h_inv.setIdentity();
        fresh = true;
        continue;
      }
      break;
    }

    const ParamVector gn = prob.gradient(xn);
    const ParamVector s = xn - x;
    const ParamVector y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      if (fresh)
        h_inv = (sy / y.squaredNorm()) * Eigen::Matrix4d::Identity();
      const double rho = 1.0 / sy;
      const Eigen::Matrix4d left =
          Eigen::Matrix4d::Identity() - rho * s * y.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
      fresh = false;
    }
    rel_change = std::abs(f - fn) / std::max(std::abs(f), 1.0);
    x = xn;
    f = fn;
    g = gn;
  }
  out.x = x;
  out.f = f;
  out.iterations = iter;
  return out;
}

} // namespace

FitResult fit(const ObjectiveFunction &objective, const ModelParams &init,
              const Domain &domain, const FitConfig &config) {
  init.validate();
  domain.validate();
  const double diam = domain.diameter();
  ModelParams start = init;
  start.tau2 = std::max(start.tau2, 1e-10);

  Problem prob{objective, init.theta.nu, {}, {}, config};
  prob.lower << -kInf, std::log(1e-10), std::log(1e-6 * diam), std::log(1e-10);
  prob.upper << kInf, std::log(1e10), std::log(config.range_cap_factor * diam),
      std::log(1e10);
  const ParamVector x0 = prob.project(to_unconstrained(start));
  for (int k = 0; k < 4; ++k)
    if (config.fixed[static_cast<std::size_t>(k)]) {
      prob.lower(k) = x0(k);
      prob.upper(k) = x0(k);
    }

  RunResult best = minimise(prob, x0);
  int restarts = 0;
  if (!best.converged) {
    CounterRng rng = SeedStream(config.restart_seed, 0).engine();
    for (int r = 1; r <= config.max_restarts; ++r) {
      ParamVector xr = x0;
      for (int k = 1; k < 4; ++k)
        if (!config.fixed[static_cast<std::size_t>(k)])
          xr(k) += std::log(0.5 + uniform_open01(rng));
      RunResult run = minimise(prob, xr);
      restarts = r;
      if (run.converged || run.f < best.f) {
        const bool done = run.converged;
        best = run;
        if (done)
          break;
      }
    }
  }

  FitResult res;
  res.psi_hat = from_unconstrained(prob.project(best.x), init.theta.nu);
  res.nll = best.f;
  res.iterations = best.iterations;
  res.converged = best.converged;
  res.gradient_norm = best.gradient_norm;
  res.restarts_used = restarts;
  res.range_capped = best.x(2) >= prob.upper(2) && !config.fixed[2];
  res.evaluations = prob.evaluations;
  return res;
}

} // namespace isiw
