#pragma once

#include <array>
#include <cstdint>
#include <functional>

#include "isiw/likelihood.hpp"

namespace isiw {

/// Unconstrained coordinates (mu, log sigma2, log phi, log tau2).
using ParamVector = Eigen::Vector4d;

ParamVector to_unconstrained(const ModelParams &psi);
ModelParams from_unconstrained(const ParamVector &x, double nu);

struct FitConfig {
  int max_iterations = 200;
  double rel_tol = 1e-8;  ///< relative objective change
  double grad_tol = 1e-4; ///< norm of the projected gradient
  double fd_step = 1e-5;  ///< relative central-difference step
  int max_restarts = 3;
  /// phi is capped at this multiple of the domain diameter.
  double range_cap_factor = 10.0;
  std::uint64_t restart_seed = 0x5eed;
  /// Coordinates held fixed at their initial values, in unconstrained order.
  std::array<bool, 4> fixed{false, false, false, false};
};

struct FitResult {
  ModelParams psi_hat;
  double nll = 0.0;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  int restarts_used = 0;
  bool range_capped = false; ///< phi ended on its cap
  long evaluations = 0;
};

/// Rule-of-thumb starting values: sample mean, 0.9 / 0.1 splits of the
/// sample variance between sigma2 and tau2, and phi = diameter / 10.
ModelParams default_init(const Dataset &data, const Domain &domain,
                         double nu = 1.0);

using ObjectiveFunction = std::function<double(const ModelParams &)>;

/// Central finite-difference gradient in unconstrained coordinates with step
/// rel_step * max(1, |x_k|). Steps that would leave [lower, upper] fall back
/// to one-sided differences.
ParamVector fd_gradient(const std::function<double(const ParamVector &)> &f,
                        const ParamVector &x, double rel_step,
                        const ParamVector &lower, const ParamVector &upper);

/// Minimises the objective over (mu, log sigma2, log phi, log tau2) by
/// projected BFGS with finite-difference gradients and a backtracking line
/// search. Non-finite or failing evaluations count as +inf. Restarts from
/// perturbed initial values when a run does not converge.
FitResult fit(const ObjectiveFunction &objective, const ModelParams &init,
              const Domain &domain, const FitConfig &config = {});

inline FitResult fit(const Objective &objective, const ModelParams &init,
                     const Domain &domain, const FitConfig &config = {}) {
  return fit(ObjectiveFunction(std::cref(objective)), init, domain, config);
}

} // namespace isiw
