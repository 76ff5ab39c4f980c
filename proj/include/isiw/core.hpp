#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "isiw/bessel.hpp"

namespace isiw {

using Eigen::Index;

/// A single location in the plane.
using Location = Eigen::RowVector2d;

/// n x 2 matrix of locations, one row per point.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Invalid parameters, malformed inputs or locations outside a domain.
class DomainError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A factorization or evaluation broke down numerically.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string &what, Index pivot = -1)
      : std::runtime_error(what), pivot_(pivot) {}

  /// Index of the first non-positive pivot, or -1 when not applicable.
  Index pivot() const { return pivot_; }

private:
  Index pivot_;
};

/// Axis-aligned rectangular study region.
struct Domain {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;

  static Domain unit_square() { return {}; }

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double diameter() const { return std::hypot(width(), height()); }

  bool contains(const Location &p) const {
    return p(0) >= x_min && p(0) <= x_max && p(1) >= y_min && p(1) <= y_max;
  }

  void validate() const;
};

/// Matérn covariance parameters; nu is held fixed during fitting.
struct CovParams {
  double sigma2 = 1.0;
  double phi = 1.0;
  double nu = 1.0;

  void validate() const;
};

/// Full model parameter vector (mu, sigma2, phi, tau2) with fixed nu.
struct ModelParams {
  double mu = 0.0;
  CovParams theta;
  double tau2 = 0.0;

  void validate() const;
};

/// Paired point pattern and observations.
struct Dataset {
  Points locations;
  Eigen::VectorXd values;

  Index size() const { return values.size(); }

  /// Throws DomainError on length mismatch, empty data, non-finite values,
  /// points outside the domain, or coincident locations.
  void validate(const Domain &domain) const;
};

/// Matérn correlation kernel with precomputed normalising constants.
///
///   C(h) = sigma2 2^{1-nu} / Gamma(nu) (sqrt(2 nu) h / phi)^nu K_nu(sqrt(2 nu) h / phi)
template <typename Scalar = double> class MaternKernel {
public:
  explicit MaternKernel(const CovParams &theta)
      : sigma2_(theta.sigma2), nu_(theta.nu),
        scale_(std::sqrt(2 * Scalar(theta.nu)) / Scalar(theta.phi)),
        log_norm_((1 - Scalar(theta.nu)) * std::numbers::ln2_v<Scalar> -
                  std::log(std::tgamma(Scalar(theta.nu)))) {
    theta.validate();
  }

  Scalar operator()(Scalar h) const {
    if (h == 0)
      return sigma2_;
    const Scalar x = scale_ * h;
    const Scalar log_pre = log_norm_ + nu_ * std::log(x) - x;
    if (log_pre < -745)
      return 0;
    return sigma2_ * std::exp(log_pre) * bessel_k_scaled(nu_, x);
  }

  Scalar sigma2() const { return sigma2_; }

private:
  Scalar sigma2_;
  Scalar nu_;
  Scalar scale_;
  Scalar log_norm_;
};

/// Matérn covariance at distance h >= 0. Returns sigma2 at h = 0.
double matern_cov(double h, const CovParams &theta);

/// Microergodic parameter kappa = sigma2 / phi^{2 nu}.
double microergodic(const CovParams &theta);

/// Euclidean distance matrix between the rows of a and b.
Eigen::MatrixXd cross_distances(const Points &a, const Points &b);

/// Covariance matrix with entries C(|x_i - x_j|) + tau2 * 1{i == j}.
Eigen::MatrixXd build_cov_matrix(const Points &locs, const CovParams &theta,
                                 double tau2);

/// Nugget-free cross-covariance C(|a_i - b_j|).
Eigen::MatrixXd cross_cov_matrix(const Points &a, const Points &b,
                                 const CovParams &theta);

/// Apply the Matérn kernel elementwise to a distance matrix.
template <typename Derived>
Eigen::MatrixXd matern_from_distances(const Eigen::MatrixBase<Derived> &dist,
                                      const CovParams &theta) {
  const MaternKernel<double> kernel(theta);
  return dist.unaryExpr([&kernel](double h) { return kernel(h); });
}

/// Cholesky factorisation that reports the failing pivot on breakdown.
Eigen::LLT<Eigen::MatrixXd> cholesky_or_throw(const Eigen::MatrixXd &a,
                                              const char *context);

/// Log-determinant from a successful Cholesky factorisation.
inline double log_det(const Eigen::LLT<Eigen::MatrixXd> &llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

} // namespace isiw
