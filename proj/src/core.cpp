#include "isiw/core.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <vector>

namespace isiw {

void Domain::validate() const {
  if (!(std::isfinite(x_min) && std::isfinite(x_max) && std::isfinite(y_min) &&
        std::isfinite(y_max)))
    throw DomainError("domain bounds must be finite");
  if (!(x_max > x_min) || !(y_max > y_min))
    throw DomainError("domain must have positive width and height");
}

void CovParams::validate() const {
  if (!(sigma2 > 0) || !std::isfinite(sigma2))
    throw DomainError("sigma2 must be positive and finite");
  if (!(phi > 0) || !std::isfinite(phi))
    throw DomainError("phi must be positive and finite");
  if (!(nu > 0) || !std::isfinite(nu))
    throw DomainError("nu must be positive and finite");
}

void ModelParams::validate() const {
  theta.validate();
  if (!std::isfinite(mu))
    throw DomainError("mu must be finite");
  if (!(tau2 >= 0) || !std::isfinite(tau2))
    throw DomainError("tau2 must be non-negative and finite");
}

void Dataset::validate(const Domain &domain) const {
  const Index n = values.size();
  if (n < 1)
    throw DomainError("dataset is empty");
  if (locations.rows() != n)
    throw DomainError("dataset locations and values differ in length");
  if (!locations.allFinite() || !values.allFinite())
    throw DomainError("dataset contains non-finite entries");
  for (Index i = 0; i < n; ++i) {
    if (!domain.contains(locations.row(i))) {
      std::ostringstream msg;
      msg << "location " << i << " (" << locations(i, 0) << ", "
          << locations(i, 1) << ") lies outside the domain";
      throw DomainError(msg.str());
    }
  }
  // Sweep in x so the duplicate check stays near-linear for spread-out data.
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::sort(idx.begin(), idx.end(), [&](Index a, Index b) {
    return locations(a, 0) < locations(b, 0);
  });
  constexpr double tol = 1e-12;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      if (locations(idx[b], 0) - locations(idx[a], 0) > tol)
        break;
      if ((locations.row(idx[a]) - locations.row(idx[b])).norm() <= tol) {
        std::ostringstream msg;
        msg << "duplicate locations at rows " << std::min(idx[a], idx[b])
            << " and " << std::max(idx[a], idx[b]);
        throw DomainError(msg.str());
      }
    }
  }
}

double matern_cov(double h, const CovParams &theta) {
  if (!(h >= 0))
    throw DomainError("matern_cov: distance must be non-negative");
  return MaternKernel<double>(theta)(h);
}

double microergodic(const CovParams &theta) {
  theta.validate();
  return theta.sigma2 / std::pow(theta.phi, 2.0 * theta.nu);
}

Eigen::MatrixXd cross_distances(const Points &a, const Points &b) {
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Index j = 0; j < b.rows(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      d(i, j) = (a.row(i) - b.row(j)).norm();
  return d;
}

Eigen::MatrixXd build_cov_matrix(const Points &locs, const CovParams &theta,
                                 double tau2) {
  if (!(tau2 >= 0))
    throw DomainError("build_cov_matrix: nugget must be non-negative");
  const MaternKernel<double> kernel(theta);
  const Index n = locs.rows();
  Eigen::MatrixXd c(n, n);
  for (Index j = 0; j < n; ++j) {
    c(j, j) = theta.sigma2 + tau2;
    for (Index i = j + 1; i < n; ++i) {
      const double v = kernel((locs.row(i) - locs.row(j)).norm());
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

Eigen::MatrixXd cross_cov_matrix(const Points &a, const Points &b,
                                 const CovParams &theta) {
  return matern_from_distances(cross_distances(a, b), theta);
}

Eigen::LLT<Eigen::MatrixXd> cholesky_or_throw(const Eigen::MatrixXd &a,
                                              const char *context) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success &&
      llt.matrixLLT().diagonal().array().isFinite().all())
    return llt;

  // Locate the first failing pivot with a plain left-looking sweep.
  const Index n = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  Index pivot = n - 1;
  for (Index j = 0; j < n; ++j) {
    const double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0) || !std::isfinite(d)) {
      pivot = j;
      break;
    }
    l(j, j) = std::sqrt(d);
    for (Index i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  std::ostringstream msg;
  msg << context << ": matrix is not positive definite (pivot " << pivot << ")";
  throw NumericalError(msg.str(), pivot);
}

} // namespace isiw
