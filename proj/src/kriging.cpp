#include "isiw/kriging.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace isiw {

Kriger::Kriger(const ModelParams &psi, Dataset data)
    : psi_(psi), data_(std::move(data)) {
  psi_.validate();
  if (data_.size() < 1)
    throw DomainError("krige: empty dataset");
  if (data_.values.size() != data_.size())
    throw DomainError("krige: values and locations differ in length");
  llt_ = cholesky_or_throw(
      build_cov_matrix(data_.locations, psi_.theta, psi_.tau2), "krige");
  alpha_ = llt_.solve(
      (data_.values.array() - psi_.mu).matrix());
}

KrigingOutput Kriger::predict(const Points &targets) const {
  if (!targets.allFinite())
    throw DomainError("krige: non-finite target");
  const Eigen::MatrixXd c0 =
      cross_cov_matrix(data_.locations, targets, psi_.theta); // n x t
  KrigingOutput out;
  out.targets = targets;
  out.predictions = (c0.transpose() * alpha_).array() + psi_.mu;
  const Eigen::MatrixXd v = llt_.matrixL().solve(c0);
  out.variances = (psi_.theta.sigma2 - v.colwise().squaredNorm().array())
                      .max(0.0)
                      .transpose();
  return out;
}

Eigen::VectorXd Kriger::variances(const Points &targets) const {
  const Eigen::MatrixXd c0 =
      cross_cov_matrix(data_.locations, targets, psi_.theta);
  const Eigen::MatrixXd v = llt_.matrixL().solve(c0);
  return (psi_.theta.sigma2 - v.colwise().squaredNorm().array())
      .max(0.0)
      .transpose();
}

void write_surface_csv(std::ostream &out, const KrigingOutput &surface) {
  out << "x,y,pred,var\n";
  char buf[128];
  for (Index i = 0; i < surface.targets.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n",
                  surface.targets(i, 0), surface.targets(i, 1),
                  surface.predictions(i), surface.variances(i));
    out << buf;
  }
}

} // namespace isiw
