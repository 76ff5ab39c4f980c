#pragma once

#include <iosfwd>

#include "isiw/core.hpp"

namespace isiw {

struct KrigingOutput {
  Points targets;
  Eigen::VectorXd predictions; ///< mu + predicted S
  Eigen::VectorXd variances;   ///< clamped at 0
};

/// Plug-in simple kriging of mu + S. The nugget enters the data covariance
/// only; cross-covariances are nugget free. The data system is factored once
/// at construction and shared by every prediction call.
class Kriger {
public:
  Kriger(const ModelParams &psi, Dataset data);

  KrigingOutput predict(const Points &targets) const;

  /// Variances only; they depend on the locations, never on the values.
  Eigen::VectorXd variances(const Points &targets) const;

  const ModelParams &params() const { return psi_; }

private:
  ModelParams psi_;
  Dataset data_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_; // Sigma^{-1} (Y - mu)
};

inline KrigingOutput krige(const ModelParams &psi, const Dataset &data,
                           const Points &targets) {
  return Kriger(psi, data).predict(targets);
}

/// Columns x,y,pred,var.
void write_surface_csv(std::ostream &out, const KrigingOutput &surface);

} // namespace isiw
