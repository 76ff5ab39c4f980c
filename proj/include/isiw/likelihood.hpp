#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "isiw/core.hpp"

namespace isiw {

/// Default Vecchia conditioning-set size.
inline constexpr Index kDefaultConditioningSize = 20;

/// Vecchia ordering and conditioning sets. Position i of the ordering holds
/// original index order[i]; cond_sets[i] lists the original indices it
/// conditions on, nearest first, all drawn from positions before i.
struct VecchiaPlan {
  std::vector<Index> order;
  std::vector<std::vector<Index>> cond_sets;
  Index m = kDefaultConditioningSize;

  Index size() const { return static_cast<Index>(order.size()); }

  /// Throws DomainError unless order is a permutation and every conditioning
  /// set has min(m, i) members drawn from earlier positions.
  void validate() const;
};

/// Maxmin ordering: starts at the point nearest the centroid, then
/// repeatedly takes the point farthest from those already ordered. Ties go
/// to the lowest original index.
std::vector<Index> maxmin_order(const Points &locs);

/// For each position, the min(m, i) nearest previously ordered points
/// (ties to the lowest original index).
VecchiaPlan nn_conditioning_sets(const Points &locs,
                                 const std::vector<Index> &order, Index m);

inline VecchiaPlan make_vecchia_plan(const Points &locs,
                                     Index m = kDefaultConditioningSize) {
  return nn_conditioning_sets(locs, maxmin_order(locs), m);
}

/// Debug export: index,position,neighbors (neighbors separated by ';').
void write_plan_csv(std::ostream &out, const VecchiaPlan &plan);

enum class ObjectiveKind { Exact, PairwiseMarginal, Vecchia };

std::string to_string(ObjectiveKind kind);

/// Negative log (composite) likelihood of a dataset as a function of the
/// model parameters. Geometry (distances, conditioning blocks, pair lists)
/// is computed once at construction; evaluation is const and re-entrant.
class Objective {
public:
  static Objective exact(Dataset data);

  /// Vecchia approximation; with weights, the term of position i is scaled
  /// by the weight of observation order[i].
  static Objective vecchia(Dataset data, VecchiaPlan plan,
                           std::optional<Eigen::VectorXd> weights = std::nullopt);

  /// Pairwise marginal composite likelihood over pairs no farther apart
  /// than cutoff; with weights, pair (i, j) carries w_i * w_j.
  static Objective
  pairwise_marginal(Dataset data,
                    std::optional<Eigen::VectorXd> weights = std::nullopt,
                    double cutoff = std::numeric_limits<double>::infinity());

  double operator()(const ModelParams &psi) const;

  ObjectiveKind kind() const { return kind_; }
  bool weighted() const { return weights_.has_value(); }
  const Dataset &data() const { return data_; }
  const VecchiaPlan &plan() const { return plan_; }

private:
  Objective(ObjectiveKind kind, Dataset data,
            std::optional<Eigen::VectorXd> weights);

  double eval_exact(const ModelParams &psi) const;
  double eval_vecchia(const ModelParams &psi) const;
  double eval_pairwise(const ModelParams &psi) const;

  ObjectiveKind kind_;
  Dataset data_;
  std::optional<Eigen::VectorXd> weights_;

  // exact
  Eigen::MatrixXd dist_;

  // vecchia
  VecchiaPlan plan_;
  std::vector<double> pair_dist_;   // unique off-diagonal pairs
  std::vector<Index> block_offset_; // per position into block_pairs_
  std::vector<Index> block_pairs_;  // strict lower triangle, row-major
  Index max_block_ = 0;

  // pairwise
  std::vector<Index> pair_i_;
  std::vector<Index> pair_j_;
  std::vector<double> pair_d_;
};

/// -log N(y; mu 1, Sigma(theta) + tau2 I).
double exact_nll(const ModelParams &psi, const Dataset &data);

double vecchia_nll(const ModelParams &psi, const Dataset &data,
                   const VecchiaPlan &plan,
                   const std::optional<Eigen::VectorXd> &weights = std::nullopt);

double pairwise_marginal_nll(
    const ModelParams &psi, const Dataset &data,
    const std::optional<Eigen::VectorXd> &weights = std::nullopt,
    double cutoff = std::numeric_limits<double>::infinity());

/// Covariance of the joint Gaussian implied by the Vecchia factorisation,
/// (I - B)^{-1} D (I - B)^{-T} in the ordered basis, returned in the
/// original indexing. Includes the nugget.
Eigen::MatrixXd vecchia_implied_cov(const ModelParams &psi,
                                    const VecchiaPlan &plan,
                                    const Points &locs);

/// KL(N(0, sigma_true) || N(0, sigma_approx)).
double gaussian_kl(const Eigen::MatrixXd &sigma_true,
                   const Eigen::MatrixXd &sigma_approx);

} // namespace isiw
