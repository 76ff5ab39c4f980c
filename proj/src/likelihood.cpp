#include "isiw/likelihood.hpp"

#include <algorithm>
#include <numbers>
#include <ostream>
#include <unordered_map>
#include <utility>

namespace isiw {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836; // log(2 pi)

// In-place Cholesky of a dim x dim SPD block stored row-major (only the lower
// triangle is read), followed by a forward solve of the residual r. Returns
// -log of the conditional density of the last coordinate given the others.
double conditional_nll(double *a, double *r, Index dim) {
  for (Index j = 0; j < dim; ++j) {
    double *row_j = a + j * dim;
    double d = row_j[j];
    for (Index l = 0; l < j; ++l)
      d -= row_j[l] * row_j[l];
    if (!(d > 0))
      throw NumericalError("vecchia: conditional variance is not positive", j);
    const double ljj = std::sqrt(d);
    row_j[j] = ljj;
    for (Index i = j + 1; i < dim; ++i) {
      double *row_i = a + i * dim;
      double s = row_i[j];
      for (Index l = 0; l < j; ++l)
        s -= row_i[l] * row_j[l];
      row_i[j] = s / ljj;
    }
  }
  for (Index j = 0; j < dim; ++j) {
    const double *row_j = a + j * dim;
    double s = r[j];
    for (Index l = 0; l < j; ++l)
      s -= row_j[l] * r[l];
    r[j] = s / row_j[j];
  }
  const double last = a[(dim - 1) * dim + (dim - 1)];
  const double z = r[dim - 1];
  return std::log(last) + 0.5 * z * z + 0.5 * kLog2Pi;
}

void check_weights(const std::optional<Eigen::VectorXd> &w, Index n) {
  if (!w)
    return;
  if (w->size() != n)
    throw DomainError("objective: one weight per observation required");
  if (!(w->array() > 0).all() || !w->allFinite())
    throw DomainError("objective: weights must be positive and finite");
}

void check_data(const Dataset &data) {
  if (data.size() < 1 || data.locations.rows() != data.size())
    throw DomainError("objective: dataset is empty or inconsistent");
}

} // namespace

void VecchiaPlan::validate() const {
  const Index n = size();
  if (static_cast<Index>(cond_sets.size()) != n)
    throw DomainError("vecchia plan: one conditioning set per position required");
  if (m < 0)
    throw DomainError("vecchia plan: m must be non-negative");
  std::vector<Index> position(static_cast<std::size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    const Index o = order[static_cast<std::size_t>(i)];
    if (o < 0 || o >= n || position[static_cast<std::size_t>(o)] >= 0)
      throw DomainError("vecchia plan: order is not a permutation");
    position[static_cast<std::size_t>(o)] = i;
  }
  for (Index i = 0; i < n; ++i) {
    const auto &q = cond_sets[static_cast<std::size_t>(i)];
    if (static_cast<Index>(q.size()) != std::min(m, i))
      throw DomainError("vecchia plan: conditioning set has the wrong size");
    for (Index j : q)
      if (j < 0 || j >= n || position[static_cast<std::size_t>(j)] >= i)
        throw DomainError("vecchia plan: conditioning index does not precede its target");
  }
}

std::vector<Index> maxmin_order(const Points &locs) {
  const Index n = locs.rows();
  std::vector<Index> order;
  if (n == 0)
    return order;
  order.reserve(static_cast<std::size_t>(n));
  const Location centroid = locs.colwise().mean();
  Index first = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    const double d = (locs.row(i) - centroid).squaredNorm();
    if (d < best) {
      best = d;
      first = i;
    }
  }
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd min_dist(n);
  auto add = [&](Index k) {
    order.push_back(k);
    taken[static_cast<std::size_t>(k)] = 1;
    for (Index j = 0; j < n; ++j) {
      const double d = (locs.row(j) - locs.row(k)).squaredNorm();
      if (order.size() == 1 || d < min_dist(j))
        min_dist(j) = d;
    }
  };
  add(first);
  while (static_cast<Index>(order.size()) < n) {
    Index next = -1;
    for (Index j = 0; j < n; ++j) {
      if (taken[static_cast<std::size_t>(j)])
        continue;
      if (next < 0 || min_dist(j) > min_dist(next))
        next = j;
    }
    add(next);
  }
  return order;
}

VecchiaPlan nn_conditioning_sets(const Points &locs,
                                 const std::vector<Index> &order, Index m) {
  VecchiaPlan plan;
  plan.order = order;
  plan.m = m;
  const Index n = static_cast<Index>(order.size());
  if (n != locs.rows())
    throw DomainError("nn_conditioning_sets: order and locations differ in size");
  plan.cond_sets.resize(static_cast<std::size_t>(n));
  std::vector<std::pair<double, Index>> cand;
  for (Index i = 0; i < n; ++i) {
    const Index target = order[static_cast<std::size_t>(i)];
    const Index k = std::min(m, i);
    if (k == 0)
      continue;
    cand.clear();
    for (Index j = 0; j < i; ++j) {
      const Index o = order[static_cast<std::size_t>(j)];
      cand.emplace_back((locs.row(o) - locs.row(target)).squaredNorm(), o);
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    auto &q = plan.cond_sets[static_cast<std::size_t>(i)];
    for (Index j = 0; j < k; ++j)
      q.push_back(cand[static_cast<std::size_t>(j)].second);
  }
  plan.validate();
  return plan;
}

void write_plan_csv(std::ostream &out, const VecchiaPlan &plan) {
  out << "index,position,neighbors\n";
  for (Index i = 0; i < plan.size(); ++i) {
    out << plan.order[static_cast<std::size_t>(i)] << ',' << i << ',';
    const auto &q = plan.cond_sets[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < q.size(); ++j)
      out << (j ? ";" : "") << q[j];
    out << '\n';
  }
}

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
  case ObjectiveKind::Exact:
    return "exact";
  case ObjectiveKind::PairwiseMarginal:
    return "pairwise-marginal";
  case ObjectiveKind::Vecchia:
    return "vecchia";
  }
  return "?";
}

Objective::Objective(ObjectiveKind kind, Dataset data,
                     std::optional<Eigen::VectorXd> weights)
    : kind_(kind), data_(std::move(data)), weights_(std::move(weights)) {
  check_data(data_);
  check_weights(weights_, data_.size());
}

Objective Objective::exact(Dataset data) {
  Objective obj(ObjectiveKind::Exact, std::move(data), std::nullopt);
  obj.dist_ = cross_distances(obj.data_.locations, obj.data_.locations);
  return obj;
}

Objective Objective::vecchia(Dataset data, VecchiaPlan plan,
                             std::optional<Eigen::VectorXd> weights) {
  Objective obj(ObjectiveKind::Vecchia, std::move(data), std::move(weights));
  plan.validate();
  if (plan.size() != obj.data_.size())
    throw DomainError("vecchia: plan and data differ in size");
  obj.plan_ = std::move(plan);

  // Each covariance needed by any conditioning block is evaluated once per
  // objective call; blocks index into the table of unique pairs.
  const Index n = obj.data_.size();
  const Points &x = obj.data_.locations;
  std::unordered_map<std::uint64_t, Index> pair_id;
  auto id_of = [&](Index a, Index b) {
    if (a > b)
      std::swap(a, b);
    const auto key = static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(n) +
                     static_cast<std::uint64_t>(b);
    auto [it, inserted] = pair_id.try_emplace(key, static_cast<Index>(obj.pair_dist_.size()));
    if (inserted)
      obj.pair_dist_.push_back((x.row(a) - x.row(b)).norm());
    return it->second;
  };
  obj.block_offset_.reserve(static_cast<std::size_t>(n) + 1);
  for (Index i = 0; i < n; ++i) {
    obj.block_offset_.push_back(static_cast<Index>(obj.block_pairs_.size()));
    std::vector<Index> idx = obj.plan_.cond_sets[static_cast<std::size_t>(i)];
    idx.push_back(obj.plan_.order[static_cast<std::size_t>(i)]);
    const Index dim = static_cast<Index>(idx.size());
    obj.max_block_ = std::max(obj.max_block_, dim);
    for (Index r = 1; r < dim; ++r)
      for (Index c = 0; c < r; ++c)
        obj.block_pairs_.push_back(id_of(idx[static_cast<std::size_t>(r)],
                                         idx[static_cast<std::size_t>(c)]));
  }
  obj.block_offset_.push_back(static_cast<Index>(obj.block_pairs_.size()));
  return obj;
}

Objective Objective::pairwise_marginal(Dataset data,
                                       std::optional<Eigen::VectorXd> weights,
                                       double cutoff) {
  Objective obj(ObjectiveKind::PairwiseMarginal, std::move(data), std::move(weights));
  if (!(cutoff > 0))
    throw DomainError("pairwise marginal: cutoff must be positive");
  const Points &x = obj.data_.locations;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = i + 1; j < x.rows(); ++j) {
      const double d = (x.row(i) - x.row(j)).norm();
      if (d <= cutoff) {
        obj.pair_i_.push_back(i);
        obj.pair_j_.push_back(j);
        obj.pair_d_.push_back(d);
      }
    }
  if (obj.pair_d_.empty())
    throw DomainError("pairwise marginal: no pairs within the cutoff distance");
  return obj;
}

double Objective::operator()(const ModelParams &psi) const {
  psi.validate();
  switch (kind_) {
  case ObjectiveKind::Exact:
    return eval_exact(psi);
  case ObjectiveKind::Vecchia:
    return eval_vecchia(psi);
  case ObjectiveKind::PairwiseMarginal:
    return eval_pairwise(psi);
  }
  return 0.0;
}

double Objective::eval_exact(const ModelParams &psi) const {
  const Index n = data_.size();
  const MaternKernel<double> kernel(psi.theta);
  Eigen::MatrixXd cov(n, n);
  for (Index j = 0; j < n; ++j) {
    cov(j, j) = psi.theta.sigma2 + psi.tau2;
    for (Index i = j + 1; i < n; ++i)
      cov(i, j) = kernel(dist_(i, j));
  }
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  const auto llt = cholesky_or_throw(cov, "exact_nll");
  const Eigen::VectorXd z =
      llt.matrixL().solve((data_.values.array() - psi.mu).matrix());
  return 0.5 * log_det(llt) + 0.5 * z.squaredNorm() + 0.5 * double(n) * kLog2Pi;
}

double Objective::eval_vecchia(const ModelParams &psi) const {
  const MaternKernel<double> kernel(psi.theta);
  std::vector<double> cov(pair_dist_.size());
  for (std::size_t k = 0; k < pair_dist_.size(); ++k)
    cov[k] = kernel(pair_dist_[k]);
  const double sill = psi.theta.sigma2 + psi.tau2;

  std::vector<double> block(static_cast<std::size_t>(max_block_ * max_block_));
  std::vector<double> resid(static_cast<std::size_t>(max_block_));
  double total = 0.0;
  for (Index i = 0; i < plan_.size(); ++i) {
    const auto &q = plan_.cond_sets[static_cast<std::size_t>(i)];
    const Index target = plan_.order[static_cast<std::size_t>(i)];
    const Index dim = static_cast<Index>(q.size()) + 1;
    const Index *ids = block_pairs_.data() + block_offset_[static_cast<std::size_t>(i)];
    for (Index r = 0; r < dim; ++r) {
      double *row = block.data() + r * dim;
      for (Index c = 0; c < r; ++c)
        row[c] = cov[static_cast<std::size_t>(*ids++)];
      row[r] = sill;
      const Index obs = r + 1 < dim ? q[static_cast<std::size_t>(r)] : target;
      resid[static_cast<std::size_t>(r)] = data_.values(obs) - psi.mu;
    }
    const double term = conditional_nll(block.data(), resid.data(), dim);
    const double w = weights_ ? (*weights_)(target) : 1.0;
    total += w * term;
  }
  return total;
}

double Objective::eval_pairwise(const ModelParams &psi) const {
  const MaternKernel<double> kernel(psi.theta);
  const double s = psi.theta.sigma2 + psi.tau2;
  double total = 0.0;
  for (std::size_t k = 0; k < pair_d_.size(); ++k) {
    const Index i = pair_i_[k];
    const Index j = pair_j_[k];
    const double c = kernel(pair_d_[k]);
    const double det = s * s - c * c;
    if (!(det > 0))
      throw NumericalError("pairwise marginal: singular pair covariance");
    const double a = data_.values(i) - psi.mu;
    const double b = data_.values(j) - psi.mu;
    const double quad = (s * (a * a + b * b) - 2.0 * c * a * b) / det;
    const double term = kLog2Pi + 0.5 * std::log(det) + 0.5 * quad;
    const double w = weights_ ? (*weights_)(i) * (*weights_)(j) : 1.0;
    total += w * term;
  }
  return total;
}

double exact_nll(const ModelParams &psi, const Dataset &data) {
  return Objective::exact(data)(psi);
}

double vecchia_nll(const ModelParams &psi, const Dataset &data,
                   const VecchiaPlan &plan,
                   const std::optional<Eigen::VectorXd> &weights) {
  return Objective::vecchia(data, plan, weights)(psi);
}

double pairwise_marginal_nll(const ModelParams &psi, const Dataset &data,
                             const std::optional<Eigen::VectorXd> &weights,
                             double cutoff) {
  return Objective::pairwise_marginal(data, weights, cutoff)(psi);
}

Eigen::MatrixXd vecchia_implied_cov(const ModelParams &psi,
                                    const VecchiaPlan &plan,
                                    const Points &locs) {
  psi.validate();
  plan.validate();
  const Index n = plan.size();
  if (locs.rows() != n)
    throw DomainError("vecchia_implied_cov: plan and locations differ in size");
  std::vector<Index> position(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    position[static_cast<std::size_t>(plan.order[static_cast<std::size_t>(i)])] = i;

  const MaternKernel<double> kernel(psi.theta);
  const double sill = psi.theta.sigma2 + psi.tau2;
  auto cov = [&](Index a, Index b) {
    return a == b ? sill : kernel((locs.row(a) - locs.row(b)).norm());
  };

  // A = I - B is unit lower triangular in the ordered basis.
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd d(n);
  for (Index i = 0; i < n; ++i) {
    const auto &q = plan.cond_sets[static_cast<std::size_t>(i)];
    const Index target = plan.order[static_cast<std::size_t>(i)];
    const Index k = static_cast<Index>(q.size());
    if (k == 0) {
      d(i) = sill;
      continue;
    }
    Eigen::MatrixXd cqq(k, k);
    Eigen::VectorXd cqp(k);
    for (Index r = 0; r < k; ++r) {
      cqp(r) = cov(q[static_cast<std::size_t>(r)], target);
      for (Index c = 0; c < k; ++c)
        cqq(r, c) = cov(q[static_cast<std::size_t>(r)], q[static_cast<std::size_t>(c)]);
    }
    const auto llt = cholesky_or_throw(cqq, "vecchia_implied_cov");
    const Eigen::VectorXd b = llt.solve(cqp);
    d(i) = sill - cqp.dot(b);
    if (!(d(i) > 0))
      throw NumericalError("vecchia_implied_cov: conditional variance is not positive", i);
    for (Index r = 0; r < k; ++r)
      a(i, position[static_cast<std::size_t>(q[static_cast<std::size_t>(r)])]) = -b(r);
  }
  const Eigen::MatrixXd a_inv =
      a.triangularView<Eigen::UnitLower>().solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd ordered = a_inv * d.asDiagonal() * a_inv.transpose();

  Eigen::MatrixXd out(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      out(plan.order[static_cast<std::size_t>(i)], plan.order[static_cast<std::size_t>(j)]) =
          ordered(i, j);
  return 0.5 * (out + out.transpose());
}

double gaussian_kl(const Eigen::MatrixXd &sigma_true,
                   const Eigen::MatrixXd &sigma_approx) {
  if (sigma_true.rows() != sigma_approx.rows() ||
      sigma_true.cols() != sigma_approx.cols() ||
      sigma_true.rows() != sigma_true.cols())
    throw DomainError("gaussian_kl: matrices must be square and of equal size");
  const auto llt_t = cholesky_or_throw(sigma_true, "gaussian_kl (true)");
  const auto llt_a = cholesky_or_throw(sigma_approx, "gaussian_kl (approx)");
  const double trace = llt_a.solve(sigma_true).trace();
  const double n = double(sigma_true.rows());
  return 0.5 * (trace - n + log_det(llt_a) - log_det(llt_t));
}

} // namespace isiw
