#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "isiw/likelihood.hpp"
#include "test_util.hpp"

using namespace isiw;

namespace {

const double kLog2Pi = std::log(2 * std::numbers::pi);

double univariate_nll(double y, double mu, double var) {
  return 0.5 * (kLog2Pi + std::log(var)) + 0.5 * (y - mu) * (y - mu) / var;
}

// -log N(y; mu, sigma) through an explicit inverse and determinant.
double dense_gaussian_nll(const Eigen::VectorXd &y, double mu,
                          const Eigen::MatrixXd &sigma) {
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(sigma);
  const Eigen::VectorXd r = y.array() - mu;
  return 0.5 * (double(y.size()) * kLog2Pi + std::log(lu.determinant()) +
                r.dot(lu.inverse() * r));
}

std::vector<Index> greedy_maxmin(const Points &p) {
  const Index n = p.rows();
  const Eigen::RowVector2d c = p.colwise().mean();
  Index first = 0;
  for (Index i = 1; i < n; ++i)
    if ((p.row(i) - c).norm() < (p.row(first) - c).norm())
      first = i;
  std::vector<Index> order{first};
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  used[static_cast<std::size_t>(first)] = true;
  while (static_cast<Index>(order.size()) < n) {
    Index best = -1;
    double best_d = -1;
    for (Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)])
        continue;
      double d = INFINITY;
      for (Index o : order)
        d = std::min(d, (p.row(i) - p.row(o)).norm());
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    order.push_back(best);
  }
  return order;
}

Dataset sample_data(Index n, std::mt19937_64 &rng) {
  return fixtures::random_dataset(n, rng, 2.0);
}

} // namespace

TEST(ExactNll, SingleObservation) {
  Dataset d;
  d.locations.resize(1, 2);
  d.locations << 0.4, 0.4;
  d.values = Eigen::VectorXd::Constant(1, 1.7);
  ModelParams psi{0.5, {1.3, 0.2, 1.0}, 0.2};
  EXPECT_NEAR(exact_nll(psi, d), univariate_nll(1.7, 0.5, 1.5), 1e-14);
}

TEST(ExactNll, IndependenceLimit) {
  std::mt19937_64 rng(1);
  const Dataset d = sample_data(3, rng);
  ModelParams psi{2.0, {1.2, 1e-8, 1.0}, 0.3};
  double sum = 0;
  for (Index i = 0; i < 3; ++i)
    sum += univariate_nll(d.values(i), 2.0, 1.5);
  EXPECT_NEAR(exact_nll(psi, d), sum, 1e-6);
}

TEST(ExactNll, MatchesDenseInverse) {
  std::mt19937_64 rng(2);
  for (int r = 0; r < 10; ++r) {
    const Dataset d = sample_data(10, rng);
    const ModelParams psi = fixtures::random_params(rng);
    const Eigen::MatrixXd sigma =
        build_cov_matrix(d.locations, psi.theta, psi.tau2);
    EXPECT_NEAR(exact_nll(psi, d), dense_gaussian_nll(d.values, psi.mu, sigma),
                1e-8);
  }
}

TEST(ExactNll, PermutationInvariant) {
  std::mt19937_64 rng(3);
  const Dataset d = sample_data(30, rng);
  const ModelParams psi = fixtures::random_params(rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(30);
  perm.setIdentity();
  std::shuffle(perm.indices().data(), perm.indices().data() + 30, rng);
  Dataset shuffled;
  shuffled.locations = perm * d.locations;
  shuffled.values = perm * d.values;
  EXPECT_NEAR(exact_nll(psi, shuffled), exact_nll(psi, d), 1e-10);
}

TEST(ExactNll, ReportsPivotWhenSingular) {
  Dataset d;
  d.locations.resize(2, 2);
  d.locations << 0.3, 0.3, 0.3, 0.3;
  d.values = Eigen::Vector2d(1.0, 2.0);
  try {
    exact_nll({0.0, {1.0, 0.2, 1.0}, 0.0}, d);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError &e) {
    EXPECT_EQ(e.pivot(), 1);
  }
}

TEST(Maxmin, HandExample) {
  Points p(3, 2);
  p << 0, 0, 1, 0, 0.4, 0;
  EXPECT_EQ(maxmin_order(p), (std::vector<Index>{2, 1, 0}));
}

TEST(Maxmin, SinglePoint) {
  Points p(1, 2);
  p << 0.2, 0.9;
  EXPECT_EQ(maxmin_order(p), std::vector<Index>{0});
}

TEST(Maxmin, MatchesGreedyReference) {
  std::mt19937_64 rng(4);
  for (int r = 0; r < 20; ++r) {
    const Points p = fixtures::uniform_points(12, rng);
    EXPECT_EQ(maxmin_order(p), greedy_maxmin(p));
  }
}

TEST(Maxmin, TiesGoToLowestIndex) {
  // Square corners around the centroid: all equidistant.
  Points p(4, 2);
  p << 0, 0, 1, 0, 0, 1, 1, 1;
  const auto order = maxmin_order(p);
  EXPECT_EQ(order[0], 0);
  EXPECT_EQ(order[1], 3);
}

TEST(NearestNeighbours, FullConditioning) {
  std::mt19937_64 rng(5);
  const Points p = fixtures::uniform_points(8, rng);
  const VecchiaPlan plan = make_vecchia_plan(p, 7);
  for (Index i = 0; i < 8; ++i) {
    auto got = plan.cond_sets[static_cast<std::size_t>(i)];
    std::vector<Index> expected(plan.order.begin(), plan.order.begin() + i);
    std::sort(got.begin(), got.end());
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(got, expected);
  }
}

TEST(NearestNeighbours, CollinearChain) {
  Points p(4, 2);
  p << 0, 0, 1, 0, 2, 0, 3, 0;
  const VecchiaPlan plan = nn_conditioning_sets(p, {0, 1, 2, 3}, 1);
  EXPECT_TRUE(plan.cond_sets[0].empty());
  for (std::size_t i = 1; i < 4; ++i)
    EXPECT_EQ(plan.cond_sets[i], std::vector<Index>{Index(i - 1)});
}

TEST(NearestNeighbours, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(6);
  for (int r = 0; r < 10; ++r) {
    const Points p = fixtures::uniform_points(15, rng);
    const VecchiaPlan plan = make_vecchia_plan(p, 3);
    EXPECT_NO_THROW(plan.validate());
    for (Index i = 0; i < 15; ++i) {
      const Index target = plan.order[static_cast<std::size_t>(i)];
      std::vector<std::pair<double, Index>> cand;
      for (Index k = 0; k < i; ++k) {
        const Index c = plan.order[static_cast<std::size_t>(k)];
        cand.emplace_back((p.row(c) - p.row(target)).norm(), c);
      }
      std::sort(cand.begin(), cand.end());
      std::vector<Index> expected;
      for (std::size_t k = 0; k < std::min<std::size_t>(3, cand.size()); ++k)
        expected.push_back(cand[k].second);
      EXPECT_EQ(plan.cond_sets[static_cast<std::size_t>(i)], expected);
    }
  }
}

TEST(NearestNeighbours, PlanCsv) {
  Points p(3, 2);
  p << 0, 0, 1, 0, 0.4, 0;
  std::ostringstream out;
  write_plan_csv(out, make_vecchia_plan(p, 2));
  EXPECT_EQ(out.str().substr(0, 25), "index,position,neighbors\n");
}

TEST(VecchiaPlanTest, ValidationCatchesBadPlans) {
  VecchiaPlan plan;
  plan.order = {0, 0};
  plan.cond_sets = {{}, {0}};
  plan.m = 1;
  EXPECT_THROW(plan.validate(), DomainError);
  plan.order = {1, 0};
  plan.cond_sets = {{}, {0}}; // 0 is not ordered before position 1
  EXPECT_THROW(plan.validate(), DomainError);
}

TEST(VecchiaNll, FullConditioningRecoversExact) {
  std::mt19937_64 rng(7);
  for (int r = 0; r < 5; ++r) {
    const Dataset d = sample_data(50, rng);
    const ModelParams psi = fixtures::random_params(rng);
    const VecchiaPlan plan = make_vecchia_plan(d.locations, 49);
    EXPECT_NEAR(vecchia_nll(psi, d, plan), exact_nll(psi, d), 1e-8);
  }
}

TEST(VecchiaNll, UnitWeightsAreBitIdentical) {
  std::mt19937_64 rng(8);
  const Dataset d = sample_data(60, rng);
  const ModelParams psi = fixtures::random_params(rng);
  const VecchiaPlan plan = make_vecchia_plan(d.locations, 10);
  EXPECT_EQ(vecchia_nll(psi, d, plan, Eigen::VectorXd::Ones(60)),
            vecchia_nll(psi, d, plan));
}

TEST(VecchiaNll, TwoPointWeightedClosedForm) {
  Dataset d;
  d.locations.resize(2, 2);
  d.locations << 0.2, 0.3, 0.35, 0.4;
  d.values = Eigen::Vector2d(1.1, 0.4);
  const ModelParams psi{0.5, {1.2, 0.25, 1.0}, 0.1};
  const VecchiaPlan plan = make_vecchia_plan(d.locations, 1);
  const Index first = plan.order[0];
  const Eigen::Vector2d w(0.7, 1.6);
  const double marginal = univariate_nll(d.values(first), 0.5, 1.3);
  const double joint = dense_gaussian_nll(
      d.values, 0.5, build_cov_matrix(d.locations, psi.theta, psi.tau2));
  const Index second = 1 - first;
  const double expected = w(first) * marginal + w(second) * (joint - marginal);
  EXPECT_NEAR(vecchia_nll(psi, d, plan, Eigen::VectorXd(w)), expected, 1e-12);
}

TEST(VecchiaNll, RejectsMismatchedInputs) {
  std::mt19937_64 rng(9);
  const Dataset d = sample_data(10, rng);
  const VecchiaPlan plan = make_vecchia_plan(d.locations, 3);
  const ModelParams psi = fixtures::random_params(rng);
  EXPECT_THROW(vecchia_nll(psi, d, plan, Eigen::VectorXd::Ones(9)), DomainError);
  EXPECT_THROW(vecchia_nll(psi, d, plan, Eigen::VectorXd::Zero(10)), DomainError);
  const Dataset other = sample_data(11, rng);
  EXPECT_THROW(vecchia_nll(psi, other, plan), DomainError);
}

TEST(PairwiseMarginal, TwoPointsEqualsExact) {
  std::mt19937_64 rng(10);
  const Dataset d = sample_data(2, rng);
  const ModelParams psi = fixtures::random_params(rng);
  EXPECT_NEAR(pairwise_marginal_nll(psi, d), exact_nll(psi, d), 1e-12);
}

TEST(PairwiseMarginal, MatchesDoubleLoop) {
  std::mt19937_64 rng(11);
  for (int r = 0; r < 10; ++r) {
    const Dataset d = sample_data(6, rng);
    const ModelParams psi = fixtures::random_params(rng);
    Eigen::VectorXd w(6);
    for (Index i = 0; i < 6; ++i)
      w(i) = fixtures::uniform(rng, 0.2, 2.0);
    double expected = 0;
    for (Index i = 0; i < 6; ++i)
      for (Index j = i + 1; j < 6; ++j) {
        Points pair(2, 2);
        pair.row(0) = d.locations.row(i);
        pair.row(1) = d.locations.row(j);
        const Eigen::Vector2d y(d.values(i), d.values(j));
        expected += w(i) * w(j) *
                    dense_gaussian_nll(y, psi.mu,
                                       build_cov_matrix(pair, psi.theta, psi.tau2));
      }
    EXPECT_NEAR(pairwise_marginal_nll(psi, d, w), expected, 1e-10);
  }
}

TEST(PairwiseMarginal, UnitWeightsAndInfiniteCutoff) {
  std::mt19937_64 rng(12);
  const Dataset d = sample_data(40, rng);
  const ModelParams psi = fixtures::random_params(rng);
  const double plain = pairwise_marginal_nll(psi, d);
  EXPECT_EQ(pairwise_marginal_nll(psi, d, Eigen::VectorXd::Ones(40)), plain);
  EXPECT_EQ(pairwise_marginal_nll(psi, d, std::nullopt, INFINITY), plain);
}

TEST(PairwiseMarginal, CutoffRestrictsPairs) {
  Dataset d;
  d.locations.resize(3, 2);
  d.locations << 0.1, 0.1, 0.15, 0.1, 0.9, 0.9;
  d.values = Eigen::Vector3d(1.0, 1.2, -0.3);
  const ModelParams psi{0.5, {1.0, 0.2, 1.0}, 0.1};
  Dataset near;
  near.locations = d.locations.topRows(2);
  near.values = d.values.head(2);
  EXPECT_NEAR(pairwise_marginal_nll(psi, d, std::nullopt, 0.1),
              exact_nll(psi, near), 1e-12);
  EXPECT_THROW(pairwise_marginal_nll(psi, d, std::nullopt, 0.01), DomainError);
}

TEST(ObjectiveTest, MatchesFreeFunctions) {
  std::mt19937_64 rng(13);
  const Dataset d = sample_data(40, rng);
  const VecchiaPlan plan = make_vecchia_plan(d.locations, 5);
  Eigen::VectorXd w(40);
  for (Index i = 0; i < 40; ++i)
    w(i) = fixtures::uniform(rng, 0.5, 1.5);
  const Objective ex = Objective::exact(d);
  const Objective ve = Objective::vecchia(d, plan, w);
  const Objective pm = Objective::pairwise_marginal(d, w, 0.3);
  EXPECT_EQ(ex.kind(), ObjectiveKind::Exact);
  EXPECT_TRUE(ve.weighted());
  EXPECT_FALSE(ex.weighted());
  for (int r = 0; r < 5; ++r) {
    const ModelParams psi = fixtures::random_params(rng);
    EXPECT_EQ(ex(psi), exact_nll(psi, d));
    EXPECT_EQ(ve(psi), vecchia_nll(psi, d, plan, w));
    EXPECT_EQ(pm(psi), pairwise_marginal_nll(psi, d, w, 0.3));
  }
}

TEST(ImpliedCov, FullConditioningRecoversModel) {
  std::mt19937_64 rng(14);
  const Points p = fixtures::uniform_points(25, rng);
  const ModelParams psi = fixtures::random_params(rng);
  const Eigen::MatrixXd implied =
      vecchia_implied_cov(psi, make_vecchia_plan(p, 24), p);
  const Eigen::MatrixXd exact = build_cov_matrix(p, psi.theta, psi.tau2);
  EXPECT_LT((implied - exact).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ImpliedCov, TwoPoints) {
  std::mt19937_64 rng(15);
  const Points p = fixtures::uniform_points(2, rng);
  const ModelParams psi = fixtures::random_params(rng);
  const Eigen::MatrixXd implied = vecchia_implied_cov(psi, make_vecchia_plan(p, 1), p);
  EXPECT_LT((implied - build_cov_matrix(p, psi.theta, psi.tau2)).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(ImpliedCov, DensityMatchesVecchiaNll) {
  std::mt19937_64 rng(16);
  const Points p = fixtures::uniform_points(8, rng);
  const ModelParams psi = fixtures::random_params(rng);
  const VecchiaPlan plan = make_vecchia_plan(p, 2);
  const Eigen::MatrixXd implied = vecchia_implied_cov(psi, plan, p);
  EXPECT_LT((implied - implied.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  for (int r = 0; r < 20; ++r) {
    Dataset d;
    d.locations = p;
    d.values = fixtures::normal_vector(8, rng, psi.mu, 1.5);
    EXPECT_NEAR(dense_gaussian_nll(d.values, psi.mu, implied),
                vecchia_nll(psi, d, plan), 1e-8);
  }
}

TEST(GaussianKl, Examples) {
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 1.0;
  b << 2.0;
  EXPECT_NEAR(gaussian_kl(a, b), 0.5 * (0.5 - 1 + std::log(2.0)), 1e-15);
  EXPECT_NEAR(gaussian_kl(a, b), 0.09657, 1e-5);
  std::mt19937_64 rng(17);
  const Points p = fixtures::uniform_points(10, rng);
  const Eigen::MatrixXd s = build_cov_matrix(p, {1, 0.2, 1}, 0.1);
  EXPECT_NEAR(gaussian_kl(s, s), 0.0, 1e-12);
}

TEST(GaussianKl, NonincreasingInConditioningSize) {
  std::mt19937_64 rng(18);
  for (int r = 0; r < 5; ++r) {
    const Points p = fixtures::uniform_points(30, rng);
    const ModelParams psi = fixtures::random_params(rng);
    const Eigen::MatrixXd truth = build_cov_matrix(p, psi.theta, psi.tau2);
    const auto order = maxmin_order(p);
    double prev = INFINITY;
    for (Index m : {1, 2, 5, 10, 29}) {
      const double kl =
          gaussian_kl(truth, vecchia_implied_cov(psi, nn_conditioning_sets(p, order, m), p));
      EXPECT_GE(kl, -1e-10);
      EXPECT_LE(kl, prev + 1e-10) << "m=" << m;
      prev = kl;
    }
    EXPECT_NEAR(prev, 0.0, 1e-10);
  }
}
