#include "isiw/intensity.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

namespace isiw {

std::string to_string(BandwidthMethod method) {
  switch (method) {
  case BandwidthMethod::Scott:
    return "scott";
  case BandwidthMethod::Diggle:
    return "diggle";
  case BandwidthMethod::Ppl:
    return "ppl";
  case BandwidthMethod::CvL:
    return "CvL";
  case BandwidthMethod::CvLAdaptive:
    return "CvL.adaptive";
  case BandwidthMethod::Fixed:
    return "fixed";
  }
  return "?";
}

BandwidthMethod parse_bandwidth_method(const std::string &name) {
  if (name == "scott")
    return BandwidthMethod::Scott;
  if (name == "diggle")
    return BandwidthMethod::Diggle;
  if (name == "ppl")
    return BandwidthMethod::Ppl;
  if (name == "CvL" || name == "cvl")
    return BandwidthMethod::CvL;
  if (name == "CvL.adaptive" || name == "cvl.adaptive")
    return BandwidthMethod::CvLAdaptive;
  if (name == "fixed")
    return BandwidthMethod::Fixed;
  throw DomainError("unknown bandwidth method '" + name + "'");
}

void BandwidthSpec::validate() const {
  if (adaptive()) {
    if (!(per_point_h.array() > 0).all() || !per_point_h.allFinite())
      throw DomainError("bandwidth: per-point bandwidths must be positive");
  } else if (!(h > 0) || !std::isfinite(h)) {
    throw DomainError("bandwidth: h must be positive and finite");
  }
}

namespace {

constexpr double kInvTwoPi = 0.5 * std::numbers::inv_pi;
constexpr double kInvSqrt2 = 0.5 * std::numbers::sqrt2;

// Isotropic bivariate normal density with sd h at squared distance r2.
double gauss_kernel(double r2, double h) {
  return std::exp(-0.5 * r2 / (h * h)) * kInvTwoPi / (h * h);
}

double axis_mass(double c, double h, double lo, double hi) {
  const double s = kInvSqrt2 / h;
  return 0.5 * (std::erfc((c - hi) * s) - std::erfc((c - lo) * s));
}

Eigen::MatrixXd squared_distances(const Points &pts) {
  const Index n = pts.rows();
  Eigen::MatrixXd d2(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      d2(i, j) = (pts.row(i) - pts.row(j)).squaredNorm();
  return d2;
}

Eigen::VectorXd edge_masses(const Points &pts, const Eigen::VectorXd &h,
                            const Domain &domain) {
  Eigen::VectorXd m(pts.rows());
  for (Index j = 0; j < pts.rows(); ++j)
    m(j) = edge_mass(pts.row(j), h(j), domain);
  return m;
}

void check_points(const Points &pts, const Domain &domain, Index min_points,
                  const char *context) {
  domain.validate();
  if (pts.rows() < min_points)
    throw DomainError(std::string(context) + ": needs at least " +
                      std::to_string(min_points) + " points");
  for (Index i = 0; i < pts.rows(); ++i)
    if (!domain.contains(pts.row(i)))
      throw DomainError(std::string(context) + ": point outside the domain");
}

// Criteria evaluated from a cached squared-distance matrix.
struct KernelGeometry {
  const Points &pts;
  const Domain &domain;
  Eigen::MatrixXd d2;

  KernelGeometry(const Points &p, const Domain &d)
      : pts(p), domain(d), d2(squared_distances(p)) {}

  Index n() const { return pts.rows(); }

  // lambda_h(x_i), optionally excluding the i-th point's own kernel.
  Eigen::VectorXd at_points(const Eigen::VectorXd &h, bool leave_one_out) const {
    const Eigen::VectorXd m = edge_masses(pts, h, domain);
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(n());
    for (Index j = 0; j < n(); ++j) {
      const double inv_m = 1.0 / m(j);
      for (Index i = 0; i < n(); ++i) {
        if (leave_one_out && i == j)
          continue;
        lam(i) += gauss_kernel(d2(i, j), h(j)) * inv_m;
      }
    }
    return lam;
  }

  Eigen::VectorXd constant(double h) const {
    return Eigen::VectorXd::Constant(n(), h);
  }

  double lscv(double h) const {
    const Eigen::VectorXd m = edge_masses(pts, constant(h), domain);
    // The product of two kernels centred at a and b is a kernel of sd
    // sqrt(2) h at a - b times a normal of sd h / sqrt(2) centred at
    // (a + b) / 2, so each pair integrates in closed form over the rectangle.
    const double h_prod = std::numbers::sqrt2 * h;
    const double h_mid = h * kInvSqrt2;
    double square_integral = 0.0;
    for (Index j = 0; j < n(); ++j) {
      square_integral +=
          gauss_kernel(0.0, h_prod) * edge_mass(pts.row(j), h_mid, domain) /
          (m(j) * m(j));
      for (Index k = j + 1; k < n(); ++k) {
        const double g = gauss_kernel(d2(j, k), h_prod);
        if (g == 0.0)
          continue;
        const Location mid = 0.5 * (pts.row(j) + pts.row(k));
        square_integral += 2.0 * g * edge_mass(mid, h_mid, domain) / (m(j) * m(k));
      }
    }
    const double loo = at_points(constant(h), true).sum();
    return square_integral - 2.0 * loo;
  }

  double ppl(double h) const {
    const Eigen::VectorXd loo = at_points(constant(h), true);
    // Each edge-corrected kernel carries unit mass inside the domain, so the
    // estimate integrates to exactly n.
    return loo.array().log().sum() - double(n());
  }

  double cvl(const Eigen::VectorXd &h) const {
    const Eigen::VectorXd lam = at_points(h, false);
    const double r = lam.cwiseInverse().sum() - domain.area();
    return r * r;
  }
};

struct GridSearch {
  Index best = -1;
  double value = 0.0;
};

template <typename Criterion>
GridSearch grid_minimise(const Eigen::VectorXd &grid, Criterion &&crit) {
  GridSearch out;
  for (Index k = 0; k < grid.size(); ++k) {
    const double v = crit(grid(k));
    if (std::isnan(v))
      continue;
    if (out.best < 0 || v < out.value) {
      out.best = k;
      out.value = v;
    }
  }
  if (out.best < 0)
    throw NumericalError("bandwidth selection: criterion undefined on the whole grid");
  return out;
}

} // namespace

double edge_mass(const Location &center, double h, const Domain &domain) {
  return axis_mass(center(0), h, domain.x_min, domain.x_max) *
         axis_mass(center(1), h, domain.y_min, domain.y_max);
}

IntensityEstimate estimate_intensity(const Points &points, const Domain &domain,
                                     const BandwidthSpec &bandwidth,
                                     const std::optional<GridSpec> &grid) {
  check_points(points, domain, 2, "estimate_intensity");
  bandwidth.validate();
  const Index n = points.rows();
  if (bandwidth.adaptive() && bandwidth.per_point_h.size() != n)
    throw DomainError("estimate_intensity: one bandwidth per point required");
  const Eigen::VectorXd h = bandwidth.adaptive()
                                ? bandwidth.per_point_h
                                : Eigen::VectorXd::Constant(n, bandwidth.h);
  const Eigen::VectorXd m = edge_masses(points, h, domain);

  auto evaluate = [&](const Points &targets) {
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(targets.rows());
    for (Index j = 0; j < n; ++j) {
      const double inv_m = 1.0 / m(j);
      for (Index i = 0; i < targets.rows(); ++i)
        lam(i) += gauss_kernel((targets.row(i) - points.row(j)).squaredNorm(),
                               h(j)) *
                  inv_m;
    }
    return lam;
  };

  IntensityEstimate est;
  est.bandwidth = bandwidth;
  est.edge_corrected = true;
  est.at_points = evaluate(points);
  if (grid) {
    grid->validate();
    est.grid = grid;
    est.on_grid = evaluate(grid->centers());
  }
  const double peak = std::max(est.at_points.maxCoeff(),
                               est.on_grid.size() ? est.on_grid.maxCoeff() : 0.0);
  const double floor = 1e-12 * peak;
  est.at_points = est.at_points.cwiseMax(floor);
  if (est.on_grid.size())
    est.on_grid = est.on_grid.cwiseMax(floor);
  return est;
}

Eigen::VectorXd bandwidth_grid(Index n, const Domain &domain) {
  const double diam = domain.diameter();
  const double lo = std::log(diam / (2.0 * double(n)));
  const double hi = std::log(diam / 2.0);
  Eigen::VectorXd grid(kBandwidthGridSize);
  for (Index k = 0; k < kBandwidthGridSize; ++k)
    grid(k) = std::exp(lo + (hi - lo) * double(k) / double(kBandwidthGridSize - 1));
  return grid;
}

double scott_bandwidth(const Points &points) {
  const Index n = points.rows();
  if (n < 2)
    throw DomainError("scott_bandwidth: needs at least 2 points");
  const Eigen::RowVector2d mean = points.colwise().mean();
  const Eigen::RowVector2d sd =
      ((points.rowwise() - mean).array().square().colwise().sum() /
       double(n - 1))
          .sqrt();
  const double h = std::sqrt(sd(0) * sd(1)) * std::pow(double(n), -1.0 / 6.0);
  if (!(h > 0))
    throw DomainError("scott_bandwidth: points have zero spread along an axis");
  return h;
}

double lscv_criterion(const Points &points, const Domain &domain, double h) {
  check_points(points, domain, 2, "lscv_criterion");
  return KernelGeometry(points, domain).lscv(h);
}

double ppl_criterion(const Points &points, const Domain &domain, double h) {
  check_points(points, domain, 2, "ppl_criterion");
  return KernelGeometry(points, domain).ppl(h);
}

double cvl_criterion(const Points &points, const Domain &domain, double h) {
  check_points(points, domain, 2, "cvl_criterion");
  const KernelGeometry geo(points, domain);
  return geo.cvl(geo.constant(h));
}

Eigen::VectorXd adaptive_bandwidths(const Eigen::VectorXd &pilot, double h0) {
  if (!(pilot.array() > 0).all())
    throw DomainError("adaptive_bandwidths: pilot intensities must be positive");
  const double log_g = pilot.array().log().mean();
  return (h0 * (pilot.array().log() - log_g).unaryExpr([](double v) {
             return std::exp(-0.5 * v);
           })).matrix();
}

double cvl_adaptive_criterion(const Points &points, const Domain &domain,
                              const Eigen::VectorXd &per_point_h) {
  check_points(points, domain, 2, "cvl_adaptive_criterion");
  return KernelGeometry(points, domain).cvl(per_point_h);
}

BandwidthSpec select_bandwidth(BandwidthMethod method, const Points &points,
                               const Domain &domain) {
  check_points(points, domain, 5, "select_bandwidth");
  BandwidthSpec spec;
  spec.method = method;
  if (method == BandwidthMethod::Scott) {
    spec.h = scott_bandwidth(points);
    return spec;
  }
  if (method == BandwidthMethod::Fixed)
    throw DomainError("select_bandwidth: 'fixed' needs an explicit bandwidth");

  const KernelGeometry geo(points, domain);
  const Eigen::VectorXd grid = bandwidth_grid(points.rows(), domain);
  GridSearch found;
  switch (method) {
  case BandwidthMethod::Diggle:
    found = grid_minimise(grid, [&](double h) { return geo.lscv(h); });
    break;
  case BandwidthMethod::Ppl:
    found = grid_minimise(grid, [&](double h) { return -geo.ppl(h); });
    break;
  case BandwidthMethod::CvL:
    found = grid_minimise(grid, [&](double h) { return geo.cvl(geo.constant(h)); });
    break;
  case BandwidthMethod::CvLAdaptive: {
    const Eigen::VectorXd pilot =
        geo.at_points(geo.constant(scott_bandwidth(points)), false);
    found = grid_minimise(grid, [&](double h0) {
      return geo.cvl(adaptive_bandwidths(pilot, h0));
    });
    spec.per_point_h = adaptive_bandwidths(pilot, grid(found.best));
    break;
  }
  default:
    break;
  }
  spec.h = grid(found.best);
  spec.at_boundary = found.best == 0 || found.best == grid.size() - 1;
  return spec;
}

WeightVector weights_from_intensity(const Eigen::VectorXd &intensity,
                                    double threshold) {
  const Index n = intensity.size();
  if (n < 1)
    throw DomainError("weights_from_intensity: no intensities given");
  if (!(intensity.array() > 0).all() || !intensity.allFinite())
    throw DomainError("weights_from_intensity: intensities must be positive");
  if (!(threshold >= 0) || !std::isfinite(threshold))
    throw DomainError("weights_from_intensity: threshold must be non-negative");

  WeightVector w;
  w.threshold = threshold;
  if ((intensity.array() == intensity(0)).all()) {
    w.weights = Eigen::VectorXd::Ones(n);
    return w;
  }
  const Eigen::ArrayXd floored =
      intensity.array().max(1e-12 * intensity.maxCoeff());
  const Eigen::ArrayXd normalised = floored * (double(n) / floored.sum());
  const Eigen::ArrayXd inverse = normalised.max(threshold).inverse();
  w.weights = (inverse * (double(n) / inverse.sum())).matrix();
  return w;
}

void write_intensity_grid_csv(std::ostream &out, const IntensityEstimate &est) {
  if (!est.grid)
    throw DomainError("intensity estimate carries no grid evaluation");
  const Points c = est.grid->centers();
  out << "x,y,lambda\n";
  char buf[96];
  for (Index i = 0; i < c.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", c(i, 0), c(i, 1),
                  est.on_grid(i));
    out << buf;
  }
}

void write_weights_csv(std::ostream &out, const Points &points,
                       const WeightVector &w) {
  out << "x,y,weight\n";
  char buf[96];
  for (Index i = 0; i < points.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", points(i, 0),
                  points(i, 1), w.weights(i));
    out << buf;
  }
}

} // namespace isiw
