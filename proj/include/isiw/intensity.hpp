#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "isiw/field.hpp"

namespace isiw {

/// Winsorization threshold on normalised intensities used by default.
inline constexpr double kDefaultWinsorThreshold = 1e-2;

/// Number of candidate bandwidths scanned by the data-driven selectors.
inline constexpr Index kBandwidthGridSize = 64;

enum class BandwidthMethod { Scott, Diggle, Ppl, CvL, CvLAdaptive, Fixed };

std::string to_string(BandwidthMethod method);
BandwidthMethod parse_bandwidth_method(const std::string &name);

struct BandwidthSpec {
  BandwidthMethod method = BandwidthMethod::Fixed;
  /// Global bandwidth; for the adaptive method this is the scale h0.
  double h = 0.0;
  /// Per-point bandwidths (adaptive method only).
  Eigen::VectorXd per_point_h;
  /// The selector's optimum sat on the edge of the search grid.
  bool at_boundary = false;

  bool adaptive() const { return per_point_h.size() > 0; }
  void validate() const;
};

struct IntensityEstimate {
  Eigen::VectorXd at_points;
  std::optional<GridSpec> grid;
  Eigen::VectorXd on_grid;
  BandwidthSpec bandwidth;
  bool edge_corrected = true;
};

/// Normalised inverse-intensity weights; they sum to n.
struct WeightVector {
  Eigen::VectorXd weights;
  double threshold = kDefaultWinsorThreshold;
};

/// Mass of the isotropic Gaussian N(center, h^2 I) inside the domain.
double edge_mass(const Location &center, double h, const Domain &domain);

/// Edge-corrected Gaussian kernel estimate
///   lambda(x) = sum_s h_s^{-2} k(|x - s| / h_s) / w_{h_s}(s),
/// where w_h(s) is the kernel mass centred at s that falls inside the domain.
/// Evaluated at the data points and, when requested, at grid cell centres.
IntensityEstimate estimate_intensity(const Points &points, const Domain &domain,
                                     const BandwidthSpec &bandwidth,
                                     const std::optional<GridSpec> &grid = {});

/// 64 log-spaced bandwidths from diameter/(2n) to diameter/2.
Eigen::VectorXd bandwidth_grid(Index n, const Domain &domain);

/// Normal-reference rule: geometric mean of sd_axis * n^{-1/6}.
double scott_bandwidth(const Points &points);

/// Least-squares cross-validation risk: int lambda_h^2 - 2 sum_i lambda_{h,-i}(x_i).
double lscv_criterion(const Points &points, const Domain &domain, double h);

/// Leave-one-out Poisson likelihood: sum_i log lambda_{h,-i}(x_i) - int lambda_h.
double ppl_criterion(const Points &points, const Domain &domain, double h);

/// Cronie-van Lieshout discrepancy (sum_i 1/lambda_h(x_i) - |D|)^2.
double cvl_criterion(const Points &points, const Domain &domain, double h);

/// Per-point bandwidths h0 (pilot_i / g)^{-1/2}, g the geometric mean of pilot.
Eigen::VectorXd adaptive_bandwidths(const Eigen::VectorXd &pilot, double h0);

/// CvL discrepancy of the adaptive estimator with the given per-point bandwidths.
double cvl_adaptive_criterion(const Points &points, const Domain &domain,
                              const Eigen::VectorXd &per_point_h);

/// Runs the requested selector. Fixed is not a selector and is rejected.
BandwidthSpec select_bandwidth(BandwidthMethod method, const Points &points,
                               const Domain &domain);

/// Normalise intensities to sum to n, raise values below the threshold to
/// the threshold, invert, and renormalise so the weights sum to n.
WeightVector weights_from_intensity(const Eigen::VectorXd &intensity,
                                    double threshold = kDefaultWinsorThreshold);

inline WeightVector weights_from_intensity(const IntensityEstimate &est,
                                           double threshold = kDefaultWinsorThreshold) {
  return weights_from_intensity(est.at_points, threshold);
}

/// Header x,y,lambda over the grid cell centres.
void write_intensity_grid_csv(std::ostream &out, const IntensityEstimate &est);

/// Header x,y,weight.
void write_weights_csv(std::ostream &out, const Points &points,
                       const WeightVector &w);

} // namespace isiw
