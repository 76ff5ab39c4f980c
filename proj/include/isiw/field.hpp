#pragma once

#include <iosfwd>

#include "isiw/core.hpp"
#include "isiw/random.hpp"

namespace isiw {

/// Default budget for dense factorisation of the grid covariance.
inline constexpr Index kDefaultMaxCells = 4096;

/// Regular lattice of nx * ny cells tiling a domain. Cells are numbered
/// row-major with x varying fastest.
struct GridSpec {
  Domain domain;
  Index nx = 48;
  Index ny = 48;

  Index cell_count() const { return nx * ny; }
  double cell_width() const { return domain.width() / double(nx); }
  double cell_height() const { return domain.height() / double(ny); }
  double cell_area() const { return cell_width() * cell_height(); }

  /// Cell centres in cell order.
  Points centers() const;

  /// Cell containing p (points on the upper boundary belong to the last cell).
  Index cell_of(const Location &p) const;

  void validate() const;
};

/// One realisation of the latent field at the cell centres.
struct FieldRealization {
  GridSpec grid;
  Eigen::VectorXd values;
  SeedStream seed;

  /// Field value of the cell containing p.
  double value_at(const Location &p) const {
    return values(grid.cell_of(p));
  }
};

/// Draws zero-mean Matérn fields on a fixed grid. The Cholesky factor of
/// the grid covariance is computed once, so repeated draws cost one
/// triangular matrix-vector product each.
class FieldSimulator {
public:
  FieldSimulator(const GridSpec &grid, const CovParams &theta,
                 Index max_cells = kDefaultMaxCells);

  FieldRealization draw(const SeedStream &seed) const;

  const GridSpec &grid() const { return grid_; }
  const CovParams &theta() const { return theta_; }
  /// Diagonal jitter that was needed for the factorisation.
  double jitter() const { return jitter_; }

private:
  GridSpec grid_;
  CovParams theta_;
  double jitter_ = 0.0;
  Eigen::MatrixXd lower_;
};

FieldRealization simulate_field(const GridSpec &grid, const CovParams &theta,
                                const SeedStream &seed,
                                Index max_cells = kDefaultMaxCells);

/// Y_i = mu + S(cell of x_i) + eps_i with eps_i ~ N(0, tau2).
Dataset observe(const FieldRealization &field, const Points &locs, double mu,
                double tau2, const SeedStream &seed);

/// CSV with header x,y,s over the cell centres.
void write_field_csv(std::ostream &out, const FieldRealization &field);

} // namespace isiw
