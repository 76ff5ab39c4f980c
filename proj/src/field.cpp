#include "isiw/field.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

namespace isiw {

Points GridSpec::centers() const {
  Points c(cell_count(), 2);
  const double dx = cell_width();
  const double dy = cell_height();
  for (Index iy = 0; iy < ny; ++iy)
    for (Index ix = 0; ix < nx; ++ix) {
      c(iy * nx + ix, 0) = domain.x_min + (double(ix) + 0.5) * dx;
      c(iy * nx + ix, 1) = domain.y_min + (double(iy) + 0.5) * dy;
    }
  return c;
}

Index GridSpec::cell_of(const Location &p) const {
  if (!domain.contains(p))
    throw DomainError("location lies outside the grid domain");
  const auto ix = std::clamp<Index>(
      static_cast<Index>((p(0) - domain.x_min) / cell_width()), 0, nx - 1);
  const auto iy = std::clamp<Index>(
      static_cast<Index>((p(1) - domain.y_min) / cell_height()), 0, ny - 1);
  return iy * nx + ix;
}

void GridSpec::validate() const {
  domain.validate();
  if (nx < 2 || ny < 2)
    throw DomainError("grid needs at least 2 cells per axis");
}

FieldSimulator::FieldSimulator(const GridSpec &grid, const CovParams &theta,
                               Index max_cells)
    : grid_(grid), theta_(theta) {
  grid.validate();
  theta.validate();
  if (grid.cell_count() > max_cells) {
    std::ostringstream msg;
    msg << "grid has " << grid.cell_count()
        << " cells, above the dense factorisation budget of " << max_cells;
    throw DomainError(msg.str());
  }
  Eigen::MatrixXd cov = build_cov_matrix(grid.centers(), theta, 0.0);
  // Smooth fields on fine grids are numerically rank deficient; escalate the
  // jitter until the factorisation goes through.
  for (double rel = 1e-10; rel <= 1e-4; rel *= 10) {
    const double jitter = rel * theta.sigma2;
    cov.diagonal().array() += jitter - jitter_;
    jitter_ = jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) {
      lower_ = llt.matrixL();
      return;
    }
  }
  throw NumericalError("grid covariance could not be factorised");
}

FieldRealization FieldSimulator::draw(const SeedStream &seed) const {
  auto rng = seed.engine();
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(grid_.cell_count());
  for (Index i = 0; i < z.size(); ++i)
    z(i) = normal(rng);
  FieldRealization f{grid_, Eigen::VectorXd(), seed};
  f.values = lower_.triangularView<Eigen::Lower>() * z;
  return f;
}

FieldRealization simulate_field(const GridSpec &grid, const CovParams &theta,
                                const SeedStream &seed, Index max_cells) {
  return FieldSimulator(grid, theta, max_cells).draw(seed);
}

Dataset observe(const FieldRealization &field, const Points &locs, double mu,
                double tau2, const SeedStream &seed) {
  if (!(tau2 >= 0))
    throw DomainError("observe: nugget must be non-negative");
  auto rng = seed.engine();
  std::normal_distribution<double> normal;
  const double sd = std::sqrt(tau2);
  Dataset data{locs, Eigen::VectorXd(locs.rows())};
  for (Index i = 0; i < locs.rows(); ++i) {
    const double s = field.value_at(locs.row(i));
    data.values(i) = tau2 > 0 ? mu + s + sd * normal(rng) : mu + s;
  }
  return data;
}

void write_field_csv(std::ostream &out, const FieldRealization &field) {
  const Points c = field.grid.centers();
  out << "x,y,s\n";
  char buf[96];
  for (Index i = 0; i < c.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", c(i, 0), c(i, 1),
                  field.values(i));
    out << buf;
  }
}

} // namespace isiw
