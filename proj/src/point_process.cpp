#include "isiw/point_process.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <vector>

namespace isiw {

std::string to_string(SamplerKind kind) {
  switch (kind) {
  case SamplerKind::LGCP:
    return "LGCP";
  case SamplerKind::SCP:
    return "SCP";
  case SamplerKind::Thomas:
    return "Thomas";
  }
  return "?";
}

SamplerKind parse_sampler_kind(const std::string &name) {
  if (name == "LGCP" || name == "lgcp")
    return SamplerKind::LGCP;
  if (name == "SCP" || name == "scp")
    return SamplerKind::SCP;
  if (name == "Thomas" || name == "thomas")
    return SamplerKind::Thomas;
  throw DomainError("unknown sampler kind '" + name + "'");
}

void SamplerSpec::validate() const {
  if (n < 1)
    throw DomainError("sampler: n must be at least 1");
  if (!std::isfinite(alpha) || !std::isfinite(beta))
    throw DomainError("sampler: alpha and beta must be finite");
  if (kind == SamplerKind::Thomas) {
    if (!(offspring_scale > 0))
      throw DomainError("sampler: offspring scale must be positive");
    if (max_retries < 1)
      throw DomainError("sampler: retry budget must be positive");
  }
}

Eigen::VectorXd compute_intensity(const FieldRealization &field,
                                  const SamplerSpec &spec) {
  spec.validate();
  const Eigen::ArrayXd s = field.values.array();
  Eigen::VectorXd out;
  switch (spec.kind) {
  case SamplerKind::LGCP:
    out = (spec.alpha + spec.beta * s).exp().matrix();
    break;
  case SamplerKind::SCP:
    out = (spec.beta / (1.0 + (-s).exp())).matrix();
    break;
  case SamplerKind::Thomas:
    throw DomainError(
        "compute_intensity: the Thomas process has no cell intensity");
  }
  if (!(out.array() > 0).all() || !out.allFinite())
    throw DomainError("compute_intensity: intensity must be positive and "
                      "finite in every cell");
  return out;
}

namespace {

// Keeps a coordinate strictly inside (lo, hi).
double inside(double v, double lo, double hi) {
  if (v <= lo)
    return std::nextafter(lo, hi);
  if (v >= hi)
    return std::nextafter(hi, lo);
  return v;
}

double reflect(double v, double lo, double hi) {
  const double len = hi - lo;
  double t = std::fmod(v - lo, 2.0 * len);
  if (t < 0)
    t += 2.0 * len;
  if (t > len)
    t = 2.0 * len - t;
  return inside(lo + t, lo, hi);
}

Location uniform_in(const Domain &d, CounterRng &rng) {
  const double u = uniform_open01(rng);
  const double v = uniform_open01(rng);
  return {inside(d.x_min + u * d.width(), d.x_min, d.x_max),
          inside(d.y_min + v * d.height(), d.y_min, d.y_max)};
}

} // namespace

Points sample_conditioned(const GridSpec &grid,
                          const Eigen::VectorXd &cell_intensity, Index n,
                          const SeedStream &seed) {
  if (n < 1)
    throw DomainError("sample_conditioned: n must be at least 1");
  if (cell_intensity.size() != grid.cell_count())
    throw DomainError("sample_conditioned: one intensity per cell required");
  if (!(cell_intensity.array() > 0).all() || !cell_intensity.allFinite())
    throw DomainError("sample_conditioned: intensities must be positive");

  // Cells have equal area, so cell probabilities are proportional to intensity.
  auto rng = seed.engine();
  std::discrete_distribution<Index> pick(cell_intensity.data(),
                                         cell_intensity.data() +
                                             cell_intensity.size());
  const double dx = grid.cell_width();
  const double dy = grid.cell_height();
  const Domain &d = grid.domain;
  Points pts(n, 2);
  for (Index k = 0; k < n; ++k) {
    const Index cell = pick(rng);
    const Index ix = cell % grid.nx;
    const Index iy = cell / grid.nx;
    const double u = uniform_open01(rng);
    const double v = uniform_open01(rng);
    pts(k, 0) = inside(d.x_min + (double(ix) + u) * dx, d.x_min, d.x_max);
    pts(k, 1) = inside(d.y_min + (double(iy) + v) * dy, d.y_min, d.y_max);
  }
  return pts;
}

ThomasSample sample_thomas(const FieldRealization &field,
                           const SamplerSpec &spec, const SeedStream &seed) {
  spec.validate();
  if (spec.kind != SamplerKind::Thomas)
    throw DomainError("sample_thomas: sampler kind must be Thomas");
  const Domain &d = field.grid.domain;
  double rate = spec.parent_rate;
  if (!(rate > 0)) {
    const double mean_offspring = (spec.beta * field.values.array()).exp().mean();
    rate = 1.2 * double(spec.n) / (d.area() * mean_offspring);
  }

  auto rng = seed.engine();
  const double scale = spec.offspring_scale;
  for (int attempt = 1; attempt <= spec.max_retries; ++attempt) {
    std::poisson_distribution<long> parent_count(rate * d.area());
    const long np = parent_count(rng);
    Points parents(np, 2);
    Eigen::VectorXd means(np);
    std::vector<Location> offspring;
    std::normal_distribution<double> normal(0.0, scale);
    for (long p = 0; p < np; ++p) {
      parents.row(p) = uniform_in(d, rng);
      means(p) = std::exp(spec.beta * field.value_at(parents.row(p)));
      std::poisson_distribution<long> count(means(p));
      const long k = count(rng);
      for (long c = 0; c < k; ++c) {
        const double ox = parents(p, 0) + normal(rng);
        const double oy = parents(p, 1) + normal(rng);
        offspring.emplace_back(reflect(ox, d.x_min, d.x_max),
                               reflect(oy, d.y_min, d.y_max));
      }
    }
    if (static_cast<Index>(offspring.size()) < spec.n)
      continue;

    // Partial Fisher-Yates: the first n entries form a uniform subsample.
    std::vector<std::size_t> idx(offspring.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < static_cast<std::size_t>(spec.n); ++i) {
      const auto span = idx.size() - i;
      const auto j = i + static_cast<std::size_t>(uniform_open01(rng) * double(span));
      std::swap(idx[i], idx[std::min(j, idx.size() - 1)]);
    }

    ThomasSample out;
    out.points.resize(spec.n, 2);
    out.intensity.resize(spec.n);
    out.parents = parents;
    out.attempts = attempt;
    const double norm = 1.0 / (2.0 * std::numbers::pi * scale * scale);
    for (Index i = 0; i < spec.n; ++i) {
      const Location x = offspring[idx[static_cast<std::size_t>(i)]];
      out.points.row(i) = x;
      double lam = 0.0;
      for (long p = 0; p < np; ++p) {
        const double px[3] = {parents(p, 0), 2 * d.x_min - parents(p, 0),
                              2 * d.x_max - parents(p, 0)};
        const double py[3] = {parents(p, 1), 2 * d.y_min - parents(p, 1),
                              2 * d.y_max - parents(p, 1)};
        double kx = 0.0, ky = 0.0;
        for (int r = 0; r < 3; ++r) {
          kx += std::exp(-0.5 * std::pow((x(0) - px[r]) / scale, 2));
          ky += std::exp(-0.5 * std::pow((x(1) - py[r]) / scale, 2));
        }
        lam += means(p) * norm * kx * ky;
      }
      // Underflow far from every parent: fall back to the smallest normal.
      out.intensity(i) = std::max(lam, std::numeric_limits<double>::min());
    }
    return out;
  }
  throw std::runtime_error("sample_thomas: retry budget exhausted before " +
                           std::to_string(spec.n) + " points were generated");
}

void write_points_csv(std::ostream &out, const Points &points) {
  out << "x,y\n";
  char buf[64];
  for (Index i = 0; i < points.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", points(i, 0), points(i, 1));
    out << buf;
  }
}

} // namespace isiw
