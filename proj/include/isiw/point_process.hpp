#pragma once

#include <iosfwd>
#include <string>

#include "isiw/field.hpp"

namespace isiw {

enum class SamplerKind { LGCP, SCP, Thomas };

std::string to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(const std::string &name);

/// Preferential sampling design driven by a field realisation.
struct SamplerSpec {
  SamplerKind kind = SamplerKind::LGCP;
  double alpha = 0.0; ///< LGCP intercept
  double beta = 1.0;  ///< preferentiality coefficient
  /// Expected Thomas parents per unit area; <= 0 selects a rate giving an
  /// expected total of about 1.2 n points.
  double parent_rate = 0.0;
  double offspring_scale = 0.1; ///< sd of Thomas offspring displacement
  Index n = 100;
  int max_retries = 1000; ///< Thomas regeneration budget

  void validate() const;
};

/// Per-cell intensity: exp(alpha + beta S) for LGCP and
/// beta / (1 + exp(-S)) for SCP. Thomas has no deterministic cell intensity.
Eigen::VectorXd compute_intensity(const FieldRealization &field,
                                  const SamplerSpec &spec);

/// Exactly n points from the binomial process with density proportional to
/// the cell intensity: multinomial cell counts, uniform position in each cell.
Points sample_conditioned(const GridSpec &grid,
                          const Eigen::VectorXd &cell_intensity, Index n,
                          const SeedStream &seed);

struct ThomasSample {
  Points points;
  /// Conditional intensity of the accepted cluster realisation at each point
  /// (sum over parents of mean offspring times the reflected Gaussian kernel).
  Eigen::VectorXd intensity;
  Points parents;
  int attempts = 0;
};

/// Thomas cluster process conditioned on n points by regeneration until at
/// least n points exist, then uniform subsampling without replacement.
ThomasSample sample_thomas(const FieldRealization &field,
                           const SamplerSpec &spec, const SeedStream &seed);

/// Header x,y.
void write_points_csv(std::ostream &out, const Points &points);

} // namespace isiw
