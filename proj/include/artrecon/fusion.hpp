#pragma once

#include "artrecon/raster.hpp"

namespace artrecon {

/// Weights and target range for combining the two backend depth maps.
struct FusionParams {
  double alpha = 0.97;  // weight of the global-structure (GLPN) map
  double d_min = 0.6;
  double d_max = 1.0;

  void validate() const;
};

/// alpha * glpn + (1 - alpha) * da, with `da` first resampled onto the
/// glpn raster.
DepthMap fuse(const DepthMap& glpn, const DepthMap& da, const FusionParams& params);

/// Affine map of [min(d), max(d)] onto [d_min, d_max]. The extremes land on
/// the bounds exactly; a constant map collapses to the midpoint of the range.
DepthMap normalize_range(const DepthMap& d, const FusionParams& params);

DepthMap fuse_and_normalize(const DepthMap& glpn, const DepthMap& da,
                            const FusionParams& params);

}  // namespace artrecon
