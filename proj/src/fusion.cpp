#include "artrecon/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace artrecon {

void FusionParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("fusion.alpha must lie in [0,1]");
  }
  if (!std::isfinite(d_min) || !std::isfinite(d_max) || !(d_min < d_max)) {
    throw std::invalid_argument("fusion.d_min must be finite and less than fusion.d_max");
  }
}

DepthMap fuse(const DepthMap& glpn, const DepthMap& da, const FusionParams& params) {
  params.validate();
  validate(glpn);
  validate(da);
  const DepthMap resized = (da.width == glpn.width && da.height == glpn.height)
                               ? da
                               : resize_bilinear(da, glpn.width, glpn.height);
  DepthMap out(glpn.width, glpn.height);
  const double beta = 1.0 - params.alpha;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = params.alpha * glpn.values[i] + beta * resized.values[i];
  }
  return out;
}

DepthMap normalize_range(const DepthMap& d, const FusionParams& params) {
  params.validate();
  validate(d);
  const auto [lo_it, hi_it] = std::minmax_element(d.values.begin(), d.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;

  DepthMap out(d.width, d.height);
  if (!(hi > lo)) {
    std::fill(out.values.begin(), out.values.end(), 0.5 * (params.d_min + params.d_max));
    return out;
  }
  const double span = hi - lo;
  const double target = params.d_max - params.d_min;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double v = d.values[i];
    if (v == lo) {
      out.values[i] = params.d_min;
    } else if (v == hi) {
      out.values[i] = params.d_max;
    } else {
      out.values[i] = std::clamp(params.d_min + (v - lo) / span * target,
                                 params.d_min, params.d_max);
    }
  }
  return out;
}

DepthMap fuse_and_normalize(const DepthMap& glpn, const DepthMap& da,
                            const FusionParams& params) {
  return normalize_range(fuse(glpn, da, params), params);
}

}  // namespace artrecon
