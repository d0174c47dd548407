#pragma once

#include "lanegraph/core.hpp"
#include "lanegraph/scene.hpp"

namespace lanegraph::augment {

// ---------------------------------------------------------------------------
// Randomized geometric augmentation applied consistently to inputs, labels
// and affordance fields. The transform is defined in world meters: rotation
// about the grid center, then translation, then a smooth warp displacement.
// Layout geometry is transformed directly; rasters are transformed only in
// the toy-learner pipeline where no geometry is available.
// ---------------------------------------------------------------------------

struct AugmentParams {
  double rotation = 0.0;          // radians
  int translation_dx = 0;         // input-resolution cells, |.| <= 16
  int translation_dy = 0;
  GridMap warp;                   // 2x256x256 displacement in input cells;
                                  // empty means no warp
  std::uint64_t seed = 0;

  bool has_warp() const { return warp.channels == 2; }
};

// rotation ~ U[0, 2pi); translation components ~ uniform integer [-16, 16];
// warp = per-cell white noise box-smoothed (radius 16) and rescaled to max
// displacement magnitude 4 cells. Fully determined by seed.
AugmentParams sample_params(std::uint64_t seed);

// Forward transform of a world point (meters).
Vec2 transform_point(Vec2 p, const AugmentParams& params);

// Heading of a transformed direction at p, including the warp jacobian.
double transform_heading(Vec2 p, double heading, const AugmentParams& params);

// Transform all layout geometry (lanes, ports, markings) with the same
// parameters; connectivity is untouched.
scene::RoadLayout transform_layout(const scene::RoadLayout& layout,
                                   const AugmentParams& params);

enum class Interpolation { nearest, bilinear_threshold, vector };

// Raster-level application via backward mapping. resolution_scale is 1 for
// 256-cell grids and 1/2 for 128-cell grids; out-of-bounds source cells take
// `fill` (0.5 for observation channels, 0 for label/affordance channels).
// vector mode additionally rotates channel pairs (2k, 2k+1) as vectors.
GridMap apply(const GridMap& map, const AugmentParams& params,
              double resolution_scale, Interpolation interpolation,
              double fill);

}  // namespace lanegraph::augment
