#pragma once

#include "pglf/fringe.hpp"
#include "pglf/geometry.hpp"
#include "pglf/lightfield.hpp"
#include "pglf/matching.hpp"

namespace pglf {

struct UniquenessOptions {
    int depth_samples = 9;      ///< fronto-parallel planes across [Z_min, Z_max]
    int max_lenslets = 64;      ///< lenslets sampled evenly over the grid
};

struct UniquenessReport {
    bool unique = true;
    double worst_span = 0;      ///< radians
    double worst_Z = 0;
    int worst_lenslet = -1;
    Vec2 worst_u = Vec2::Zero();
};

/// Absolute fringe phase seen by sensor pixel p of the lenslet centred at c
/// when the scene is a fronto-parallel plane at depth Z (aberration-free model).
double plane_phase_at_pixel(const FringeConfig& cfg, const PlenopticIntrinsics& intr, const ProjectionMatrix& projector,
                            const Vec2& p, const Vec2& c, double Z);

/// True iff the fringe phase along every epipolar search segment
/// s + D u, D in [D_min, D_max], spans less than one period.
UniquenessReport check_uniqueness(const FringeConfig& cfg, const FeasibleRegion& region,
                                  const PlenopticIntrinsics& intr, const LensletGrid& grid,
                                  const ProjectionMatrix& projector, const UniquenessOptions& options = {});

} // namespace pglf
