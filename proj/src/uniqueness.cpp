#include "pglf/uniqueness.hpp"

#include <algorithm>
#include <cmath>

namespace pglf {

double plane_phase_at_pixel(const FringeConfig& cfg, const PlenopticIntrinsics& intr, const ProjectionMatrix& projector,
                            const Vec2& p, const Vec2& c, double Z)
{
    const double v = v_from_depth(Z, intr);
    const IncidentAngle t = chief_ray_angle(p, c, v, intr);
    const Vec2 xp = project(projector, Vec3(t.theta_x * Z, t.theta_y * Z, Z));
    return cfg.phase_of(cfg.orientation == FringeOrientation::Rows ? xp.y() : xp.x());
}

UniquenessReport check_uniqueness(const FringeConfig& cfg, const FeasibleRegion& region,
                                  const PlenopticIntrinsics& intr, const LensletGrid& grid,
                                  const ProjectionMatrix& projector, const UniquenessOptions& options)
{
    UniquenessReport rep;
    if (grid.size() == 0) return rep;
    const int stride = std::max(1, grid.size() / std::max(1, options.max_lenslets));
    const int planes = std::max(2, options.depth_samples);
    const double offsets[5][2] = {{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (int t = 0; t < grid.size(); t += stride) {
        const Vec2 c = grid.center(t);
        for (const LensletNeighbor& nb : grid.neighbors(t)) {
            const Vec2 cn = grid.center(nb.index);
            for (const auto& off : offsets) {
                const Vec2 s = c + region.r * Vec2(off[0], off[1]);
                for (int k = 0; k < planes; ++k) {
                    const double Z = region.Z_min + (region.Z_max - region.Z_min) * k / (planes - 1);
                    // The plane maps the segment projectively onto the projector line,
                    // so the phase is monotone and the endpoints bound the span.
                    const double a = plane_phase_at_pixel(cfg, intr, projector, s + region.D_min * nb.u, cn, Z);
                    const double b = plane_phase_at_pixel(cfg, intr, projector, s + region.D_max * nb.u, cn, Z);
                    const double span = std::abs(b - a);
                    if (span > rep.worst_span) {
                        rep.worst_span = span;
                        rep.worst_Z = Z;
                        rep.worst_lenslet = t;
                        rep.worst_u = nb.u;
                    }
                }
            }
        }
    }
    rep.unique = rep.worst_span < kTwoPi;
    return rep;
}

} // namespace pglf
