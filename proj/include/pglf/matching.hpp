#pragma once

#include <limits>
#include <span>
#include <vector>

#include "pglf/fringe.hpp"
#include "pglf/lightfield.hpp"

namespace pglf {

/// Disparity search interval and usable template radius induced by a depth range.
struct FeasibleRegion {
    double D_min = 0;
    double D_max = 0;
    double r = 0;
    double Z_min = 0;
    double Z_max = 0;
    double v_min = 1;
    double v_max = 1;
};

FeasibleRegion compute_feasible_region(double Z_min, double Z_max, const PlenopticIntrinsics& intr);

/// Where the binary weights of a candidate window come from.
enum class WeightSource {
    Template, ///< tangent plane at the template pixel, indexed by window offset
    Target,   ///< tangent plane re-anchored at the candidate target centre
};

struct PsadConfig {
    int w = 13;
    double tau1 = 0.4;
    double sigma_s = 0;            ///< <= 0 selects 0.5 * w
    double sigma_phi_scale = 3.0;
    double tau2_scale = 2.0;
    double gate_cos = 0.5;
    double disparity_step = 0.05;
    double coarse_step = 0.5;      ///< coarse pass spacing; <= 0 searches every step
    double min_overlap = 0.25;     ///< minimum |E| as a fraction of w*w
    bool use_weights = true;       ///< false: W == 1
    bool truncate = true;          ///< false: tau2 = infinity
    bool refine = true;            ///< parabolic sub-step refinement
    WeightSource weight_source = WeightSource::Template;

    void validate() const;
    double spatial_sigma() const { return sigma_s > 0 ? sigma_s : 0.5 * w; }
    int half() const { return w / 2; }
    /// Plain SAD on wrap-aware phase differences.
    static PsadConfig sad();
};

struct Gradient {
    Vec2 g = Vec2::Zero();
    bool valid = false;
};

/// Median of wrap-aware central differences over a 7x7 window. When a grid
/// is given only differences inside the lenslet of s are used.
Gradient phase_gradient(const PhaseMap& phase, Pixel s, const LensletGrid* grid = nullptr);

struct WeightWindow {
    int w = 0;
    Vec2 g = Vec2::Zero();
    Vec2 u = Vec2::Zero();
    double gu = 0;        ///< |g . u|
    double sigma_phi = 0;
    double tau2 = std::numeric_limits<double>::infinity();
    std::vector<double> W0;           ///< continuous weight, row-major w x w
    std::vector<double> W;            ///< binary weight
    std::vector<std::uint8_t> inside; ///< template pixel valid (and in its lenslet)

    std::size_t at(int dx, int dy) const
    {
        return static_cast<std::size_t>(dy + w / 2) * static_cast<std::size_t>(w) + static_cast<std::size_t>(dx + w / 2);
    }
};

/// Tangent-plane weights around the template pixel s_j for epipolar direction
/// u; template_lenslet >= 0 restricts the window to that lenslet.
WeightWindow psad_weight(const PhaseMap& phase, Pixel s_j, const Vec2& g, const Vec2& u, const PsadConfig& cfg,
                         const LensletGrid* grid = nullptr, int template_lenslet = -1);

struct CostValue {
    double cost = 0;
    int n = 0;          ///< |E|
    int n_weighted = 0; ///< members of E with W = 1
    bool defined = false;
    bool degenerate = false;
};

/// Bilinear wrapped-phase sample at a sub-pixel point inside one lenslet.
/// All four taps must be valid and belong to the lenslet.
bool sample_phase(const PhaseMap& phase, const LensletGrid& grid, int lenslet, const Vec2& p, double& out);

double phase_distance(double a, double b);

CostValue psad_cost(const PhaseMap& phase, Pixel s_j, double D, int template_lenslet, int target_lenslet,
                    const WeightWindow& W, const PsadConfig& cfg, const LensletGrid& grid);

struct DisparityField {
    Image D;             ///< NaN where invalid
    Grid<std::uint8_t> count;
    Mask valid;
    Image cost;          ///< mean of the per-direction minimum costs
    FeasibleRegion region;

    int width() const { return D.width(); }
    int height() const { return D.height(); }
    bool ok(int x, int y) const { return valid.contains(x, y) && valid(x, y) != 0; }
    std::size_t valid_count() const;
};

/// Per-direction outcome used by tests and diagnostics.
struct DirectionMatch {
    int neighbor = -1;
    double D = 0;
    double cost = 0;
    bool found = false;
};

std::vector<double> disparity_candidates(const FeasibleRegion& region, double step);

/// Full Algorithm-2 matching over every lenslet.
DisparityField match_lenslets(const PhaseMap& phase, const LensletGrid& grid, const FeasibleRegion& region,
                              const PsadConfig& cfg);

/// Same matcher restricted to the given template pixels.
DisparityField match_pixels(const PhaseMap& phase, const LensletGrid& grid, const FeasibleRegion& region,
                            const PsadConfig& cfg, std::span<const Pixel> pixels);

/// Reference evaluation of one template pixel through psad_cost, one
/// candidate at a time. Slow; used for verification and the Target weight mode.
std::vector<DirectionMatch> match_pixel_reference(const PhaseMap& phase, const LensletGrid& grid,
                                                  const FeasibleRegion& region, const PsadConfig& cfg, Pixel s_j);

} // namespace pglf
