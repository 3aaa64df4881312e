#pragma once

#include <numbers>
#include <span>
#include <vector>

#include "pglf/image.hpp"

namespace pglf {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps into [0, 2pi).
double wrap_2pi(double phi);
/// Wraps into (-pi, pi].
double wrap_pi(double phi);

enum class FringeOrientation {
    Rows,    ///< intensity varies along y^p (the default)
    Columns, ///< varies along x^p; used for projector calibration
};

struct FringeConfig {
    int f = 32;
    int N = 6;
    int width = 912;
    int height = 1140;
    FringeOrientation orientation = FringeOrientation::Rows;

    void validate() const;
    /// Projector extent along which the fringe varies (H^p for rows).
    int extent() const { return orientation == FringeOrientation::Rows ? height : width; }
    /// Absolute phase of a projector coordinate along the fringe axis.
    double phase_of(double coord) const { return kTwoPi * f * coord / extent(); }
    double coord_of(double phase) const { return phase * extent() / (kTwoPi * f); }
    /// Intensity of pattern n at a projector coordinate.
    double intensity(int n, double coord) const;
};

std::vector<Image> generate_patterns(const FringeConfig& cfg);

struct PhaseMap {
    Image phase;
    Image modulation;
    Mask mask;

    int width() const { return phase.width(); }
    int height() const { return phase.height(); }
    bool valid(int x, int y) const { return mask.contains(x, y) && mask(x, y) != 0; }
};

inline constexpr double kDefaultModulationThreshold = 0.02;

/// N-step phase shifting. Pixel n of the stack is assumed shifted by 2*pi*n/N.
PhaseMap compute_phase(std::span<const Image> images, double modulation_threshold = kDefaultModulationThreshold);

/// Per-pixel mean intensity of a stack.
Image mean_intensity(std::span<const Image> images);

/// Multi-frequency temporal unwrapping. phases[i] was captured at frequency
/// freqs[i]; freqs must be increasing and start at 1. Returns the absolute
/// phase of the last (highest) frequency; the mask is the intersection.
struct AbsolutePhase {
    Image phi;
    Mask mask;
};
AbsolutePhase unwrap_temporal(std::span<const PhaseMap> phases, std::span<const int> freqs);

} // namespace pglf
