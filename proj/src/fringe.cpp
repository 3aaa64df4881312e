#include "pglf/fringe.hpp"

#include <cmath>
#include <string>

namespace pglf {

double wrap_2pi(double phi)
{
    double r = std::fmod(phi, kTwoPi);
    if (r < 0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

double wrap_pi(double phi)
{
    double r = wrap_2pi(phi);
    if (r > std::numbers::pi) r -= kTwoPi;
    return r;
}

void FringeConfig::validate() const
{
    require(N >= 3, "fringe: N must be at least 3, got " + std::to_string(N));
    require(width > 0 && height > 0, "fringe: projector dimensions must be positive");
    require(f >= 1, "fringe: frequency must be at least 1");
    require(2 * f < extent(), "fringe: frequency " + std::to_string(f) + " violates Nyquist on the projector grid");
}

double FringeConfig::intensity(int n, double coord) const
{
    return 0.5 + 0.5 * std::cos(phase_of(coord) - kTwoPi * n / N);
}

std::vector<Image> generate_patterns(const FringeConfig& cfg)
{
    cfg.validate();
    std::vector<Image> out;
    out.reserve(static_cast<std::size_t>(cfg.N));
    for (int n = 0; n < cfg.N; ++n) {
        Image img(cfg.width, cfg.height);
        for (int y = 0; y < cfg.height; ++y)
            for (int x = 0; x < cfg.width; ++x)
                img(x, y) = cfg.intensity(n, cfg.orientation == FringeOrientation::Rows ? y : x);
        out.push_back(std::move(img));
    }
    return out;
}

PhaseMap compute_phase(std::span<const Image> images, double modulation_threshold)
{
    validate_stack(images, 3, "compute_phase");
    const int N = static_cast<int>(images.size());
    const int w = images.front().width(), h = images.front().height();
    std::vector<double> sn(static_cast<std::size_t>(N)), cs(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        sn[static_cast<std::size_t>(n)] = std::sin(kTwoPi * n / N);
        cs[static_cast<std::size_t>(n)] = std::cos(kTwoPi * n / N);
    }
    PhaseMap pm{Image(w, h), Image(w, h), Mask(w, h, 0)};
    const std::size_t total = images.front().size();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(total); ++i) {
        double num = 0, den = 0;
        for (int n = 0; n < N; ++n) {
            const double v = images[static_cast<std::size_t>(n)][static_cast<std::size_t>(i)];
            num += v * sn[static_cast<std::size_t>(n)];
            den += v * cs[static_cast<std::size_t>(n)];
        }
        const double mod = 2.0 / N * std::sqrt(num * num + den * den);
        pm.modulation[static_cast<std::size_t>(i)] = mod;
        pm.phase[static_cast<std::size_t>(i)] = wrap_2pi(std::atan2(num, den));
        pm.mask[static_cast<std::size_t>(i)] = mod >= modulation_threshold && mod > 0 ? 1 : 0;
    }
    return pm;
}

Image mean_intensity(std::span<const Image> images)
{
    validate_stack(images, 1, "mean_intensity");
    Image out(images.front().width(), images.front().height(), 0.0);
    for (const Image& img : images)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += img[i];
    for (double& v : out.storage()) v /= static_cast<double>(images.size());
    return out;
}

AbsolutePhase unwrap_temporal(std::span<const PhaseMap> phases, std::span<const int> freqs)
{
    require(!phases.empty() && phases.size() == freqs.size(), "unwrap_temporal: one frequency per phase map");
    require(freqs.front() == 1, "unwrap_temporal: the first frequency must be 1");
    for (std::size_t i = 1; i < freqs.size(); ++i)
        require(freqs[i] > freqs[i - 1], "unwrap_temporal: frequencies must increase");
    for (const auto& p : phases)
        require(p.phase.same_shape(phases.front().phase), "unwrap_temporal: phase maps differ in shape");
    const int w = phases.front().width(), h = phases.front().height();
    AbsolutePhase out{phases.front().phase, phases.front().mask};
    for (std::size_t k = 1; k < phases.size(); ++k) {
        const double ratio = static_cast<double>(freqs[k]) / freqs[k - 1];
        for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
            const double phi = phases[k].phase[i];
            const double order = std::round((out.phi[i] * ratio - phi) / kTwoPi);
            out.phi[i] = phi + kTwoPi * order;
            out.mask[i] = out.mask[i] && phases[k].mask[i];
        }
    }
    return out;
}

} // namespace pglf
