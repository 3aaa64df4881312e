#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pglf/fringe.hpp"
#include "pglf/simulator.hpp"
#include "pglf/uniqueness.hpp"

using namespace pglf;

namespace {

FringeConfig config(int f, int N, int w = 16, int h = 240)
{
    FringeConfig c;
    c.f = f;
    c.N = N;
    c.width = w;
    c.height = h;
    return c;
}

double ramp_error(const PhaseMap& pm, const FringeConfig& c)
{
    double worst = 0;
    for (int y = 0; y < pm.height(); ++y)
        for (int x = 0; x < pm.width(); ++x) {
            const double ramp = kTwoPi * c.f * y / c.height;
            worst = std::max(worst, std::abs(std::remainder(pm.phase(x, y) - ramp, kTwoPi)));
        }
    return worst;
}

} // namespace

TEST(Fringe, PatternValues)
{
    auto p = generate_patterns(config(1, 3));
    ASSERT_EQ(p.size(), 3u);
    EXPECT_NEAR(p[0](0, 0), 1.0, 1e-15);

    auto q = generate_patterns(config(1, 4));
    EXPECT_NEAR(q[0](3, 120), 0.0, 1e-15);
}

TEST(Fringe, ColumnsConstantWithFullPeriods)
{
    const FringeConfig c = config(32, 6, 20, 1140);
    const auto p = generate_patterns(c);
    ASSERT_EQ(p.size(), 6u);
    for (const auto& img : p) {
        for (int y = 0; y < c.height; ++y)
            for (int x = 1; x < c.width; ++x) ASSERT_EQ(img(x, y), img(0, y));
        for (int y = 0; y < c.height; ++y) {
            ASSERT_GE(img(0, y), 0.0);
            ASSERT_LE(img(0, y), 1.0);
        }
    }
    // maxima of pattern 0 sit at y = k * H / f, one per period
    int peaks = 0;
    for (int y = 0; y < c.height; ++y) {
        const double prev = p[0](0, (y + c.height - 1) % c.height), next = p[0](0, (y + 1) % c.height);
        if (p[0](0, y) > prev && p[0](0, y) >= next) ++peaks;
    }
    EXPECT_EQ(peaks, 32);
}

TEST(Fringe, RejectsBadConfig)
{
    EXPECT_THROW(generate_patterns(config(1, 2)), ValidationError);
    EXPECT_THROW(generate_patterns(config(0, 3)), ValidationError);
    EXPECT_THROW(generate_patterns(config(120, 3)), ValidationError);
    FringeConfig c = config(1, 3);
    c.width = 0;
    EXPECT_THROW(generate_patterns(c), ValidationError);
}

TEST(Fringe, RoundTripAllSettings)
{
    for (int N : {3, 4, 6, 8})
        for (int f : {1, 8, 32}) {
            const FringeConfig c = config(f, N, 8, 1140);
            const PhaseMap pm = compute_phase(generate_patterns(c));
            EXPECT_LE(ramp_error(pm, c), 1e-9) << "N=" << N << " f=" << f;
        }
}

TEST(Fringe, WrappedRange)
{
    const FringeConfig c = config(8, 4, 8, 1140);
    const PhaseMap pm = compute_phase(generate_patterns(c));
    for (int y = 0; y < pm.height(); ++y)
        for (int x = 0; x < pm.width(); ++x) {
            ASSERT_TRUE(pm.valid(x, y));
            ASSERT_GE(pm.phase(x, y), 0.0);
            ASSERT_LT(pm.phase(x, y), kTwoPi);
        }
}

TEST(Fringe, OffsetAndGainInvariance)
{
    const FringeConfig c = config(8, 6, 8, 600);
    auto imgs = generate_patterns(c);
    const PhaseMap ref = compute_phase(imgs);
    for (auto& img : imgs)
        for (auto& v : img.storage()) v = 0.3 + 2.7 * v;
    const PhaseMap alt = compute_phase(imgs);
    for (std::size_t i = 0; i < ref.phase.size(); ++i)
        EXPECT_LE(std::abs(std::remainder(alt.phase[i] - ref.phase[i], kTwoPi)), 1e-12);
}

TEST(Fringe, ConstantImagesMaskEverything)
{
    std::vector<Image> imgs(4, Image(10, 10, 0.5));
    const PhaseMap pm = compute_phase(imgs);
    for (std::size_t i = 0; i < pm.mask.size(); ++i) EXPECT_EQ(pm.mask[i], 0);
}

TEST(Fringe, ComputePhaseErrors)
{
    std::vector<Image> two(2, Image(4, 4, 0.5));
    EXPECT_THROW(compute_phase(two), ValidationError);
    std::vector<Image> mixed{Image(4, 4, 0.5), Image(4, 4, 0.5), Image(5, 4, 0.5)};
    EXPECT_THROW(compute_phase(mixed), ValidationError);
}

TEST(Fringe, ModulationFormula)
{
    // I_n = A + B cos(phi - delta_n) gives modulation B
    const int N = 5;
    std::vector<Image> imgs;
    for (int n = 0; n < N; ++n) imgs.emplace_back(1, 1, 0.4 + 0.25 * std::cos(1.1 - kTwoPi * n / N));
    const PhaseMap pm = compute_phase(imgs);
    EXPECT_NEAR(pm.modulation(0, 0), 0.25, 1e-12);
    EXPECT_NEAR(pm.phase(0, 0), 1.1, 1e-12);
}

TEST(Fringe, UniformNoiseMonteCarlo)
{
    // 1e5 pixels, N = 6, additive uniform noise of amplitude 0.01. The noise
    // vector sum is at most N * eps against a signal magnitude of N * B / 2,
    // so |phase error| <= asin(2 eps / B) with B = 1/2.
    const int N = 6, W = 100, H = 1000;
    const double eps = 0.01;
    const double bound = std::asin(2 * eps / 0.5);
    const FringeConfig c = config(8, N, W, H);
    auto imgs = generate_patterns(c);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-eps, eps);
    for (auto& img : imgs)
        for (auto& v : img.storage()) v += u(rng);
    const PhaseMap pm = compute_phase(imgs, 0.0);

    double worst = 0, worst_oracle = 0, max_diff = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double s = 0, co = 0;
            for (int n = 0; n < N; ++n) {
                s += imgs[n](x, y) * std::sin(kTwoPi * n / N);
                co += imgs[n](x, y) * std::cos(kTwoPi * n / N);
            }
            const double oracle = std::atan2(s, co);
            const double truth = kTwoPi * c.f * y / H;
            max_diff = std::max(max_diff, std::abs(std::remainder(pm.phase(x, y) - oracle, kTwoPi)));
            worst = std::max(worst, std::abs(std::remainder(pm.phase(x, y) - truth, kTwoPi)));
            worst_oracle = std::max(worst_oracle, std::abs(std::remainder(oracle - truth, kTwoPi)));
        }
    EXPECT_LE(max_diff, 1e-12);
    EXPECT_NEAR(worst, worst_oracle, 1e-12);
    EXPECT_LE(worst, bound);
    EXPECT_GT(worst, 0.1 * bound); // the noise is actually there
}

TEST(Fringe, TemporalUnwrapRecoversAbsolutePhase)
{
    const std::vector<int> freqs{1, 8, 32};
    const std::vector<int> steps{3, 3, 6};
    std::vector<PhaseMap> maps;
    for (std::size_t i = 0; i < freqs.size(); ++i) maps.push_back(compute_phase(generate_patterns(config(freqs[i], steps[i], 4, 1140))));
    const AbsolutePhase ap = unwrap_temporal(maps, freqs);
    for (int y = 0; y < 1140; ++y) ASSERT_NEAR(ap.phi(1, y), kTwoPi * 32 * y / 1140.0, 1e-8);
    const std::vector<int> bad{2, 8, 32};
    EXPECT_THROW(unwrap_temporal(maps, bad), ValidationError);
}

// ---- uniqueness -------------------------------------------------------------

namespace {

struct QuarterRig {
    SimulatedSystem sys;
    FeasibleRegion region;
};

const QuarterRig& rig()
{
    static const QuarterRig r = [] {
        SystemSpec s;
        s.sensor_width = 1920;
        s.sensor_height = 1080;
        QuarterRig q{make_system(s), {}};
        q.region = compute_feasible_region(360, 450, q.sys.intr);
        return q;
    }();
    return r;
}

FringeConfig projector_fringe(int f)
{
    FringeConfig c;
    c.f = f;
    c.N = 6;
    c.width = rig().sys.projector_spec.width;
    c.height = rig().sys.projector_spec.height;
    return c;
}

/// Direct span evaluation along one epipolar segment, independent of the checker's sampling.
double direct_span(int f, int lenslet, const Vec2& u, double Z)
{
    // densely sampled phase along every template offset the checker visits;
    // target pixels belong to the neighbour, so its centre defines the ray
    const auto& r = rig();
    const Vec2 c = r.sys.grid.center(lenslet);
    Vec2 cn = c;
    for (const auto& nb : r.sys.grid.neighbors(lenslet))
        if ((nb.u - u).norm() < 1e-12) cn = r.sys.grid.center(nb.index);
    const FringeConfig cfg = projector_fringe(f);
    const double offsets[5][2] = {{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    double best = 0;
    for (const auto& off : offsets) {
        const Vec2 s = c + r.region.r * Vec2(off[0], off[1]);
        double lo = 1e300, hi = -1e300;
        for (int i = 0; i <= 400; ++i) {
            const double D = r.region.D_min + (r.region.D_max - r.region.D_min) * i / 400.0;
            const double p = plane_phase_at_pixel(cfg, r.sys.intr, r.sys.projector, s + D * u, cn, Z);
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
        best = std::max(best, hi - lo);
    }
    return best;
}

} // namespace

TEST(Uniqueness, LowFrequencyIsUnique)
{
    const auto& r = rig();
    const UniquenessReport rep = check_uniqueness(projector_fringe(1), r.region, r.sys.intr, r.sys.grid, r.sys.projector);
    EXPECT_TRUE(rep.unique);
    EXPECT_LT(rep.worst_span, kTwoPi);
}

TEST(Uniqueness, VeryHighFrequencyIsAmbiguous)
{
    const auto& r = rig();
    const int f_max = (projector_fringe(1).height - 1) / 2;
    const UniquenessReport rep = check_uniqueness(projector_fringe(f_max), r.region, r.sys.intr, r.sys.grid, r.sys.projector);
    EXPECT_FALSE(rep.unique);
    EXPECT_GE(rep.worst_span, kTwoPi);
}

TEST(Uniqueness, SpanScalesWithFrequencyAndMatchesDirectEvaluation)
{
    const auto& r = rig();
    const UniquenessReport a = check_uniqueness(projector_fringe(8), r.region, r.sys.intr, r.sys.grid, r.sys.projector);
    const UniquenessReport b = check_uniqueness(projector_fringe(32), r.region, r.sys.intr, r.sys.grid, r.sys.projector);
    EXPECT_NEAR(b.worst_span / a.worst_span, 4.0, 1e-6);
    ASSERT_GE(b.worst_lenslet, 0);
    EXPECT_NEAR(direct_span(32, b.worst_lenslet, b.worst_u, b.worst_Z), b.worst_span, 1e-3 * b.worst_span);
}

TEST(Uniqueness, BoundaryFrequencyScan)
{
    // f* from the checker equals the first frequency whose worst span, scaled
    // linearly from the f = 1 worst case, reaches 2 pi.
    const auto& r = rig();
    const double span1 = check_uniqueness(projector_fringe(1), r.region, r.sys.intr, r.sys.grid, r.sys.projector).worst_span;
    int f_star = -1;
    for (int f = 1; f <= 256; ++f)
        if (!check_uniqueness(projector_fringe(f), r.region, r.sys.intr, r.sys.grid, r.sys.projector).unique) {
            f_star = f;
            break;
        }
    ASSERT_GT(f_star, 1);
    EXPECT_LT((f_star - 1) * span1, kTwoPi);
    EXPECT_GE(f_star * span1, kTwoPi * (1 - 1e-9));
    EXPECT_LT(32, f_star); // the working frequency is unique on this rig
}
