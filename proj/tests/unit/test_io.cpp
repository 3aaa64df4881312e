#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "pglf/io.hpp"
#include "pglf/pipeline.hpp"

using namespace pglf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("pglf_io_" + std::to_string(::getpid())) / name;
    fs::create_directories(p.parent_path());
    return p;
}

Grid<double> float_ramp(int w, int h, double scale)
{
    Grid<double> g(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) g(x, y) = static_cast<float>(scale * (x + 0.25 * y * y) - 3);
    return g;
}

} // namespace

TEST(Pfm, SingleChannelRoundTrip)
{
    const auto g = float_ramp(37, 11, 0.37);
    const fs::path p = scratch("one.pfm");
    io::write_pfm(p, g);
    const auto back = io::read_pfm(p);
    ASSERT_EQ(back.width(), 37);
    ASSERT_EQ(back.height(), 11);
    EXPECT_EQ(back.storage(), g.storage());
}

TEST(Pfm, RowsAreStoredBottomUp)
{
    Grid<double> g(3, 2, 0.0);
    g(0, 1) = 7; // first pixel of the bottom row
    const fs::path p = scratch("order.pfm");
    io::write_pfm(p, g);
    const auto bytes = io::read_bytes(p);
    const std::string text(bytes.begin(), bytes.end());
    // three header lines: magic, size, negative (little-endian) scale
    std::size_t end = 0;
    for (int i = 0; i < 3; ++i) end = text.find('\n', end) + 1;
    EXPECT_EQ(text.substr(0, 7), "Pf\n3 2\n");
    EXPECT_LT(std::stod(text.substr(7, end - 8)), 0);
    ASSERT_EQ(bytes.size(), end + 6 * sizeof(float));
    float first;
    std::memcpy(&first, bytes.data() + end, sizeof first);
    EXPECT_EQ(first, 7.0f);
}

TEST(Pfm, ThreeChannelsAndNaN)
{
    auto a = float_ramp(8, 5, 1), b = float_ramp(8, 5, -2), c = float_ramp(8, 5, 0.5);
    c(3, 2) = std::numeric_limits<double>::quiet_NaN();
    const fs::path p = scratch("three.pfm");
    io::write_pfm(p, {&a, &b, &c});
    const auto ch = io::read_pfm_channels(p);
    ASSERT_EQ(ch.size(), 3u);
    EXPECT_EQ(ch[0].storage(), a.storage());
    EXPECT_EQ(ch[1].storage(), b.storage());
    EXPECT_TRUE(std::isnan(ch[2](3, 2)));
    EXPECT_EQ(ch[2](4, 2), c(4, 2));
}

TEST(Pfm, Errors)
{
    EXPECT_THROW(io::read_pfm(scratch("missing.pfm")), IoError);
    const fs::path p = scratch("bad.pfm");
    io::write_text(p, "P7\n3 2\n-1\n");
    EXPECT_THROW(io::read_pfm(p), IoError);
    io::write_text(p, "Pf\n3 2\n-1\nab");
    EXPECT_THROW(io::read_pfm(p), IoError); // truncated payload
}

TEST(Raw, LosslessRoundTrip)
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    Grid<double> a(13, 7), b(13, 7);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = n(rng) * 1e-7;
        b[i] = n(rng) * 1e9;
    }
    b[5] = std::numeric_limits<double>::quiet_NaN();
    const fs::path p = scratch("x.raw");
    io::write_raw(p, {&a, &b});
    const auto back = io::read_raw(p);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].storage(), a.storage());
    EXPECT_TRUE(std::isnan(back[1][5]));
    for (std::size_t i = 0; i < b.size(); ++i)
        if (i != 5) EXPECT_EQ(back[1][i], b[i]);
}

TEST(Png16, RoundTripWithinQuantisation)
{
    Image im(20, 10);
    for (std::size_t i = 0; i < im.size(); ++i) im[i] = static_cast<double>(i) / im.size();
    im[3] = 2.0; // clamps
    const fs::path p = scratch("x.png");
    io::write_png16(p, im);
    const Image back = io::read_png16(p);
    EXPECT_EQ(back[3], 1.0);
    for (std::size_t i = 0; i < im.size(); ++i)
        if (i != 3) EXPECT_NEAR(back[i], im[i], 0.5 / 65535 + 1e-12);
}

TEST(Ply, RoundTripWithAndWithoutQuality)
{
    std::vector<io::PlyPoint> pts;
    for (int i = 0; i < 100; ++i) pts.push_back({0.5f * i, -1.25f * i, 400.0f + i, 3.0f - 0.01f * i});
    const fs::path p = scratch("c.ply");
    io::write_ply(p, pts, true, {"run test"});
    auto back = io::read_ply(p);
    ASSERT_EQ(back.size(), pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_EQ(back[i].x, pts[i].x);
        EXPECT_EQ(back[i].z, pts[i].z);
        EXPECT_EQ(back[i].quality, pts[i].quality);
    }
    io::write_ply(p, pts, false);
    back = io::read_ply(p);
    ASSERT_EQ(back.size(), pts.size());
    EXPECT_EQ(back[7].y, pts[7].y);
    EXPECT_EQ(back[7].quality, 0.0f);
    const std::string text = io::read_text(p);
    EXPECT_NE(text.find("format binary_little_endian 1.0"), std::string::npos);
    EXPECT_EQ(text.find("quality"), std::string::npos);
}

TEST(Sha256, KnownVectors)
{
    EXPECT_EQ(io::sha256_hex(std::string("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(io::sha256_hex(std::string()), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const fs::path p = scratch("h.txt");
    io::write_text(p, "abc");
    EXPECT_EQ(io::sha256_file(p), io::sha256_hex(std::string("abc")));
}

// ---- config -----------------------------------------------------------------

TEST(Config, DefaultsParseAndRoundTrip)
{
    const PipelineConfig c = parse_config(default_config_json());
    EXPECT_EQ(c.system.sensor_width, 3840);
    EXPECT_EQ(c.fringe.f, 32);
    EXPECT_EQ(c.psad.w, 13);
    EXPECT_EQ(c.Z_min, 360);
    EXPECT_EQ(c.Z_max, 450);
    EXPECT_EQ(to_json(parse_config(to_json(c))), to_json(c));
}

TEST(Config, UnknownKeysRejected)
{
    Json j = default_config_json();
    j["colour"] = 1;
    EXPECT_THROW(parse_config(j), ValidationError);
    j = default_config_json();
    j["psad"]["windw"] = 13;
    EXPECT_THROW(parse_config(j), ValidationError);
    j = default_config_json();
    j["schema_version"] = 99;
    EXPECT_THROW(parse_config(j), ValidationError);
}

TEST(Config, OutOfRangeValuesRejected)
{
    for (const char* bad : {"psad.w=0", "fringe.N=2", "threads=-1", "virtual_depth=1", "filter.median_size=-3",
                            "simulate.kind=\"movie\"", "reconstruct.model=\"cubic\""}) {
        Json j = default_config_json();
        apply_override(j, bad);
        EXPECT_THROW(parse_config(j), ValidationError) << bad;
    }
    Json j = default_config_json();
    apply_override(j, "depth_range.Z_min=460");
    EXPECT_THROW(parse_config(j), ValidationError);
}

TEST(Config, Overrides)
{
    Json j = default_config_json();
    apply_override(j, "psad.w=15");
    apply_override(j, "run=hello");
    apply_override(j, "simulate.noise.sigma=0.004");
    apply_override(j, "simulate.scene=\"staircase\"");
    const PipelineConfig c = parse_config(j);
    EXPECT_EQ(c.psad.w, 15);
    EXPECT_EQ(c.run, "hello");
    EXPECT_EQ(c.simulate.noise.sigma, 0.004);
    EXPECT_EQ(c.simulate.scene, "staircase");
    EXPECT_THROW(apply_override(j, "no_equals"), ValidationError);
    EXPECT_THROW(apply_override(j, "=3"), ValidationError);
    EXPECT_THROW(apply_override(j, "psad.w.x=3"), ValidationError);
}

TEST(Config, FileMergedUnderOverrides)
{
    const fs::path p = scratch("cfg.json");
    io::write_text(p, R"({"psad": {"w": 11}, "run": "from_file"})");
    const PipelineConfig c = parse_config(load_config_json(p, {"run=from_flag"}));
    EXPECT_EQ(c.psad.w, 11);
    EXPECT_EQ(c.run, "from_flag");
    EXPECT_EQ(c.fringe.N, 6); // untouched default
    io::write_text(p, "{ not json");
    EXPECT_THROW(load_config_json(p, {}), ValidationError);
    EXPECT_THROW(load_config_json(scratch("absent.json"), {}), ValidationError);
}
