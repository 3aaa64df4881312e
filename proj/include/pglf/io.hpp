#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "pglf/image.hpp"

namespace pglf::io {

/// Portable float map. Single-channel ("Pf") or three-channel ("PF"),
/// little-endian (scale -1.0), rows stored bottom-to-top.
void write_pfm(const std::filesystem::path& path, const Grid<double>& channel);
void write_pfm(const std::filesystem::path& path, const std::array<const Grid<double>*, 3>& channels);
Grid<double> read_pfm(const std::filesystem::path& path);
std::vector<Grid<double>> read_pfm_channels(const std::filesystem::path& path);

/// 16-bit grayscale PNG. Values are mapped through value * scale and
/// clamped to [0, 65535] on write, divided by scale on read.
void write_png16(const std::filesystem::path& path, const Image& image, double scale = 65535.0);
Image read_png16(const std::filesystem::path& path, double scale = 65535.0);

struct PlyPoint {
    float x = 0, y = 0, z = 0;
    float quality = 0;
};

/// Binary little-endian PLY with float32 x/y/z and optional quality.
void write_ply(const std::filesystem::path& path, const std::vector<PlyPoint>& points,
               bool with_quality, const std::vector<std::string>& comments = {});
std::vector<PlyPoint> read_ply(const std::filesystem::path& path);

/// Lossless multi-channel double grid ("PGLFRAW1" header, little-endian
/// float64 payload). Used for cached stage outputs.
void write_raw(const std::filesystem::path& path, const std::vector<const Grid<double>*>& channels);
std::vector<Grid<double>> read_raw(const std::filesystem::path& path);

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& text);
std::string sha256_file(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
std::vector<unsigned char> read_bytes(const std::filesystem::path& path);

} // namespace pglf::io
