#include "pglf/io.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace pglf::io {
namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

std::ofstream open_out(const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    return in;
}

void write_pfm_impl(const std::filesystem::path& path, const std::vector<const Grid<double>*>& channels)
{
    const Grid<double>& first = *channels.front();
    for (const auto* channel : channels)
        if (!channel->same_shape(first)) throw ValidationError("pfm channels differ in shape");
    auto out = open_out(path);
    out << (channels.size() == 3 ? "PF" : "Pf") << "\n"
        << first.width() << " " << first.height() << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(first.width()) * channels.size());
    for (int y = first.height() - 1; y >= 0; --y) {
        for (int x = 0; x < first.width(); ++x)
            for (std::size_t c = 0; c < channels.size(); ++c)
                row[static_cast<std::size_t>(x) * channels.size() + c] =
                    static_cast<float>((*channels[c])(x, y));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace

void write_pfm(const std::filesystem::path& path, const Grid<double>& channel)
{
    write_pfm_impl(path, {&channel});
}

void write_pfm(const std::filesystem::path& path, const std::array<const Grid<double>*, 3>& channels)
{
    write_pfm_impl(path, {channels[0], channels[1], channels[2]});
}

std::vector<Grid<double>> read_pfm_channels(const std::filesystem::path& path)
{
    auto in = open_in(path);
    std::string magic;
    int width = 0, height = 0;
    double scale = 0;
    in >> magic >> width >> height >> scale;
    in.get();
    if (!in || (magic != "Pf" && magic != "PF") || width <= 0 || height <= 0)
        throw IoError("malformed pfm header: " + path.string());
    if (scale > 0) throw IoError("big-endian pfm not supported: " + path.string());
    const std::size_t nc = magic == "PF" ? 3 : 1;
    std::vector<Grid<double>> channels(nc, Grid<double>(width, height));
    std::vector<float> row(static_cast<std::size_t>(width) * nc);
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw IoError("truncated pfm: " + path.string());
        for (int x = 0; x < width; ++x)
            for (std::size_t c = 0; c < nc; ++c)
                channels[c](x, y) = row[static_cast<std::size_t>(x) * nc + c];
    }
    return channels;
}

Grid<double> read_pfm(const std::filesystem::path& path)
{
    auto channels = read_pfm_channels(path);
    return std::move(channels.front());
}

void write_png16(const std::filesystem::path& path, const Image& image, double scale)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!file) throw IoError("cannot open for writing: " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialisation failed");
    }
    std::vector<png_byte> row(static_cast<std::size_t>(image.width()) * 2);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png write failed: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()),
                 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const double scaled = std::clamp(std::round(image(x, y) * scale), 0.0, 65535.0);
            const auto value = static_cast<std::uint16_t>(scaled);
            row[2 * static_cast<std::size_t>(x)] = static_cast<png_byte>(value >> 8);
            row[2 * static_cast<std::size_t>(x) + 1] = static_cast<png_byte>(value & 0xff);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png16(const std::filesystem::path& path, double scale)
{
    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!file) throw IoError("cannot open for reading: " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png read failed: " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("expected 16-bit grayscale png: " + path.string());
    }
    Image image(width, height);
    std::vector<png_byte> row(static_cast<std::size_t>(width) * 2);
    for (int y = 0; y < height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < width; ++x) {
            const unsigned value = (static_cast<unsigned>(row[2 * static_cast<std::size_t>(x)]) << 8) |
                                   row[2 * static_cast<std::size_t>(x) + 1];
            image(x, y) = value / scale;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void write_ply(const std::filesystem::path& path, const std::vector<PlyPoint>& points, bool with_quality,
               const std::vector<std::string>& comments)
{
    auto out = open_out(path);
    out << "ply\nformat binary_little_endian 1.0\n";
    for (const auto& comment : comments) out << "comment " << comment << "\n";
    out << "element vertex " << points.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n";
    if (with_quality) out << "property float quality\n";
    out << "end_header\n";
    for (const PlyPoint& p : points) {
        const float xyz[4] = {p.x, p.y, p.z, p.quality};
        out.write(reinterpret_cast<const char*>(xyz), static_cast<std::streamsize>((with_quality ? 4 : 3) * sizeof(float)));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<PlyPoint> read_ply(const std::filesystem::path& path)
{
    auto in = open_in(path);
    std::string line;
    std::size_t count = 0;
    int properties = 0;
    bool binary = false;
    while (std::getline(in, line)) {
        if (line.rfind("format binary_little_endian", 0) == 0) binary = true;
        if (line.rfind("element vertex", 0) == 0) count = std::stoull(line.substr(15));
        if (line.rfind("property float", 0) == 0) ++properties;
        if (line == "end_header") break;
    }
    if (!binary || properties < 3) throw IoError("unsupported ply layout: " + path.string());
    std::vector<PlyPoint> points(count);
    std::vector<float> record(static_cast<std::size_t>(properties));
    for (auto& p : points) {
        in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(record.size() * sizeof(float)));
        if (!in) throw IoError("truncated ply: " + path.string());
        p.x = record[0];
        p.y = record[1];
        p.z = record[2];
        if (properties > 3) p.quality = record[3];
    }
    return points;
}

std::string read_text(const std::filesystem::path& path)
{
    auto in = open_in(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    auto out = open_out(path);
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path)
{
    auto in = open_in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_raw(const std::filesystem::path& path, const std::vector<const Grid<double>*>& channels)
{
    require(!channels.empty() && channels.front(), "raw: no channels");
    const Grid<double>& first = *channels.front();
    for (const auto* c : channels)
        if (!c || !c->same_shape(first)) throw ValidationError("raw channels differ in shape");
    static_assert(std::endian::native == std::endian::little, "raw grids assume a little-endian host");
    auto out = open_out(path);
    out << "PGLFRAW1 " << first.width() << ' ' << first.height() << ' ' << channels.size() << '\n';
    for (const auto* c : channels)
        out.write(reinterpret_cast<const char*>(c->storage().data()),
                  static_cast<std::streamsize>(c->size() * sizeof(double)));
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Grid<double>> read_raw(const std::filesystem::path& path)
{
    auto in = open_in(path);
    std::string magic;
    int w = 0, h = 0, n = 0;
    in >> magic >> w >> h >> n;
    if (magic != "PGLFRAW1" || w <= 0 || h <= 0 || n <= 0 || in.get() != '\n')
        throw IoError("not a raw grid file: " + path.string());
    std::vector<Grid<double>> out;
    for (int k = 0; k < n; ++k) {
        Grid<double> g(w, h);
        in.read(reinterpret_cast<char*>(g.storage().data()), static_cast<std::streamsize>(g.size() * sizeof(double)));
        if (!in) throw IoError("truncated raw grid: " + path.string());
        out.push_back(std::move(g));
    }
    return out;
}

std::string sha256_hex(const void* data, std::size_t size)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data, size, md, &len, EVP_sha256(), nullptr) != 1) throw IoError("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string sha256_hex(const std::string& text)
{
    return sha256_hex(text.data(), text.size());
}

std::string sha256_file(const std::filesystem::path& path)
{
    const auto bytes = read_bytes(path);
    return sha256_hex(bytes.data(), bytes.size());
}

} // namespace pglf::io
