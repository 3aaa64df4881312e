#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pglf/error.hpp"

namespace pglf {

/// Integer pixel location (column, row).
struct Pixel {
    int x = 0;
    int y = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Dense row-major 2D array.
template <class T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(checked_area(width, height)), fill)
    {
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    T& operator()(int x, int y) { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const { return data_[index(x, y)]; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(int x, int y) const
    {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    template <class U>
    bool same_shape(const Grid<U>& other) const
    {
        return width_ == other.width() && height_ == other.height();
    }

private:
    static long long checked_area(int width, int height)
    {
        require(width > 0 && height > 0, "grid dimensions must be positive");
        return static_cast<long long>(width) * height;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// Scalar intensity image. Generated patterns live in [0, 1]; captured
/// images hold non-negative counts.
using Image = Grid<double>;
using Mask = Grid<std::uint8_t>;

/// Throws unless every sample is finite and all images share one shape.
void validate_stack(std::span<const Image> images, std::size_t min_count, const char* what);

/// Bilinear sample with edge clamping; (x, y) in pixel-center coordinates.
double sample_bilinear(const Image& image, double x, double y);

} // namespace pglf
