#include "pglf/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pglf {

void validate_stack(std::span<const Image> images, std::size_t min_count, const char* what)
{
    if (images.size() < min_count)
        throw ValidationError(std::string(what) + ": need at least " + std::to_string(min_count) +
                              " images, got " + std::to_string(images.size()));
    for (const Image& image : images) {
        if (!image.same_shape(images.front()))
            throw ValidationError(std::string(what) + ": image dimensions differ");
        for (double value : image.data())
            if (!std::isfinite(value))
                throw ValidationError(std::string(what) + ": non-finite sample");
    }
}

double sample_bilinear(const Image& image, double x, double y)
{
    x = std::clamp(x, 0.0, static_cast<double>(image.width() - 1));
    y = std::clamp(y, 0.0, static_cast<double>(image.height() - 1));
    const int x0 = std::min(static_cast<int>(x), image.width() - 2 < 0 ? 0 : image.width() - 2);
    const int y0 = std::min(static_cast<int>(y), image.height() - 2 < 0 ? 0 : image.height() - 2);
    const int x1 = std::min(x0 + 1, image.width() - 1);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = image(x0, y0) * (1 - fx) + image(x1, y0) * fx;
    const double bottom = image(x0, y1) * (1 - fx) + image(x1, y1) * fx;
    return top * (1 - fy) + bottom * fy;
}

} // namespace pglf
