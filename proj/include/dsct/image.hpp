#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace dsct {

/// Pair of values, one per basis material (or one per spectrum).
using BasisPair = std::array<double, 2>;

/**
 * Row-major 2D scalar field. Pixel (ix, iy) lives at index iy * width + ix;
 * iy grows with the physical y coordinate.
 */
class Image {
public:
    Image() = default;
    Image(std::size_t width, std::size_t height, double fill = 0.0, double pixel_cm = 1.0)
        : width_(width), height_(height), pixel_cm_(pixel_cm), values_(width * height, fill)
    {
    }

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return values_.size(); }
    double pixel_cm() const noexcept { return pixel_cm_; }
    void set_pixel_cm(double pixel_cm) noexcept { pixel_cm_ = pixel_cm; }

    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    double& at(std::size_t ix, std::size_t iy) noexcept { return values_[iy * width_ + ix]; }
    double at(std::size_t ix, std::size_t iy) const noexcept { return values_[iy * width_ + ix]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool same_shape(const Image& other) const noexcept
    {
        return width_ == other.width_ && height_ == other.height_;
    }

    double min() const;
    double max() const;

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    double pixel_cm_ = 1.0;
    std::vector<double> values_;
};

} // namespace dsct
