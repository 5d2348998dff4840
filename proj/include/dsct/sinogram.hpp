#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dsct {

/// Projection data, views x channels, stored view-major.
class Sinogram {
public:
    Sinogram() = default;
    Sinogram(std::size_t n_views, std::size_t n_channels, double fill = 0.0)
        : n_views_(n_views), n_channels_(n_channels), values_(n_views * n_channels, fill)
    {
    }

    std::size_t n_views() const noexcept { return n_views_; }
    std::size_t n_channels() const noexcept { return n_channels_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator[](std::size_t ray) noexcept { return values_[ray]; }
    double operator[](std::size_t ray) const noexcept { return values_[ray]; }
    double& at(std::size_t view, std::size_t channel) noexcept
    {
        return values_[view * n_channels_ + channel];
    }
    double at(std::size_t view, std::size_t channel) const noexcept
    {
        return values_[view * n_channels_ + channel];
    }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool same_shape(const Sinogram& other) const noexcept
    {
        return n_views_ == other.n_views_ && n_channels_ == other.n_channels_;
    }

    friend bool operator==(const Sinogram&, const Sinogram&) = default;

private:
    std::size_t n_views_ = 0;
    std::size_t n_channels_ = 0;
    std::vector<double> values_;
};

} // namespace dsct
