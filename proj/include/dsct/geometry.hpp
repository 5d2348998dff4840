#pragma once

#include "dsct/image.hpp"
#include "dsct/sinogram.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace dsct {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/**
 * Fan-beam acquisition with a flat, equispaced detector. The source orbits
 * the origin at radius sod_cm; the reconstruction grid is centered on the
 * rotation axis.
 */
struct FanBeamGeometry {
    double sod_cm = 100.0;
    double sdd_cm = 120.0;
    std::size_t n_channels = 128;
    double channel_pitch_cm = 0.12;
    std::size_t n_views = 360;
    double angle_span_rad = 2.0 * std::numbers::pi;
    std::size_t n_x = 64;
    std::size_t n_y = 64;
    double pixel_cm = 0.1992;

    /// Throws ConfigError when an invariant is violated.
    void validate() const;

    std::size_t n_rays() const noexcept { return n_views * n_channels; }
    std::size_t n_pixels() const noexcept { return n_x * n_y; }
    double grid_width_cm() const noexcept { return static_cast<double>(n_x) * pixel_cm; }
    double grid_height_cm() const noexcept { return static_cast<double>(n_y) * pixel_cm; }

    /// Radius of the circle around the rotation axis seen by every view.
    double fov_radius_cm() const noexcept;

    /// Physical center of pixel (ix, iy).
    Point2 pixel_center(std::size_t ix, std::size_t iy) const noexcept;

    Image make_image(double fill = 0.0) const { return Image(n_x, n_y, fill, pixel_cm); }
    Sinogram make_sinogram(double fill = 0.0) const { return Sinogram(n_views, n_channels, fill); }
};

struct Ray {
    Point2 source;
    Point2 detector;
    std::size_t view = 0;
    std::size_t channel = 0;

    std::size_t index(const FanBeamGeometry& geom) const noexcept
    {
        return view * geom.n_channels + channel;
    }
};

struct FootprintEntry {
    std::size_t pixel;
    double length_cm;
};

using RayFootprint = std::vector<FootprintEntry>;

Ray make_ray(const FanBeamGeometry& geom, std::size_t view, std::size_t channel);

/// All rays in view-major order (ray index = view * n_channels + channel).
std::vector<Ray> enumerate_rays(const FanBeamGeometry& geom);

/**
 * Incremental parametric traversal of the source-to-detector segment through
 * the pixel grid. Calls visit(pixel_index, length_cm) for every crossed pixel
 * in order from source to detector; zero-length touches are skipped.
 */
template <typename Visitor>
void traverse(const Ray& ray, const FanBeamGeometry& geom, Visitor&& visit)
{
    const double h = geom.pixel_cm;
    const double x_min = -0.5 * geom.grid_width_cm();
    const double y_min = -0.5 * geom.grid_height_cm();
    const double x_max = -x_min;
    const double y_max = -y_min;
    const double dx = ray.detector.x - ray.source.x;
    const double dy = ray.detector.y - ray.source.y;
    const double ray_length = std::hypot(dx, dy);

    double alpha_min = 0.0;
    double alpha_max = 1.0;
    auto clip = [&](double origin, double delta, double lo, double hi) {
        if (delta == 0.0) {
            if (origin < lo || origin >= hi)
                alpha_max = -1.0;
            return;
        }
        double a0 = (lo - origin) / delta;
        double a1 = (hi - origin) / delta;
        if (a0 > a1)
            std::swap(a0, a1);
        alpha_min = std::max(alpha_min, a0);
        alpha_max = std::min(alpha_max, a1);
    };
    clip(ray.source.x, dx, x_min, x_max);
    clip(ray.source.y, dy, y_min, y_max);
    if (!(alpha_min < alpha_max))
        return;

    const auto nx = static_cast<long>(geom.n_x);
    const auto ny = static_cast<long>(geom.n_y);
    const double entry_x = ray.source.x + alpha_min * dx;
    const double entry_y = ray.source.y + alpha_min * dy;
    long ix = std::clamp(static_cast<long>(std::floor((entry_x - x_min) / h)), 0L, nx - 1);
    long iy = std::clamp(static_cast<long>(std::floor((entry_y - y_min) / h)), 0L, ny - 1);

    constexpr double never = std::numeric_limits<double>::infinity();
    const long step_x = dx > 0.0 ? 1 : -1;
    const long step_y = dy > 0.0 ? 1 : -1;
    const double alpha_step_x = dx != 0.0 ? h / std::abs(dx) : never;
    const double alpha_step_y = dy != 0.0 ? h / std::abs(dy) : never;
    double alpha_x = never;
    double alpha_y = never;
    if (dx != 0.0)
        alpha_x = (x_min + static_cast<double>(ix + (dx > 0.0 ? 1 : 0)) * h - ray.source.x) / dx;
    if (dy != 0.0)
        alpha_y = (y_min + static_cast<double>(iy + (dy > 0.0 ? 1 : 0)) * h - ray.source.y) / dy;

    double alpha = alpha_min;
    while (alpha < alpha_max) {
        const double alpha_next = std::min({alpha_x, alpha_y, alpha_max});
        const double length = (alpha_next - alpha) * ray_length;
        if (length > 0.0)
            visit(static_cast<std::size_t>(iy * nx + ix), length);
        alpha = alpha_next;
        if (alpha_next == alpha_x) {
            ix += step_x;
            alpha_x += alpha_step_x;
        }
        if (alpha_next == alpha_y) {
            iy += step_y;
            alpha_y += alpha_step_y;
        }
        if (ix < 0 || ix >= nx || iy < 0 || iy >= ny)
            break;
    }
}

/// Exact intersection lengths of the ray with the pixels it crosses.
RayFootprint trace(const Ray& ray, const FanBeamGeometry& geom);

/// Footprint-weighted sums along every ray.
Sinogram project(const Image& image, const FanBeamGeometry& geom);

/// Exact adjoint of project.
Image backproject(const Sinogram& sino, const FanBeamGeometry& geom);

/**
 * Ray transform bound to one geometry. Rays are traced on the fly, so memory
 * stays proportional to the image and sinogram sizes. Projection is parallel
 * over rays; backprojection accumulates fixed view blocks into partial
 * images that are summed in block order, which keeps results bitwise
 * independent of the thread count.
 */
class Projector {
public:
    explicit Projector(FanBeamGeometry geom);

    const FanBeamGeometry& geometry() const noexcept { return geom_; }
    const std::vector<Ray>& rays() const noexcept { return rays_; }

    Sinogram project(const Image& image) const;
    Image backproject(const Sinogram& sino) const;

    /// Projects several images in a single traversal of each ray.
    std::vector<Sinogram> project(std::span<const Image* const> images) const;
    std::vector<Image> backproject(std::span<const Sinogram* const> sinos) const;

    /// Restricted to the listed views; other rays are left at zero / ignored.
    std::vector<Sinogram> project(std::span<const Image* const> images,
                                  std::span<const std::size_t> views) const;
    std::vector<Image> backproject(std::span<const Sinogram* const> sinos,
                                   std::span<const std::size_t> views) const;

    /// Column sums over the rays of the listed views only.
    Image column_sums(std::span<const std::size_t> views) const;

    /// Sum of footprint lengths per ray (SART row normalization).
    const Sinogram& row_sums() const noexcept { return row_sums_; }
    /// Sum of footprint lengths per pixel over all rays (SART column normalization).
    const Image& column_sums() const noexcept { return column_sums_; }

private:
    FanBeamGeometry geom_;
    std::vector<Ray> rays_;
    std::vector<std::size_t> all_views_;
    Sinogram row_sums_;
    Image column_sums_;
};

/**
 * Partition of the views into interleaved subsets: subset s holds views
 * s, s + S, s + 2S, ... Subsets are visited in an order that keeps
 * consecutive subsets angularly far apart.
 */
std::vector<std::vector<std::size_t>> view_subsets(std::size_t n_views, std::size_t n_subsets);

} // namespace dsct
