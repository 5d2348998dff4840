#include "dsct/geometry.hpp"

#include "dsct/error.hpp"
#include "dsct/parallel.hpp"

#include <array>
#include <numeric>
#include <sstream>

namespace dsct {

namespace {

// Backprojection partitions the views into this many fixed blocks.
constexpr std::size_t kViewBlocks = 16;

} // namespace

void FanBeamGeometry::validate() const
{
    auto fail = [](const std::string& what) { throw ConfigError("geometry: " + what); };
    if (!(sod_cm > 0.0))
        fail("sod_cm must be positive");
    if (!(sdd_cm > sod_cm))
        fail("sdd_cm must exceed sod_cm");
    if (n_channels < 1)
        fail("n_channels must be at least 1");
    if (!(channel_pitch_cm > 0.0))
        fail("channel_pitch_cm must be positive");
    if (n_views < 1)
        fail("n_views must be at least 1");
    if (!(angle_span_rad > 0.0) || !std::isfinite(angle_span_rad))
        fail("angle_span_rad must be positive and finite");
    if (n_x < 1 || n_y < 1)
        fail("image grid must have at least one pixel");
    if (!(pixel_cm > 0.0))
        fail("pixel_cm must be positive");
    const double inscribed = 0.5 * std::min(grid_width_cm(), grid_height_cm());
    if (inscribed > fov_radius_cm() * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "image grid inscribed radius " << inscribed << " cm exceeds the field of view radius "
            << fov_radius_cm() << " cm";
        fail(msg.str());
    }
}

double FanBeamGeometry::fov_radius_cm() const noexcept
{
    const double half_detector = 0.5 * static_cast<double>(n_channels) * channel_pitch_cm;
    return sod_cm * std::sin(std::atan2(half_detector, sdd_cm));
}

Point2 FanBeamGeometry::pixel_center(std::size_t ix, std::size_t iy) const noexcept
{
    return {(static_cast<double>(ix) + 0.5) * pixel_cm - 0.5 * grid_width_cm(),
            (static_cast<double>(iy) + 0.5) * pixel_cm - 0.5 * grid_height_cm()};
}

Ray make_ray(const FanBeamGeometry& geom, std::size_t view, std::size_t channel)
{
    const double angle =
        static_cast<double>(view) * geom.angle_span_rad / static_cast<double>(geom.n_views);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double offset =
        (static_cast<double>(channel) - 0.5 * static_cast<double>(geom.n_channels - 1)) *
        geom.channel_pitch_cm;
    Ray ray;
    ray.source = {geom.sod_cm * c, geom.sod_cm * s};
    const Point2 center{ray.source.x - geom.sdd_cm * c, ray.source.y - geom.sdd_cm * s};
    ray.detector = {center.x - offset * s, center.y + offset * c};
    ray.view = view;
    ray.channel = channel;
    return ray;
}

std::vector<Ray> enumerate_rays(const FanBeamGeometry& geom)
{
    std::vector<Ray> rays;
    rays.reserve(geom.n_rays());
    for (std::size_t v = 0; v < geom.n_views; ++v)
        for (std::size_t c = 0; c < geom.n_channels; ++c)
            rays.push_back(make_ray(geom, v, c));
    return rays;
}

RayFootprint trace(const Ray& ray, const FanBeamGeometry& geom)
{
    RayFootprint footprint;
    traverse(ray, geom, [&](std::size_t pixel, double length) {
        footprint.push_back({pixel, length});
    });
    return footprint;
}

Sinogram project(const Image& image, const FanBeamGeometry& geom)
{
    return Projector(geom).project(image);
}

Image backproject(const Sinogram& sino, const FanBeamGeometry& geom)
{
    return Projector(geom).backproject(sino);
}

Projector::Projector(FanBeamGeometry geom) : geom_(geom), rays_(enumerate_rays(geom_))
{
    all_views_.resize(geom_.n_views);
    for (std::size_t v = 0; v < geom_.n_views; ++v)
        all_views_[v] = v;
    row_sums_ = geom_.make_sinogram();
    parallel_for(rays_.size(), [&](std::size_t r) {
        double sum = 0.0;
        traverse(rays_[r], geom_, [&](std::size_t, double length) { sum += length; });
        row_sums_[r] = sum;
    });
    column_sums_ = column_sums(all_views_);
}

Image Projector::column_sums(std::span<const std::size_t> views) const
{
    const Sinogram ones = geom_.make_sinogram(1.0);
    const Sinogram* sinos[] = {&ones};
    return std::move(backproject(sinos, views).front());
}

Sinogram Projector::project(const Image& image) const
{
    const Image* images[] = {&image};
    return std::move(project(images).front());
}

Image Projector::backproject(const Sinogram& sino) const
{
    const Sinogram* sinos[] = {&sino};
    return std::move(backproject(sinos).front());
}

std::vector<Sinogram> Projector::project(std::span<const Image* const> images) const
{
    return project(images, all_views_);
}

std::vector<Image> Projector::backproject(std::span<const Sinogram* const> sinos) const
{
    return backproject(sinos, all_views_);
}

std::vector<Sinogram> Projector::project(std::span<const Image* const> images,
                                         std::span<const std::size_t> views) const
{
    for (const Image* image : images)
        if (image->width() != geom_.n_x || image->height() != geom_.n_y)
            throw DataError("project: image dimensions do not match the geometry");

    std::vector<Sinogram> out(images.size(), geom_.make_sinogram());
    const std::size_t nc = geom_.n_channels;
    parallel_for(views.size() * nc, [&](std::size_t item) {
        const std::size_t r = views[item / nc] * nc + item % nc;
        if (images.size() == 1) {
            const Image& img = *images[0];
            double sum = 0.0;
            traverse(rays_[r], geom_, [&](std::size_t p, double length) { sum += length * img[p]; });
            out[0][r] = sum;
            return;
        }
        std::vector<double> sums(images.size(), 0.0);
        traverse(rays_[r], geom_, [&](std::size_t p, double length) {
            for (std::size_t k = 0; k < images.size(); ++k)
                sums[k] += length * (*images[k])[p];
        });
        for (std::size_t k = 0; k < images.size(); ++k)
            out[k][r] = sums[k];
    });
    return out;
}

std::vector<Image> Projector::backproject(std::span<const Sinogram* const> sinos,
                                         std::span<const std::size_t> views) const
{
    for (const Sinogram* sino : sinos)
        if (sino->n_views() != geom_.n_views || sino->n_channels() != geom_.n_channels)
            throw DataError("backproject: sinogram dimensions do not match the geometry");

    if (views.empty())
        return std::vector<Image>(sinos.size(), geom_.make_image());
    const std::size_t block_views = (views.size() + kViewBlocks - 1) / kViewBlocks;
    const std::size_t n_blocks = (views.size() + block_views - 1) / block_views;
    const std::size_t n_images = sinos.size();

    // partial[block * n_images + k]
    std::vector<Image> partial(n_blocks * n_images, geom_.make_image());
    parallel_for(n_blocks, [&](std::size_t block) {
        const std::size_t end = std::min(views.size(), (block + 1) * block_views);
        for (std::size_t b = block * block_views; b < end; ++b) {
            const std::size_t v = views[b];
            for (std::size_t c = 0; c < geom_.n_channels; ++c) {
                const std::size_t r = v * geom_.n_channels + c;
                std::array<double, 4> local{};
                std::vector<double> many;
                double* values = local.data();
                if (n_images > local.size()) {
                    many.resize(n_images);
                    values = many.data();
                }
                bool any = false;
                for (std::size_t k = 0; k < n_images; ++k) {
                    values[k] = (*sinos[k])[r];
                    any = any || values[k] != 0.0;
                }
                if (!any)
                    continue;
                Image* targets = &partial[block * n_images];
                traverse(rays_[r], geom_, [&](std::size_t p, double length) {
                    for (std::size_t k = 0; k < n_images; ++k)
                        targets[k][p] += length * values[k];
                });
            }
        }
    });

    std::vector<Image> out(n_images, geom_.make_image());
    parallel_for(n_images, [&](std::size_t k) {
        for (std::size_t block = 0; block < n_blocks; ++block) {
            const Image& part = partial[block * n_images + k];
            for (std::size_t p = 0; p < out[k].size(); ++p)
                out[k][p] += part[p];
        }
    });
    return out;
}

std::vector<std::vector<std::size_t>> view_subsets(std::size_t n_views, std::size_t n_subsets)
{
    if (n_subsets < 1 || n_subsets > n_views)
        throw ConfigError("view subsets: count must be between 1 and the number of views");

    // Visit subsets with a golden-ratio stride coprime to the subset count.
    std::size_t stride = 1;
    if (n_subsets > 2) {
        const auto target = static_cast<std::size_t>(
            std::lround(0.6180339887498949 * static_cast<double>(n_subsets)));
        for (std::size_t delta = 0; delta < n_subsets; ++delta) {
            for (std::size_t candidate : {target + delta, target - delta}) {
                if (candidate >= 1 && candidate < n_subsets && std::gcd(candidate, n_subsets) == 1) {
                    stride = candidate;
                    delta = n_subsets;
                    break;
                }
            }
        }
    }

    std::vector<std::vector<std::size_t>> subsets;
    subsets.reserve(n_subsets);
    for (std::size_t k = 0; k < n_subsets; ++k) {
        const std::size_t s = (k * stride) % n_subsets;
        std::vector<std::size_t> views;
        for (std::size_t v = s; v < n_views; v += n_subsets)
            views.push_back(v);
        subsets.push_back(std::move(views));
    }
    return subsets;
}

} // namespace dsct
