#include "dsct/metrics.hpp"

#include "dsct/error.hpp"
#include "dsct/text_table.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace dsct {

double rmse(const Image& image, const Image& reference)
{
    if (!image.same_shape(reference)) {
        std::ostringstream msg;
        msg << "rmse: image is " << image.width() << "x" << image.height() << " but reference is "
            << reference.width() << "x" << reference.height();
        throw DataError(msg.str());
    }
    if (image.size() == 0)
        return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double d = image[i] - reference[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(image.size()));
}

double residual_norm(const Sinogram& measured, const Sinogram& model)
{
    if (!measured.same_shape(model))
        throw DataError("residual_norm: sinogram shapes differ");
    double sum = 0.0;
    for (std::size_t r = 0; r < measured.size(); ++r) {
        const double d = measured[r] - model[r];
        sum += d * d;
    }
    return std::sqrt(sum);
}

bool RoiSpec::contains(double x, double y) const noexcept
{
    const double u = (x - cx) / ax;
    const double v = (y - cy) / ay;
    if (shape == Shape::Rectangle)
        return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
    return u * u + v * v <= 1.0;
}

void RoiSpec::validate(std::size_t width, std::size_t height) const
{
    if (!(ax > 0.0) || !(ay > 0.0))
        throw DataError("roi '" + label + "': extents must be positive");
    if (cx - ax < -0.5 || cy - ay < -0.5 || cx + ax > static_cast<double>(width) - 0.5 ||
        cy + ay > static_cast<double>(height) - 0.5)
        throw DataError("roi '" + label + "' extends outside the image");
}

std::vector<std::size_t> roi_pixels(const Image& image, const RoiSpec& roi)
{
    roi.validate(image.width(), image.height());
    std::vector<std::size_t> pixels;
    for (std::size_t iy = 0; iy < image.height(); ++iy)
        for (std::size_t ix = 0; ix < image.width(); ++ix)
            if (roi.contains(static_cast<double>(ix), static_cast<double>(iy)))
                pixels.push_back(iy * image.width() + ix);
    if (pixels.empty())
        throw DataError("roi '" + roi.label + "' contains no pixel centers");
    return pixels;
}

RoiStats roi_stats(const Image& image, const RoiSpec& roi)
{
    const auto pixels = roi_pixels(image, roi);
    RoiStats stats;
    stats.count = pixels.size();
    for (std::size_t p : pixels)
        stats.mean += image[p];
    stats.mean /= static_cast<double>(stats.count);
    // A constant region has zero spread even when the summed mean rounds.
    const double first = image[pixels.front()];
    if (std::all_of(pixels.begin(), pixels.end(), [&](std::size_t p) { return image[p] == first; })) {
        stats.mean = first;
        return stats;
    }
    double var = 0.0;
    for (std::size_t p : pixels) {
        const double d = image[p] - stats.mean;
        var += d * d;
    }
    stats.std = std::sqrt(var / static_cast<double>(stats.count));
    return stats;
}

double roi_snr(const Image& image, const RoiSpec& roi)
{
    const RoiStats stats = roi_stats(image, roi);
    if (stats.std == 0.0)
        return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(stats.mean / stats.std);
}

std::vector<RoiSpec> parse_rois(std::istream& in, std::string_view source)
{
    std::vector<RoiSpec> rois;
    for (const auto& row : read_token_rows(in)) {
        if (row.tokens.size() != 6) {
            std::ostringstream msg;
            msg << source << ":" << row.line << ": expected 'label shape cx cy ax ay'";
            throw DataError(msg.str());
        }
        RoiSpec roi;
        roi.label = row.tokens[0];
        if (row.tokens[1] == "rect" || row.tokens[1] == "rectangle") {
            roi.shape = RoiSpec::Shape::Rectangle;
        } else if (row.tokens[1] == "ellipse") {
            roi.shape = RoiSpec::Shape::Ellipse;
        } else {
            std::ostringstream msg;
            msg << source << ":" << row.line << ": unknown roi shape '" << row.tokens[1] << "'";
            throw DataError(msg.str());
        }
        roi.cx = parse_number(row.tokens[2], source, row.line);
        roi.cy = parse_number(row.tokens[3], source, row.line);
        roi.ax = parse_number(row.tokens[4], source, row.line);
        roi.ay = parse_number(row.tokens[5], source, row.line);
        rois.push_back(std::move(roi));
    }
    return rois;
}

std::vector<RoiSpec> load_rois(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path.string());
    return parse_rois(in, path.string());
}

} // namespace dsct
