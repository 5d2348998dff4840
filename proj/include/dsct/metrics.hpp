#pragma once

#include "dsct/image.hpp"
#include "dsct/sinogram.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dsct {

/// Root-mean-square difference; throws DataError on a shape mismatch.
double rmse(const Image& image, const Image& reference);

/// Euclidean norm of the difference of two sinograms.
double residual_norm(const Sinogram& measured, const Sinogram& model);

/**
 * Region of interest in pixel units: pixel (ix, iy) sits at coordinate
 * (ix, iy). Rectangles use ax, ay as half-widths, ellipses as semi-axes.
 */
struct RoiSpec {
    enum class Shape { Rectangle, Ellipse };

    std::string label;
    Shape shape = Shape::Ellipse;
    double cx = 0.0;
    double cy = 0.0;
    double ax = 1.0;
    double ay = 1.0;

    bool contains(double x, double y) const noexcept;
    /// Throws DataError unless the ROI lies fully inside a width x height image.
    void validate(std::size_t width, std::size_t height) const;
};

struct RoiStats {
    double mean = 0.0;
    double std = 0.0; // population standard deviation
    std::size_t count = 0;
};

std::vector<std::size_t> roi_pixels(const Image& image, const RoiSpec& roi);
RoiStats roi_stats(const Image& image, const RoiSpec& roi);

/// 20 log10(mean / std) in dB; +infinity when the ROI is constant.
double roi_snr(const Image& image, const RoiSpec& roi);

/// Lines "label shape cx cy ax ay" with shape "rect" or "ellipse".
std::vector<RoiSpec> parse_rois(std::istream& in, std::string_view source);
std::vector<RoiSpec> load_rois(const std::filesystem::path& path);

} // namespace dsct
