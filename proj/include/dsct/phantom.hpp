#pragma once

#include "dsct/geometry.hpp"
#include "dsct/image.hpp"

#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <utility>
#include <vector>

namespace dsct {

/// Ellipse adding drho to both basis densities wherever it covers a point.
struct EllipseSpec {
    Point2 center;
    double semi_a_cm = 1.0; // along the rotated x axis
    double semi_b_cm = 1.0; // along the rotated y axis
    double rotation_rad = 0.0;
    BasisPair drho{0.0, 0.0};

    bool contains(const Point2& p) const noexcept;
    /// Length of the segment from -> to that lies inside the ellipse.
    double chord_cm(const Point2& from, const Point2& to) const noexcept;
};

/// Additive composition of ellipses; negative drho carves regions out.
struct Phantom {
    std::vector<EllipseSpec> ellipses;
    double fov_cm = 0.0;
};

BasisPair density_at(const Phantom& phantom, const Point2& p);

/**
 * Ground-truth density images: every pixel is the mean of a 3x3 grid of
 * density_at samples. Throws DataError naming the pixel when a composed
 * density is negative.
 */
std::pair<Image, Image> rasterize(const Phantom& phantom, const FanBeamGeometry& geom);

/// Exact line integrals of both densities along the ray segment (g/cm^2).
BasisPair analytic_path_integrals(const Phantom& phantom, const Ray& ray);

/// Header line "fov <cm>" followed by "cx cy a b theta_deg drho1 drho2" lines.
Phantom parse_phantom(std::istream& in, std::string_view source);
Phantom load_phantom(const std::filesystem::path& path);

} // namespace dsct
