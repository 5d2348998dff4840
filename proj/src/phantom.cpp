#include "dsct/phantom.hpp"

#include "dsct/error.hpp"
#include "dsct/parallel.hpp"
#include "dsct/text_table.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace dsct {

namespace {

// Point expressed in the ellipse frame, scaled so the ellipse is the unit disk.
Point2 to_unit_frame(const EllipseSpec& e, double x, double y) noexcept
{
    const double c = std::cos(e.rotation_rad);
    const double s = std::sin(e.rotation_rad);
    return {(c * x + s * y) / e.semi_a_cm, (-s * x + c * y) / e.semi_b_cm};
}

} // namespace

bool EllipseSpec::contains(const Point2& p) const noexcept
{
    const Point2 q = to_unit_frame(*this, p.x - center.x, p.y - center.y);
    return q.x * q.x + q.y * q.y <= 1.0;
}

double EllipseSpec::chord_cm(const Point2& from, const Point2& to) const noexcept
{
    const Point2 u = to_unit_frame(*this, from.x - center.x, from.y - center.y);
    const Point2 v = to_unit_frame(*this, to.x - from.x, to.y - from.y);
    const double a = v.x * v.x + v.y * v.y;
    const double half_b = u.x * v.x + u.y * v.y;
    const double c = u.x * u.x + u.y * u.y - 1.0;
    const double disc = half_b * half_b - a * c;
    if (!(a > 0.0) || !(disc > 0.0))
        return 0.0;
    const double root = std::sqrt(disc);
    // Stable roots of a t^2 + 2 half_b t + c = 0.
    const double q = half_b >= 0.0 ? -(half_b + root) : -(half_b - root);
    double t0 = q / a;
    double t1 = c / q;
    if (t0 > t1)
        std::swap(t0, t1);
    t0 = std::max(t0, 0.0);
    t1 = std::min(t1, 1.0);
    if (!(t1 > t0))
        return 0.0;
    return (t1 - t0) * std::hypot(to.x - from.x, to.y - from.y);
}

BasisPair density_at(const Phantom& phantom, const Point2& p)
{
    BasisPair rho{0.0, 0.0};
    for (const auto& e : phantom.ellipses) {
        if (e.contains(p)) {
            rho[0] += e.drho[0];
            rho[1] += e.drho[1];
        }
    }
    return rho;
}

std::pair<Image, Image> rasterize(const Phantom& phantom, const FanBeamGeometry& geom)
{
    Image rho1 = geom.make_image();
    Image rho2 = geom.make_image();
    constexpr double offsets[] = {-1.0 / 3.0, 0.0, 1.0 / 3.0};
    parallel_for(geom.n_y, [&](std::size_t iy) {
        for (std::size_t ix = 0; ix < geom.n_x; ++ix) {
            const Point2 c = geom.pixel_center(ix, iy);
            BasisPair sum{0.0, 0.0};
            for (double oy : offsets) {
                for (double ox : offsets) {
                    const BasisPair rho =
                        density_at(phantom, {c.x + ox * geom.pixel_cm, c.y + oy * geom.pixel_cm});
                    sum[0] += rho[0];
                    sum[1] += rho[1];
                }
            }
            rho1.at(ix, iy) = sum[0] / 9.0;
            rho2.at(ix, iy) = sum[1] / 9.0;
        }
    });

    // Cancelling overlays may leave rounding residue around zero.
    constexpr double kNegativeTolerance = 1e-12;
    for (std::size_t iy = 0; iy < geom.n_y; ++iy) {
        for (std::size_t ix = 0; ix < geom.n_x; ++ix) {
            for (Image* img : {&rho1, &rho2}) {
                double& v = img->at(ix, iy);
                if (v < -kNegativeTolerance) {
                    std::ostringstream msg;
                    msg << "phantom: negative basis-" << (img == &rho1 ? 1 : 2) << " density " << v
                        << " at pixel (" << ix << ", " << iy << ")";
                    throw DataError(msg.str());
                }
                if (v < 0.0)
                    v = 0.0;
            }
        }
    }
    return {std::move(rho1), std::move(rho2)};
}

BasisPair analytic_path_integrals(const Phantom& phantom, const Ray& ray)
{
    BasisPair p{0.0, 0.0};
    for (const auto& e : phantom.ellipses) {
        const double chord = e.chord_cm(ray.source, ray.detector);
        if (chord > 0.0) {
            p[0] += e.drho[0] * chord;
            p[1] += e.drho[1] * chord;
        }
    }
    return p;
}

Phantom parse_phantom(std::istream& in, std::string_view source)
{
    const auto rows = read_token_rows(in);
    auto where = [&](std::size_t line) {
        std::ostringstream out;
        out << source << ":" << line << ": ";
        return out.str();
    };
    if (rows.empty() || rows.front().tokens.size() != 2 || rows.front().tokens[0] != "fov")
        throw DataError(std::string(source) + ": phantom file must start with 'fov <cm>'");

    Phantom phantom;
    phantom.fov_cm = parse_number(rows.front().tokens[1], source, rows.front().line);
    if (!(phantom.fov_cm > 0.0))
        throw DataError(where(rows.front().line) + "fov must be positive");

    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.tokens.size() != 7)
            throw DataError(where(row.line) + "expected 'cx cy a b theta_deg drho1 drho2'");
        double v[7];
        for (std::size_t k = 0; k < 7; ++k)
            v[k] = parse_number(row.tokens[k], source, row.line);
        if (!(v[2] > 0.0) || !(v[3] > 0.0))
            throw DataError(where(row.line) + "semi-axes must be positive");
        EllipseSpec e;
        e.center = {v[0], v[1]};
        e.semi_a_cm = v[2];
        e.semi_b_cm = v[3];
        e.rotation_rad = v[4] * std::numbers::pi / 180.0;
        e.drho = {v[5], v[6]};
        phantom.ellipses.push_back(e);
    }
    return phantom;
}

Phantom load_phantom(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path.string());
    return parse_phantom(in, path.string());
}

} // namespace dsct
