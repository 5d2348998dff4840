#include "support.hpp"

#include <algorithm>
#include <cmath>

namespace dsct::test {

std::filesystem::path data_dir() { return DSCT_TEST_DATA_DIR; }
std::filesystem::path config_dir() { return DSCT_TEST_CONFIG_DIR; }

std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::path(DSCT_TEST_SCRATCH_DIR) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

double clipped_length(Point2 a, Point2 b, double x0, double y0, double x1, double y1)
{
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    double t0 = 0.0;
    double t1 = 1.0;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a.x - x0, x1 - a.x, a.y - y0, y1 - a.y};
    for (int k = 0; k < 4; ++k) {
        if (p[k] == 0.0) {
            if (q[k] < 0.0)
                return 0.0;
            continue;
        }
        const double t = q[k] / p[k];
        if (p[k] < 0.0)
            t0 = std::max(t0, t);
        else
            t1 = std::min(t1, t);
    }
    return t1 > t0 ? (t1 - t0) * std::hypot(dx, dy) : 0.0;
}

Matrix system_matrix(const FanBeamGeometry& geom)
{
    const auto rays = enumerate_rays(geom);
    Matrix a(rays.size(), std::vector<double>(geom.n_pixels(), 0.0));
    const double h = geom.pixel_cm;
    for (std::size_t r = 0; r < rays.size(); ++r) {
        for (std::size_t iy = 0; iy < geom.n_y; ++iy) {
            for (std::size_t ix = 0; ix < geom.n_x; ++ix) {
                const Point2 c = geom.pixel_center(ix, iy);
                a[r][iy * geom.n_x + ix] = clipped_length(rays[r].source, rays[r].detector,
                                                          c.x - h / 2, c.y - h / 2, c.x + h / 2,
                                                          c.y + h / 2);
            }
        }
    }
    return a;
}

std::vector<double> multiply(const Matrix& a, std::span<const double> x)
{
    std::vector<double> y(a.size(), 0.0);
    for (std::size_t r = 0; r < a.size(); ++r) {
        long double s = 0.0L;
        for (std::size_t p = 0; p < x.size(); ++p)
            s += static_cast<long double>(a[r][p]) * x[p];
        y[r] = static_cast<double>(s);
    }
    return y;
}

std::vector<double> multiply_transposed(const Matrix& a, std::span<const double> y)
{
    std::vector<long double> x(a.empty() ? 0 : a[0].size(), 0.0L);
    for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t p = 0; p < x.size(); ++p)
            x[p] += static_cast<long double>(a[r][p]) * y[r];
    return {x.begin(), x.end()};
}

long double direct_projection(std::span<const double> weights, std::span<const double> psi1,
                              std::span<const double> psi2, double p1, double p2)
{
    long double sum = 0.0L;
    for (std::size_t j = 0; j < weights.size(); ++j)
        sum += static_cast<long double>(weights[j]) *
               std::exp(-(static_cast<long double>(psi1[j]) * p1 +
                          static_cast<long double>(psi2[j]) * p2));
    return -std::log(sum);
}

guided::FilterCoeffs naive_coeffs(const Image& guide, const Image& input, int radius,
                                  double epsilon)
{
    const long w = static_cast<long>(guide.width());
    const long h = static_cast<long>(guide.height());
    Image a(guide.width(), guide.height());
    Image b = a;
    auto window = [&](long x, long y, auto&& fn) {
        for (long v = std::max(0L, y - radius); v <= std::min(h - 1, y + radius); ++v)
            for (long u = std::max(0L, x - radius); u <= std::min(w - 1, x + radius); ++u)
                fn(static_cast<std::size_t>(u), static_cast<std::size_t>(v));
    };
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            // Minimize sum (a I + b - x)^2 + eps a^2 over the window.
            long double n = 0, si = 0, sx = 0, sii = 0, six = 0;
            window(x, y, [&](std::size_t u, std::size_t v) {
                const long double gi = guide.at(u, v);
                const long double xi = input.at(u, v);
                n += 1;
                si += gi;
                sx += xi;
                sii += gi * gi;
                six += gi * xi;
            });
            // Normal equations: [sii + n eps, si; si, n] (a, b) = (six, sx).
            const long double m00 = sii + n * epsilon;
            const long double det = m00 * n - si * si;
            const long double av = (six * n - si * sx) / det;
            const long double bv = (m00 * sx - si * six) / det;
            a.at(x, y) = static_cast<double>(av);
            b.at(x, y) = static_cast<double>(bv);
        }
    }
    Image a_bar = a;
    Image b_bar = b;
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            long double n = 0, sa = 0, sb = 0;
            window(x, y, [&](std::size_t u, std::size_t v) {
                n += 1;
                sa += a.at(u, v);
                sb += b.at(u, v);
            });
            a_bar.at(x, y) = static_cast<double>(sa / n);
            b_bar.at(x, y) = static_cast<double>(sb / n);
        }
    }
    return {a, b, a_bar, b_bar};
}

Image naive_guided_filter(const Image& guide, const Image& input, int radius, double epsilon)
{
    const auto c = naive_coeffs(guide, input, radius, epsilon);
    Image out = input;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = c.a_bar[i] * guide[i] + c.b_bar[i];
    return out;
}

Spectrum make_spectrum(std::vector<double> energies, std::vector<double> weights)
{
    Spectrum s;
    s.grid.centers_keV = std::move(energies);
    if (s.grid.size() > 1)
        s.grid.bin_width_keV = s.grid.centers_keV[1] - s.grid.centers_keV[0];
    double sum = 0.0;
    for (double w : weights)
        sum += w;
    for (double& w : weights)
        w /= sum;
    s.weights = std::move(weights);
    s.original_sum = sum;
    return s;
}

BasisSet make_table_basis(const EnergyGrid& grid, std::vector<double> psi1,
                          std::vector<double> psi2)
{
    BasisSet basis;
    basis.grid = grid;
    basis.psi = {std::move(psi1), std::move(psi2)};
    basis.names = {"m1", "m2"};
    return basis;
}

namespace {

Physics physics_from(const Spectrum& low, const Spectrum& high)
{
    const auto dir = data_dir();
    const EnergyGrid grid = common_grid(low.grid, high.grid);
    Physics p;
    p.basis = make_basis({load_attenuation_table(dir / "materials/water.txt"),
                          load_attenuation_table(dir / "materials/bone_cortical.txt")},
                         {"water", "bone"}, grid);
    p.spectra = {embed(low, grid), embed(high, grid)};
    return p;
}

} // namespace

Physics bundled_physics()
{
    const auto dir = data_dir();
    return physics_from(load_spectrum(dir / "spectra/tube_80kv.txt"),
                        load_spectrum(dir / "spectra/tube_140kv_cu1mm.txt"));
}

Physics monochromatic_physics(double low_keV, double high_keV)
{
    return physics_from(make_spectrum({low_keV}, {1.0}), make_spectrum({high_keV}, {1.0}));
}

FanBeamGeometry desk_geometry()
{
    FanBeamGeometry g;
    g.n_channels = 128;
    g.channel_pitch_cm = 0.12;
    g.n_views = 180;
    g.n_x = g.n_y = 64;
    g.pixel_cm = 0.1992;
    return g;
}

FanBeamGeometry small_geometry(std::size_t n, std::size_t views, std::size_t channels)
{
    FanBeamGeometry g;
    g.n_x = g.n_y = n;
    g.n_views = views;
    g.n_channels = channels;
    g.pixel_cm = 1.0;
    // Detector wide enough that the grid's inscribed circle lies in the field of view.
    g.channel_pitch_cm = 1.3 * static_cast<double>(n) * g.sdd_cm / g.sod_cm / static_cast<double>(channels);
    return g;
}

Image random_image(std::size_t w, std::size_t h, std::mt19937_64& rng, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h);
    for (double& v : img.values())
        v = u(rng);
    return img;
}

namespace {

std::vector<double> row_sums(const Matrix& a)
{
    std::vector<double> out(a.size(), 0.0);
    for (std::size_t r = 0; r < a.size(); ++r)
        for (double v : a[r])
            out[r] += v;
    return out;
}

std::vector<double> column_sums(const Matrix& a, const FanBeamGeometry& geom,
                                std::span<const std::size_t> views)
{
    std::vector<double> out(geom.n_pixels(), 0.0);
    for (std::size_t v : views)
        for (std::size_t c = 0; c < geom.n_channels; ++c)
            for (std::size_t p = 0; p < out.size(); ++p)
                out[p] += a[v * geom.n_channels + c][p];
    return out;
}

void sart_apply(const Matrix& a, const FanBeamGeometry& geom, std::vector<double>& f,
                std::span<const double> increments, std::span<const std::size_t> views,
                double lambda, bool clamp)
{
    const auto rows = row_sums(a);
    const auto cols = column_sums(a, geom, views);
    std::vector<double> correction(f.size(), 0.0);
    for (std::size_t v : views) {
        for (std::size_t c = 0; c < geom.n_channels; ++c) {
            const std::size_t r = v * geom.n_channels + c;
            if (rows[r] <= 0.0)
                continue;
            for (std::size_t p = 0; p < f.size(); ++p)
                correction[p] += a[r][p] * increments[r] / rows[r];
        }
    }
    for (std::size_t p = 0; p < f.size(); ++p) {
        if (cols[p] > 0.0)
            f[p] += lambda * correction[p] / cols[p];
        if (clamp && f[p] < 0.0)
            f[p] = 0.0;
    }
}

} // namespace

std::vector<double> dense_sart(const Matrix& a, const FanBeamGeometry& geom, std::vector<double> f,
                               std::span<const double> sino,
                               const std::vector<std::vector<std::size_t>>& subsets, double lambda,
                               bool clamp)
{
    for (const auto& views : subsets) {
        const auto model = multiply(a, f);
        std::vector<double> residual(sino.size(), 0.0);
        for (std::size_t r = 0; r < sino.size(); ++r)
            residual[r] = sino[r] - model[r];
        sart_apply(a, geom, f, residual, views, lambda, clamp);
    }
    return f;
}

std::array<std::vector<double>, 2> dense_esart_iteration(
    const Matrix& a, const FanBeamGeometry& geom, std::array<std::vector<double>, 2> f,
    const DualScan& scan, const std::vector<std::vector<std::size_t>>& subsets, double lambda,
    bool clamp, double tolerance)
{
    const auto& psi1 = scan.basis.psi[0];
    const auto& psi2 = scan.basis.psi[1];
    for (const auto& views : subsets) {
        const auto p1 = multiply(a, f[0]);
        const auto p2 = multiply(a, f[1]);
        std::array<std::vector<double>, 2> inc{std::vector<double>(p1.size(), 0.0),
                                               std::vector<double>(p1.size(), 0.0)};
        for (std::size_t r = 0; r < p1.size(); ++r) {
            // Taylor expansion of both spectra around the current path integrals.
            long double m[2][2];
            long double res[2];
            for (std::size_t k = 0; k < 2; ++k) {
                const auto& w = scan.spectra[k].weights;
                long double q = 0, s1 = 0, s2 = 0;
                for (std::size_t j = 0; j < w.size(); ++j) {
                    const long double t = w[j] * std::exp(-(static_cast<long double>(psi1[j]) * p1[r] +
                                                            static_cast<long double>(psi2[j]) * p2[r]));
                    q += t;
                    s1 += psi1[j] * t;
                    s2 += psi2[j] * t;
                }
                m[k][0] = s1 / q;
                m[k][1] = s2 / q;
                res[k] = scan.sinogram(k)[r] - (-std::log(q));
            }
            const long double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            long double scale = 0;
            for (auto& row : m)
                for (long double v : row)
                    scale = std::max(scale, std::abs(v));
            if (std::abs(det) < tolerance * scale * scale)
                continue;
            // Solve the 2x2 system with Cramer's rule.
            inc[0][r] = static_cast<double>((res[0] * m[1][1] - m[0][1] * res[1]) / det);
            inc[1][r] = static_cast<double>((m[0][0] * res[1] - m[1][0] * res[0]) / det);
        }
        for (std::size_t i = 0; i < 2; ++i)
            sart_apply(a, geom, f[i], inc[i], views, lambda, clamp);
    }
    return f;
}

} // namespace dsct::test
