#include "dsct/guided_filter.hpp"

#include "dsct/error.hpp"
#include "dsct/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace dsct::guided {

namespace {

// Window sums along one line of length n with stride, clipped at the ends.
void window_sums(const double* in, double* out, std::size_t n, std::size_t stride, int radius,
                 std::vector<double>& prefix)
{
    prefix.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        prefix[i + 1] = prefix[i] + in[i * stride];
    const auto r = static_cast<std::size_t>(radius);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i > r ? i - r : 0;
        const std::size_t hi = std::min(n, i + r + 1);
        out[i * stride] = prefix[hi] - prefix[lo];
    }
}

std::size_t clipped_extent(std::size_t i, std::size_t n, int radius)
{
    const auto r = static_cast<std::size_t>(radius);
    const std::size_t lo = i > r ? i - r : 0;
    const std::size_t hi = std::min(n, i + r + 1);
    return hi - lo;
}

Image shifted(const Image& image, double offset)
{
    Image out = image;
    for (double& v : out.values())
        v -= offset;
    return out;
}

Image product(const Image& a, const Image& b)
{
    Image out = a;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] *= b[i];
    return out;
}

} // namespace

void GuidedFilterParams::validate() const
{
    if (radius_px < 1)
        throw ConfigError("guided filter: radius must be at least 1 pixel");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw ConfigError("guided filter: epsilon must be positive and finite");
}

Image box_mean(const Image& image, int radius)
{
    if (radius < 1)
        throw ConfigError("box_mean: radius must be at least 1");
    const std::size_t w = image.width();
    const std::size_t h = image.height();
    Image rows(w, h, 0.0, image.pixel_cm());
    parallel_for(h, [&](std::size_t y) {
        std::vector<double> prefix;
        window_sums(&image.values()[y * w], &rows.values()[y * w], w, 1, radius, prefix);
    });
    Image sums(w, h, 0.0, image.pixel_cm());
    parallel_for(w, [&](std::size_t x) {
        std::vector<double> prefix;
        window_sums(&rows.values()[x], &sums.values()[x], h, w, radius, prefix);
    });
    for (std::size_t y = 0; y < h; ++y) {
        const auto ny = static_cast<double>(clipped_extent(y, h, radius));
        for (std::size_t x = 0; x < w; ++x)
            sums.at(x, y) /= ny * static_cast<double>(clipped_extent(x, w, radius));
    }
    return sums;
}

namespace {

// Coefficients computed on offset-removed images: guide - guide[0], input - input[0].
// A constant input becomes exactly zero, so constants pass through unchanged.
struct CenteredFit {
    double guide_offset = 0.0;
    double input_offset = 0.0;
    Image a;
    Image b;
    Image a_bar;
    Image b_bar;
};

CenteredFit fit_centered(const Image& guide, const Image& input, const GuidedFilterParams& params)
{
    params.validate();
    if (!guide.same_shape(input))
        throw DataError("guided filter: guide and input differ in shape");
    if (guide.size() == 0)
        throw DataError("guided filter: empty image");

    CenteredFit fit;
    fit.guide_offset = guide[0];
    fit.input_offset = input[0];
    const Image g = shifted(guide, fit.guide_offset);
    const Image x = shifted(input, fit.input_offset);
    const int r = params.radius_px;

    const Image mean_g = box_mean(g, r);
    const Image mean_x = box_mean(x, r);
    const Image mean_gx = box_mean(product(g, x), r);
    const Image mean_gg = box_mean(product(g, g), r);

    fit.a = Image(g.width(), g.height(), 0.0, g.pixel_cm());
    fit.b = fit.a;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double var = std::max(mean_gg[i] - mean_g[i] * mean_g[i], 0.0);
        const double cov = mean_gx[i] - mean_g[i] * mean_x[i];
        fit.a[i] = cov / (var + params.epsilon);
        fit.b[i] = mean_x[i] - fit.a[i] * mean_g[i];
    }
    fit.a_bar = box_mean(fit.a, r);
    fit.b_bar = box_mean(fit.b, r);
    return fit;
}

} // namespace

FilterCoeffs fit_coeffs(const Image& guide, const Image& input, const GuidedFilterParams& params)
{
    CenteredFit fit = fit_centered(guide, input, params);
    // Undo the offsets: b = b' + x0 - a I0.
    for (std::size_t i = 0; i < fit.b.size(); ++i) {
        fit.b[i] += fit.input_offset - fit.a[i] * fit.guide_offset;
        fit.b_bar[i] += fit.input_offset - fit.a_bar[i] * fit.guide_offset;
    }
    return {std::move(fit.a), std::move(fit.b), std::move(fit.a_bar), std::move(fit.b_bar)};
}

Image apply(const Image& guide, const Image& input, const GuidedFilterParams& params)
{
    const CenteredFit fit = fit_centered(guide, input, params);
    Image out = input;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = fit.a_bar[i] * (guide[i] - fit.guide_offset) + fit.b_bar[i] + fit.input_offset;
    return out;
}

double relative_epsilon(const Image& guide, double epsilon_rel)
{
    if (!(epsilon_rel > 0.0))
        throw ConfigError("guided filter: relative epsilon must be positive");
    const double range = guide.max() - guide.min();
    return epsilon_rel * std::max(range * range, std::numeric_limits<double>::min());
}

} // namespace dsct::guided
