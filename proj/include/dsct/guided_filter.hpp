#pragma once

#include "dsct/image.hpp"

namespace dsct::guided {

struct GuidedFilterParams {
    int radius_px = 2;
    /// Regularization in squared guide-intensity units.
    double epsilon = 1e-4;

    void validate() const;
};

/// Window coefficients (a, b) and their averages over all windows covering each pixel.
struct FilterCoeffs {
    Image a;
    Image b;
    Image a_bar;
    Image b_bar;
};

/**
 * Mean over the (2r+1)^2 window clipped to the image, dividing by the number
 * of in-bounds pixels. Separable running sums, O(n) in the pixel count.
 */
Image box_mean(const Image& image, int radius);

/**
 * Per-window least-squares fit x ~ a I + b with penalty epsilon a^2:
 * a = cov(I, x) / (var(I) + epsilon), b = mean(x) - a mean(I).
 */
FilterCoeffs fit_coeffs(const Image& guide, const Image& input, const GuidedFilterParams& params);

/// Filtered output a_bar * guide + b_bar.
Image apply(const Image& guide, const Image& input, const GuidedFilterParams& params);

/// epsilon_rel * (max(guide) - min(guide))^2.
double relative_epsilon(const Image& guide, double epsilon_rel);

} // namespace dsct::guided
