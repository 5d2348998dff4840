#pragma once

#include "dsct/geometry.hpp"
#include "dsct/phantom.hpp"
#include "dsct/sinogram.hpp"
#include "dsct/spectra.hpp"

#include <array>
#include <cstdint>

namespace dsct {

/// Index of the low- and high-energy scans in per-spectrum arrays.
enum Scan : std::size_t { kLow = 0, kHigh = 1 };

/// Dual-spectral measurement: two polychromatic sinograms on a shared basis grid.
struct DualScan {
    Sinogram low;
    Sinogram high;
    std::array<Spectrum, 2> spectra;
    BasisSet basis;

    const Sinogram& sinogram(std::size_t k) const noexcept { return k == kLow ? low : high; }
    void validate() const;
};

/// Where the basis path integrals come from.
enum class PathIntegralMode {
    Analytic, ///< closed-form ellipse chords (no inverse crime)
    Discrete, ///< projection of the rasterized phantom
};

struct NoiseConfig {
    bool enabled = false;
    double photons_per_ray = 1e5;
    std::uint64_t seed = 0;
};

/// Attenuation exponents beyond this magnitude are treated as numerical failure.
inline constexpr double kMaxAttenuationExponent = 700.0;

/**
 * -ln sum_j w_j exp(-(psi_1j p_1 + psi_2j p_2)). Throws NumericalError when an
 * exponent exceeds kMaxAttenuationExponent or the result is not finite.
 */
double polychromatic_projection(const Spectrum& spectrum, const BasisSet& basis,
                                const BasisPair& path);

/// Line integrals of both basis densities for every ray.
std::array<Sinogram, 2> basis_path_integrals(const Phantom& phantom, const FanBeamGeometry& geom,
                                             PathIntegralMode mode = PathIntegralMode::Analytic);

/// Applies polychromatic_projection ray by ray.
Sinogram polychromatic_sinogram(const Spectrum& spectrum, const BasisSet& basis,
                                const Sinogram& path1, const Sinogram& path2);

/**
 * Poisson counting noise: expected counts N0 exp(-P), sampled counts clamped
 * at one, returned as -ln(c / N0). Each ray draws from its own generator keyed
 * by (seed, stream, ray), so output does not depend on scheduling.
 */
Sinogram add_poisson_noise(const Sinogram& sino, double photons_per_ray, std::uint64_t seed,
                           std::uint64_t stream = 0);

/// Spectra are embedded on the basis grid; noise streams are 0 (low) and 1 (high).
DualScan simulate_dual_scan(const Phantom& phantom, const FanBeamGeometry& geom,
                            const Spectrum& low, const Spectrum& high, const BasisSet& basis,
                            const NoiseConfig& noise,
                            PathIntegralMode mode = PathIntegralMode::Analytic);

} // namespace dsct
