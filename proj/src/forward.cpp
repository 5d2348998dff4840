#include "dsct/forward.hpp"

#include "dsct/error.hpp"
#include "dsct/parallel.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace dsct {

namespace {

std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// splitmix64 sequence, usable as a uniform random bit generator.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t state) : state_(state) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() noexcept { return mix64(state_ += 0x9E3779B97F4A7C15ULL); }

private:
    std::uint64_t state_;
};

std::uint64_t ray_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t ray) noexcept
{
    const std::uint64_t scan_key = mix64(seed ^ mix64(stream + 0x632BE59BD9B4E019ULL));
    return mix64(scan_key ^ mix64(ray + 0xD1B54A32D192ED03ULL));
}

} // namespace

void DualScan::validate() const
{
    if (!low.same_shape(high))
        throw DataError("dual scan: low and high sinograms differ in shape");
    basis.validate();
    for (const auto& s : spectra) {
        s.validate();
        if (!(s.grid == basis.grid))
            throw DataError("dual scan: spectrum grid differs from the basis grid");
    }
}

double polychromatic_projection(const Spectrum& spectrum, const BasisSet& basis,
                                const BasisPair& path)
{
    const std::size_t bins = spectrum.weights.size();
    // Dividing by the weight sum accumulated alongside makes an empty path exactly zero
    // even when the normalized weights do not sum to one in floating point.
    double transmission = 0.0;
    double weight_sum = 0.0;
    for (std::size_t j = 0; j < bins; ++j) {
        if (spectrum.weights[j] == 0.0)
            continue;
        const double exponent = basis.psi[0][j] * path[0] + basis.psi[1][j] * path[1];
        if (!(std::abs(exponent) <= kMaxAttenuationExponent)) {
            std::ostringstream msg;
            msg << "polychromatic projection: attenuation exponent " << exponent << " at "
                << spectrum.grid.centers_keV[j] << " keV for path integrals (" << path[0] << ", "
                << path[1] << ")";
            throw NumericalError(msg.str());
        }
        transmission += spectrum.weights[j] * std::exp(-exponent);
        weight_sum += spectrum.weights[j];
    }
    const double value = -std::log(transmission / weight_sum);
    if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "polychromatic projection is not finite for path integrals (" << path[0] << ", "
            << path[1] << ")";
        throw NumericalError(msg.str());
    }
    return value;
}

std::array<Sinogram, 2> basis_path_integrals(const Phantom& phantom, const FanBeamGeometry& geom,
                                             PathIntegralMode mode)
{
    if (mode == PathIntegralMode::Discrete) {
        const auto [rho1, rho2] = rasterize(phantom, geom);
        const Projector projector(geom);
        const Image* images[] = {&rho1, &rho2};
        auto sinos = projector.project(images);
        return {std::move(sinos[0]), std::move(sinos[1])};
    }

    std::array<Sinogram, 2> out{geom.make_sinogram(), geom.make_sinogram()};
    parallel_for(geom.n_views, [&](std::size_t v) {
        for (std::size_t c = 0; c < geom.n_channels; ++c) {
            const BasisPair p = analytic_path_integrals(phantom, make_ray(geom, v, c));
            out[0].at(v, c) = p[0];
            out[1].at(v, c) = p[1];
        }
    });
    return out;
}

Sinogram polychromatic_sinogram(const Spectrum& spectrum, const BasisSet& basis,
                                const Sinogram& path1, const Sinogram& path2)
{
    if (!path1.same_shape(path2))
        throw DataError("polychromatic sinogram: path integral sinograms differ in shape");
    Sinogram out(path1.n_views(), path1.n_channels());
    parallel_for(out.size(), [&](std::size_t r) {
        out[r] = polychromatic_projection(spectrum, basis, {path1[r], path2[r]});
    });
    return out;
}

Sinogram add_poisson_noise(const Sinogram& sino, double photons_per_ray, std::uint64_t seed,
                           std::uint64_t stream)
{
    if (!(photons_per_ray > 0.0) || !std::isfinite(photons_per_ray))
        throw ConfigError("noise: photons per ray must be positive and finite");
    Sinogram out(sino.n_views(), sino.n_channels());
    parallel_for(sino.size(), [&](std::size_t r) {
        SplitMix64 rng(ray_key(seed, stream, r));
        const double expected = photons_per_ray * std::exp(-sino[r]);
        long long c = 1;
        if (expected > 0.0) {
            std::poisson_distribution<long long> counts(expected);
            c = std::max<long long>(counts(rng), 1);
        }
        out[r] = -std::log(static_cast<double>(c) / photons_per_ray);
    });
    return out;
}

DualScan simulate_dual_scan(const Phantom& phantom, const FanBeamGeometry& geom,
                            const Spectrum& low, const Spectrum& high, const BasisSet& basis,
                            const NoiseConfig& noise, PathIntegralMode mode)
{
    geom.validate();
    basis.validate();
    DualScan scan;
    scan.basis = basis;
    scan.spectra = {embed(low, basis.grid), embed(high, basis.grid)};

    const auto paths = basis_path_integrals(phantom, geom, mode);
    scan.low = polychromatic_sinogram(scan.spectra[kLow], basis, paths[0], paths[1]);
    scan.high = polychromatic_sinogram(scan.spectra[kHigh], basis, paths[0], paths[1]);
    if (noise.enabled) {
        scan.low = add_poisson_noise(scan.low, noise.photons_per_ray, noise.seed, kLow);
        scan.high = add_poisson_noise(scan.high, noise.photons_per_ray, noise.seed, kHigh);
    }
    scan.validate();
    return scan;
}

} // namespace dsct
