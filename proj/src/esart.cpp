#include "dsct/esart.hpp"

#include "dsct/error.hpp"
#include "dsct/metrics.hpp"
#include "dsct/parallel.hpp"

#include <cmath>
#include <sstream>

namespace dsct {

bool RaySystem::degenerate(double tolerance) const noexcept
{
    double scale = 0.0;
    for (const auto& row : m)
        for (double v : row)
            scale = std::max(scale, std::abs(v));
    return !(std::abs(det) >= tolerance * scale * scale) || scale == 0.0;
}

RayLinearization linearize_ray(const std::array<Spectrum, 2>& spectra, const BasisSet& basis,
                               const BasisPair& path)
{
    RayLinearization lin;
    lin.path = path;
    for (std::size_t k = 0; k < 2; ++k) {
        const auto& w = spectra[k].weights;
        double q = 0.0;
        double psi1 = 0.0;
        double psi2 = 0.0;
        double weight_sum = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            if (w[j] == 0.0)
                continue;
            const double exponent = basis.psi[0][j] * path[0] + basis.psi[1][j] * path[1];
            if (!(std::abs(exponent) <= kMaxAttenuationExponent)) {
                std::ostringstream msg;
                msg << "linearize: attenuation exponent " << exponent << " for path integrals ("
                    << path[0] << ", " << path[1] << ")";
                throw NumericalError(msg.str());
            }
            const double t = w[j] * std::exp(-exponent);
            q += t;
            psi1 += basis.psi[0][j] * t;
            psi2 += basis.psi[1][j] * t;
            weight_sum += w[j];
        }
        if (!(q > 0.0))
            throw NumericalError("linearize: mean transmission is not positive");
        lin.q[k] = q;
        lin.psi1[k] = psi1;
        lin.psi2[k] = psi2;
        lin.model[k] = -std::log(q / weight_sum); // same form as polychromatic_projection
    }
    return lin;
}

LinearizationCoeffs linearize(const DecompositionState& state, const Projector& projector,
                              const std::array<Spectrum, 2>& spectra, const BasisSet& basis)
{
    const Image* images[] = {&state.f[0], &state.f[1]};
    const auto paths = projector.project(images);
    LinearizationCoeffs coeffs(paths[0].size());
    parallel_for(coeffs.size(), [&](std::size_t r) {
        coeffs[r] = linearize_ray(spectra, basis, {paths[0][r], paths[1][r]});
    });
    return coeffs;
}

RaySystem ray_system(const RayLinearization& lin)
{
    RaySystem sys;
    for (std::size_t k = 0; k < 2; ++k) {
        sys.m[k][0] = lin.psi1[k] / lin.q[k];
        sys.m[k][1] = lin.psi2[k] / lin.q[k];
    }
    sys.c = {{{sys.m[1][1], -sys.m[0][1]}, {-sys.m[1][0], sys.m[0][0]}}};
    sys.det = sys.m[0][0] * sys.m[1][1] - sys.m[0][1] * sys.m[1][0];
    return sys;
}

RayUpdate solve_ray_update(const RayLinearization& lin, const std::array<double, 2>& measured,
                           double tolerance)
{
    const RaySystem sys = ray_system(lin);
    if (sys.degenerate(tolerance))
        return {{0.0, 0.0}, true};
    const double r0 = measured[0] - lin.model[0];
    const double r1 = measured[1] - lin.model[1];
    return {{(sys.c[0][0] * r0 + sys.c[0][1] * r1) / sys.det,
             (sys.c[1][0] * r0 + sys.c[1][1] * r1) / sys.det},
            false};
}

DecompositionState sart_image_update(const DecompositionState& state,
                                     const std::array<Sinogram, 2>& increments,
                                     const Projector& projector, double relaxation, bool clamp)
{
    std::vector<std::size_t> views(projector.geometry().n_views);
    for (std::size_t v = 0; v < views.size(); ++v)
        views[v] = v;
    return sart_image_update(state, increments, projector, relaxation, clamp, views,
                             projector.column_sums());
}

DecompositionState sart_image_update(const DecompositionState& state,
                                     const std::array<Sinogram, 2>& increments,
                                     const Projector& projector, double relaxation, bool clamp,
                                     std::span<const std::size_t> views,
                                     const Image& column_sums)
{
    const Sinogram& rows = projector.row_sums();
    const std::size_t nc = rows.n_channels();
    std::array<Sinogram, 2> scaled;
    for (std::size_t i = 0; i < 2; ++i) {
        if (!increments[i].same_shape(rows))
            throw DataError("sart update: increment sinogram does not match the geometry");
        scaled[i] = Sinogram(rows.n_views(), nc);
        for (std::size_t v : views) {
            for (std::size_t r = v * nc; r < (v + 1) * nc; ++r) {
                if (!std::isfinite(increments[i][r]))
                    throw NumericalError("sart update: non-finite projection increment");
                scaled[i][r] = rows[r] > 0.0 ? increments[i][r] / rows[r] : 0.0;
            }
        }
    }
    const Sinogram* sinos[] = {&scaled[0], &scaled[1]};
    const auto corrections = projector.backproject(sinos, views);

    DecompositionState next = state;
    next.iteration = state.iteration + 1;
    for (std::size_t i = 0; i < 2; ++i) {
        Image& f = next.f[i];
        if (!f.same_shape(column_sums))
            throw DataError("sart update: state image does not match the geometry");
        for (std::size_t p = 0; p < f.size(); ++p) {
            if (column_sums[p] > 0.0)
                f[p] += relaxation * corrections[i][p] / column_sums[p];
            if (clamp && f[p] < 0.0)
                f[p] = 0.0;
        }
    }
    return next;
}

SartSchedule SartSchedule::make(const Projector& projector, std::size_t n_subsets)
{
    if (n_subsets < 1)
        throw ConfigError("solver: subsets must be at least 1");
    const std::size_t n_views = projector.geometry().n_views;
    SartSchedule schedule;
    if (n_subsets == 1) {
        std::vector<std::size_t> all(n_views);
        for (std::size_t v = 0; v < n_views; ++v)
            all[v] = v;
        schedule.subsets.push_back(std::move(all));
        schedule.column_sums.push_back(projector.column_sums());
        return schedule;
    }
    schedule.subsets = view_subsets(n_views, std::min(n_subsets, n_views));
    for (const auto& views : schedule.subsets)
        schedule.column_sums.push_back(projector.column_sums(views));
    return schedule;
}

void EsartConfig::validate() const
{
    if (!(relaxation > 0.0) || !std::isfinite(relaxation))
        throw ConfigError("solver: relaxation must be positive");
    if (!(degeneracy_tolerance >= 0.0))
        throw ConfigError("solver: degeneracy tolerance must be nonnegative");
    if (subsets < 1)
        throw ConfigError("solver: subsets must be at least 1");
}

std::array<double, 2> projection_residuals(const DecompositionState& state, const DualScan& scan,
                                           const Projector& projector)
{
    const Image* images[] = {&state.f[0], &state.f[1]};
    const auto paths = projector.project(images);
    std::vector<std::array<double, 2>> squared(paths[0].size());
    parallel_for(squared.size(), [&](std::size_t r) {
        for (std::size_t k = 0; k < 2; ++k) {
            const double model =
                polychromatic_projection(scan.spectra[k], scan.basis, {paths[0][r], paths[1][r]});
            const double d = scan.sinogram(k)[r] - model;
            squared[r][k] = d * d;
        }
    });
    std::array<double, 2> residual{0.0, 0.0};
    for (const auto& s : squared) {
        residual[0] += s[0];
        residual[1] += s[1];
    }
    return {std::sqrt(residual[0]), std::sqrt(residual[1])};
}

EsartStep esart_step(const DecompositionState& state, const DualScan& scan,
                     const Projector& projector, const EsartConfig& config,
                     const SartSchedule& schedule)
{
    const FanBeamGeometry& geom = projector.geometry();
    const std::size_t nc = geom.n_channels;
    EsartStep step;
    if (schedule.subsets.size() > 1)
        step.residual = projection_residuals(state, scan, projector);

    step.state = state;
    std::array<Sinogram, 2> increments{geom.make_sinogram(), geom.make_sinogram()};
    std::vector<unsigned char> skipped(geom.n_rays(), 0);
    std::vector<std::array<double, 2>> squared(geom.n_rays());
    for (std::size_t s = 0; s < schedule.subsets.size(); ++s) {
        const auto& views = schedule.subsets[s];
        const Image* images[] = {&step.state.f[0], &step.state.f[1]};
        const auto paths = projector.project(images, views);
        parallel_for(views.size() * nc, [&](std::size_t item) {
            const std::size_t r = views[item / nc] * nc + item % nc;
            const RayLinearization lin =
                linearize_ray(scan.spectra, scan.basis, {paths[0][r], paths[1][r]});
            const RayUpdate update =
                solve_ray_update(lin, {scan.low[r], scan.high[r]}, config.degeneracy_tolerance);
            increments[0][r] = update.delta[0];
            increments[1][r] = update.delta[1];
            skipped[r] = update.skipped ? 1 : 0;
            for (std::size_t k = 0; k < 2; ++k) {
                const double d = scan.sinogram(k)[r] - lin.model[k];
                squared[r][k] = d * d;
            }
        });
        const std::size_t iteration = step.state.iteration;
        step.state = sart_image_update(step.state, increments, projector, config.relaxation,
                                       config.clamp, views, schedule.column_sums[s]);
        step.state.iteration = iteration;
    }
    step.state.iteration = state.iteration + 1;

    for (std::size_t r = 0; r < skipped.size(); ++r)
        step.skipped_rays += skipped[r];
    if (schedule.subsets.size() == 1) {
        std::array<double, 2> residual{0.0, 0.0};
        for (const auto& sq : squared) {
            residual[0] += sq[0];
            residual[1] += sq[1];
        }
        step.residual = {std::sqrt(residual[0]), std::sqrt(residual[1])};
    }
    return step;
}

DecompositionResult decompose_esart(const DualScan& scan, const Projector& projector,
                                    const EsartConfig& config, const GroundTruth* truth,
                                    std::optional<DecompositionState> initial)
{
    config.validate();
    scan.validate();
    const FanBeamGeometry& geom = projector.geometry();
    if (scan.low.n_views() != geom.n_views || scan.low.n_channels() != geom.n_channels)
        throw DataError("decompose: sinogram dimensions do not match the geometry");

    const SartSchedule schedule = SartSchedule::make(projector, config.subsets);
    DecompositionResult result;
    result.state = initial ? std::move(*initial) : DecompositionState::zeros(geom);
    for (std::size_t n = 0; n < config.iterations; ++n) {
        EsartStep step = esart_step(result.state, scan, projector, config, schedule);
        result.state = std::move(step.state);
        IterationDiagnostics diag;
        diag.iteration = result.state.iteration;
        diag.residual_low = step.residual[kLow];
        diag.residual_high = step.residual[kHigh];
        diag.skipped_rays = step.skipped_rays;
        if (truth) {
            diag.rmse_f1 = rmse(result.state.f[0], (*truth)[0]);
            diag.rmse_f2 = rmse(result.state.f[1], (*truth)[1]);
        }
        result.diagnostics.push_back(diag);
    }
    return result;
}

DecompositionResult decompose_esart(const DualScan& scan, const FanBeamGeometry& geom,
                                    const EsartConfig& config, const GroundTruth* truth)
{
    geom.validate();
    const Projector projector(geom);
    return decompose_esart(scan, projector, config, truth);
}

} // namespace dsct
