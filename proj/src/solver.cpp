#include "dsct/solver.hpp"

#include "dsct/error.hpp"
#include "dsct/metrics.hpp"

#include <cmath>

namespace dsct {

guided::GuidedFilterParams FilterSetting::resolve(const Image& guide) const
{
    guided::GuidedFilterParams params{radius_px,
                                      relative ? guided::relative_epsilon(guide, epsilon) : epsilon};
    params.validate();
    return params;
}

int default_filter_radius(std::size_t grid_size)
{
    const auto scaled = std::lround(8.0 * static_cast<double>(grid_size) / 512.0);
    return static_cast<int>(std::max<long>(2, scaled));
}

ProposedConfig ProposedConfig::defaults(std::size_t grid_size)
{
    ProposedConfig config;
    const FilterSetting setting{default_filter_radius(grid_size), 1e-4, true};
    config.filters = {setting, setting};
    return config;
}

void ProposedConfig::validate() const
{
    esart().validate();
    if (iterations < 1)
        throw ConfigError("solver: the proposed method needs at least one iteration");
    for (const auto& f : filters) {
        if (f.radius_px < 1)
            throw ConfigError("solver: filter radius must be at least 1 pixel");
        if (!(f.epsilon > 0.0) || !std::isfinite(f.epsilon))
            throw ConfigError("solver: filter epsilon must be positive");
    }
    for (GuideSource g : guides)
        if (g == GuideSource::External && !external_guide)
            throw ConfigError("solver: external guide requested but none supplied");
}

EsartConfig ProposedConfig::esart() const
{
    return {iterations, relaxation, clamp, degeneracy_tolerance, subsets};
}

Image reconstruct_guide(const Sinogram& sino, const Projector& projector, std::size_t iterations,
                        double relaxation, std::size_t subsets)
{
    return reconstruct_guide(sino, projector, iterations, relaxation,
                             SartSchedule::make(projector, subsets));
}

Image reconstruct_guide(const Sinogram& sino, const Projector& projector, std::size_t iterations,
                        double relaxation, const SartSchedule& schedule)
{
    const FanBeamGeometry& geom = projector.geometry();
    if (sino.n_views() != geom.n_views || sino.n_channels() != geom.n_channels)
        throw DataError("guide reconstruction: sinogram does not match the geometry");
    if (!(relaxation > 0.0) || !std::isfinite(relaxation))
        throw ConfigError("guide reconstruction: relaxation must be positive");

    const Sinogram& rows = projector.row_sums();
    const std::size_t nc = geom.n_channels;
    Image image = geom.make_image();
    Sinogram scaled = geom.make_sinogram();
    for (std::size_t n = 0; n < iterations; ++n) {
        for (std::size_t s = 0; s < schedule.subsets.size(); ++s) {
            const auto& views = schedule.subsets[s];
            const Image& cols = schedule.column_sums[s];
            const Image* images[] = {&image};
            const Sinogram model = std::move(projector.project(images, views).front());
            for (std::size_t v : views)
                for (std::size_t r = v * nc; r < (v + 1) * nc; ++r)
                    scaled[r] = rows[r] > 0.0 ? (sino[r] - model[r]) / rows[r] : 0.0;
            const Sinogram* sinos[] = {&scaled};
            const Image correction = std::move(projector.backproject(sinos, views).front());
            for (std::size_t p = 0; p < image.size(); ++p) {
                if (cols[p] > 0.0)
                    image[p] += relaxation * correction[p] / cols[p];
                if (image[p] < 0.0)
                    image[p] = 0.0;
            }
        }
    }
    return image;
}

Image reconstruct_guide(const Sinogram& sino, const FanBeamGeometry& geom, std::size_t iterations,
                        double relaxation, std::size_t subsets)
{
    geom.validate();
    return reconstruct_guide(sino, Projector(geom), iterations, relaxation, subsets);
}

ProposedStep proposed_step(const DecompositionState& state, const DualScan& scan,
                           const Projector& projector, const ProposedConfig& config,
                           const SartSchedule& schedule,
                           const std::array<const Image*, 2>& guides)
{
    ProposedStep step;
    step.esart = esart_step(state, scan, projector, config.esart(), schedule);
    step.state = step.esart.state;
    for (std::size_t i = 0; i < 2; ++i) {
        const Image& intermediate = step.esart.state.f[i];
        const Image& guide = guides[i] ? *guides[i] : intermediate;
        step.state.f[i] = guided::apply(guide, intermediate, config.filters[i].resolve(guide));
    }
    return step;
}

DecompositionResult decompose_proposed(const DualScan& scan, const Projector& projector,
                                       const ProposedConfig& config, const GroundTruth* truth)
{
    config.validate();
    scan.validate();
    const FanBeamGeometry& geom = projector.geometry();
    if (scan.low.n_views() != geom.n_views || scan.low.n_channels() != geom.n_channels)
        throw DataError("decompose: sinogram dimensions do not match the geometry");

    const SartSchedule schedule = SartSchedule::make(projector, config.subsets);
    std::optional<Image> high_guide;
    std::optional<Image> low_guide;
    std::array<const Image*, 2> guides{nullptr, nullptr};
    for (std::size_t i = 0; i < 2; ++i) {
        switch (config.guides[i]) {
        case GuideSource::High:
            if (!high_guide)
                high_guide = reconstruct_guide(scan.high, projector, config.guide_iterations,
                                               config.relaxation, schedule);
            guides[i] = &*high_guide;
            break;
        case GuideSource::Low:
            if (!low_guide)
                low_guide = reconstruct_guide(scan.low, projector, config.guide_iterations,
                                              config.relaxation, schedule);
            guides[i] = &*low_guide;
            break;
        case GuideSource::Self:
            guides[i] = nullptr;
            break;
        case GuideSource::External:
            if (!config.external_guide->same_shape(geom.make_image()))
                throw DataError("external guide does not match the reconstruction grid");
            guides[i] = &*config.external_guide;
            break;
        }
    }

    DecompositionResult result;
    result.state = DecompositionState::zeros(geom);
    for (std::size_t n = 0; n < config.iterations; ++n) {
        ProposedStep step = proposed_step(result.state, scan, projector, config, schedule, guides);
        IterationDiagnostics diag;
        diag.iteration = step.state.iteration;
        diag.residual_low = step.esart.residual[kLow];
        diag.residual_high = step.esart.residual[kHigh];
        diag.skipped_rays = step.esart.skipped_rays;
        if (truth) {
            diag.rmse_f1 = rmse(step.esart.state.f[0], (*truth)[0]);
            diag.rmse_f2 = rmse(step.esart.state.f[1], (*truth)[1]);
            diag.rmse_f1_filtered = rmse(step.state.f[0], (*truth)[0]);
            diag.rmse_f2_filtered = rmse(step.state.f[1], (*truth)[1]);
        }
        result.diagnostics.push_back(diag);
        result.state = std::move(step.state);
    }
    return result;
}

DecompositionResult decompose_proposed(const DualScan& scan, const FanBeamGeometry& geom,
                                       const ProposedConfig& config, const GroundTruth* truth)
{
    geom.validate();
    const Projector projector(geom);
    return decompose_proposed(scan, projector, config, truth);
}

Image composite_image(const DecompositionState& state, const BasisSet& basis, double energy_keV)
{
    const double psi1 = basis.psi_at(0, energy_keV);
    const double psi2 = basis.psi_at(1, energy_keV);
    if (!state.f[0].same_shape(state.f[1]))
        throw DataError("composite: basis images differ in shape");
    Image out = state.f[0];
    for (std::size_t p = 0; p < out.size(); ++p)
        out[p] = psi1 * state.f[0][p] + psi2 * state.f[1][p];
    return out;
}

} // namespace dsct
