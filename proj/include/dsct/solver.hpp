#pragma once

#include "dsct/esart.hpp"
#include "dsct/guided_filter.hpp"

#include <array>
#include <optional>

namespace dsct {

/// Image whose local structure constrains basis image i.
enum class GuideSource {
    High,     ///< SART reconstruction of the high-energy sinogram
    Low,      ///< SART reconstruction of the low-energy sinogram
    Self,     ///< the intermediate E-SART iterate of the same basis
    External, ///< ProposedConfig::external_guide
};

/// Guided-filter settings for one basis; epsilon may be relative to the guide's range.
struct FilterSetting {
    int radius_px = 2;
    double epsilon = 1e-4;
    bool relative = true;

    guided::GuidedFilterParams resolve(const Image& guide) const;
};

/// Filter radius for an n x n grid: 8 px at 512, scaled with n, at least 2.
int default_filter_radius(std::size_t grid_size);

/**
 * Settings of the guided-filter constrained decomposition. The data-term
 * weight of the joint model drops out of the alternating scheme, so only
 * (radius, epsilon) per basis are exposed.
 */
struct ProposedConfig {
    std::size_t iterations = 30;
    double relaxation = kDefaultRelaxation;
    bool clamp = true;
    double degeneracy_tolerance = kDefaultDegeneracyTolerance;
    std::size_t subsets = kDefaultSubsets;
    std::array<FilterSetting, 2> filters{};
    std::array<GuideSource, 2> guides{GuideSource::High, GuideSource::High};
    std::size_t guide_iterations = 30;
    std::optional<Image> external_guide;

    static ProposedConfig defaults(std::size_t grid_size);
    void validate() const;
    EsartConfig esart() const;
};

/**
 * Single-spectrum SART reconstruction treating the polychromatic sinogram
 * as line integrals of an effective attenuation map (1/cm), clamped at zero.
 */
Image reconstruct_guide(const Sinogram& sino, const Projector& projector, std::size_t iterations,
                        double relaxation = kDefaultRelaxation, std::size_t subsets = kDefaultSubsets);
Image reconstruct_guide(const Sinogram& sino, const FanBeamGeometry& geom, std::size_t iterations,
                        double relaxation = kDefaultRelaxation, std::size_t subsets = kDefaultSubsets);
Image reconstruct_guide(const Sinogram& sino, const Projector& projector, std::size_t iterations,
                        double relaxation, const SartSchedule& schedule);

/// One outer iteration: an E-SART step followed by guided filtering of each basis.
struct ProposedStep {
    EsartStep esart;            // intermediate f(*) and its residuals
    DecompositionState state;   // filtered f(n+1)
};

ProposedStep proposed_step(const DecompositionState& state, const DualScan& scan,
                           const Projector& projector, const ProposedConfig& config,
                           const SartSchedule& schedule,
                           const std::array<const Image*, 2>& guides);

/**
 * Guided-filter constrained decomposition. rmse_f1/rmse_f2 in the
 * diagnostics refer to the intermediate E-SART iterate, the *_filtered
 * columns to the filtered iterate that is carried forward.
 */
DecompositionResult decompose_proposed(const DualScan& scan, const Projector& projector,
                                       const ProposedConfig& config,
                                       const GroundTruth* truth = nullptr);
DecompositionResult decompose_proposed(const DualScan& scan, const FanBeamGeometry& geom,
                                       const ProposedConfig& config,
                                       const GroundTruth* truth = nullptr);

/// Monochromatic attenuation psi_1(E) f_1 + psi_2(E) f_2 (1/cm).
Image composite_image(const DecompositionState& state, const BasisSet& basis, double energy_keV);

} // namespace dsct
