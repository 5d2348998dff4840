#pragma once

#include "dsct/forward.hpp"
#include "dsct/geometry.hpp"
#include "dsct/image.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace dsct {

/// Pair of basis density images (g/cm^3) plus the number of completed iterations.
struct DecompositionState {
    std::array<Image, 2> f;
    std::size_t iteration = 0;

    static DecompositionState zeros(const FanBeamGeometry& geom)
    {
        return {{geom.make_image(), geom.make_image()}, 0};
    }
};

/// Ground-truth basis images used only for diagnostics.
using GroundTruth = std::array<Image, 2>;

/**
 * First-order expansion of the polychromatic model around the current
 * iterate for one ray. Arrays are indexed by spectrum (kLow, kHigh).
 */
struct RayLinearization {
    BasisPair path{};                 // p_i(n), basis path integrals of the iterate
    std::array<double, 2> model{};    // P_k(n) = -ln Q_k(n)
    std::array<double, 2> q{};        // Q_k(n), mean transmission
    std::array<double, 2> psi1{};     // Psi^1_k(n)
    std::array<double, 2> psi2{};     // Psi^2_k(n)
};

using LinearizationCoeffs = std::vector<RayLinearization>;

/// 2x2 sensitivity matrix of a ray, its cofactor matrix and determinant.
struct RaySystem {
    std::array<std::array<double, 2>, 2> m{};
    std::array<std::array<double, 2>, 2> c{};
    double det = 0.0;

    /// True when |det| < tolerance * (max |m_ij|)^2.
    bool degenerate(double tolerance) const noexcept;
};

struct RayUpdate {
    BasisPair delta{};
    bool skipped = false;
};

inline constexpr double kDefaultDegeneracyTolerance = 1e-8;

RayLinearization linearize_ray(const std::array<Spectrum, 2>& spectra, const BasisSet& basis,
                               const BasisPair& path);

/// Projects the iterate once and linearizes every ray.
LinearizationCoeffs linearize(const DecompositionState& state, const Projector& projector,
                              const std::array<Spectrum, 2>& spectra, const BasisSet& basis);

RaySystem ray_system(const RayLinearization& lin);

/// Projection-domain increment (C / det) * (measured - model); skipped rays get zero.
RayUpdate solve_ray_update(const RayLinearization& lin, const std::array<double, 2>& measured,
                           double tolerance = kDefaultDegeneracyTolerance);

/**
 * SART step f_i += lambda * B^T(increment_i / row_sums) / column_sums, with
 * an optional clamp at zero. Pixels no ray crosses are left unchanged.
 */
DecompositionState sart_image_update(const DecompositionState& state,
                                     const std::array<Sinogram, 2>& increments,
                                     const Projector& projector, double relaxation, bool clamp);

/// Same update restricted to the rays of `views`, normalized by their column sums.
DecompositionState sart_image_update(const DecompositionState& state,
                                     const std::array<Sinogram, 2>& increments,
                                     const Projector& projector, double relaxation, bool clamp,
                                     std::span<const std::size_t> views,
                                     const Image& column_sums);

/// View subsets visited within one SART iteration, with their column sums.
struct SartSchedule {
    std::vector<std::vector<std::size_t>> subsets;
    std::vector<Image> column_sums;

    /// min(n_subsets, n_views) interleaved subsets; 1 means all rays at once.
    static SartSchedule make(const Projector& projector, std::size_t n_subsets);
};

inline constexpr std::size_t kDefaultSubsets = 10;
inline constexpr double kDefaultRelaxation = 0.5;

struct EsartConfig {
    std::size_t iterations = 30;
    double relaxation = kDefaultRelaxation;
    bool clamp = true;
    double degeneracy_tolerance = kDefaultDegeneracyTolerance;
    std::size_t subsets = kDefaultSubsets;

    void validate() const;
};

/// One row of the per-iteration diagnostics CSV.
struct IterationDiagnostics {
    std::size_t iteration = 0;
    double residual_low = 0.0;  // before the update of this iteration
    double residual_high = 0.0;
    std::size_t skipped_rays = 0;
    std::optional<double> rmse_f1;
    std::optional<double> rmse_f2;
    std::optional<double> rmse_f1_filtered;
    std::optional<double> rmse_f2_filtered;
};

struct DecompositionResult {
    DecompositionState state;
    std::vector<IterationDiagnostics> diagnostics;
};

struct EsartStep {
    DecompositionState state;
    std::array<double, 2> residual{};
    std::size_t skipped_rays = 0;
};

/// Residual norms ||P_k - P_k(n)|| of the current iterate against the measurement.
std::array<double, 2> projection_residuals(const DecompositionState& state, const DualScan& scan,
                                           const Projector& projector);

/**
 * One iteration: for each view subset in turn, linearize its rays at the
 * current iterate, solve the per-ray 2x2 systems and apply the SART update.
 * The reported residual belongs to the iterate entering the step.
 */
EsartStep esart_step(const DecompositionState& state, const DualScan& scan,
                     const Projector& projector, const EsartConfig& config,
                     const SartSchedule& schedule);

DecompositionResult decompose_esart(const DualScan& scan, const Projector& projector,
                                    const EsartConfig& config,
                                    const GroundTruth* truth = nullptr,
                                    std::optional<DecompositionState> initial = std::nullopt);

DecompositionResult decompose_esart(const DualScan& scan, const FanBeamGeometry& geom,
                                    const EsartConfig& config,
                                    const GroundTruth* truth = nullptr);

} // namespace dsct
