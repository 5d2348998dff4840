#pragma once

#include "dsct/esart.hpp"
#include "dsct/forward.hpp"
#include "dsct/geometry.hpp"
#include "dsct/guided_filter.hpp"
#include "dsct/spectra.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dsct::test {

using Matrix = std::vector<std::vector<double>>;

std::filesystem::path data_dir();
std::filesystem::path config_dir();
std::filesystem::path scratch_dir(const std::string& name);

/// Length of the segment a-b inside the axis-aligned box, by parametric clipping.
double clipped_length(Point2 a, Point2 b, double x0, double y0, double x1, double y1);

/// Dense rays x pixels system matrix built pixel by pixel from clipped_length.
Matrix system_matrix(const FanBeamGeometry& geom);

std::vector<double> multiply(const Matrix& a, std::span<const double> x);
std::vector<double> multiply_transposed(const Matrix& a, std::span<const double> y);

/// -ln sum_j w_j exp(-(psi1_j p1 + psi2_j p2)) in long double, bin by bin.
long double direct_projection(std::span<const double> weights, std::span<const double> psi1,
                              std::span<const double> psi2, double p1, double p2);

/// Guided filter evaluated window by window from the normal equations.
Image naive_guided_filter(const Image& guide, const Image& input, int radius, double epsilon);
guided::FilterCoeffs naive_coeffs(const Image& guide, const Image& input, int radius,
                                  double epsilon);

/// Spectrum on a uniform grid; weights are normalized.
Spectrum make_spectrum(std::vector<double> energies, std::vector<double> weights);
BasisSet make_table_basis(const EnergyGrid& grid, std::vector<double> psi1,
                          std::vector<double> psi2);

/// Bundled physics: 80 kV / 140 kV spectra on a common grid with water / bone bases.
struct Physics {
    std::array<Spectrum, 2> spectra;
    BasisSet basis;
};
Physics bundled_physics();
/// Single-bin spectra at the given energies with the bundled water / bone tables.
Physics monochromatic_physics(double low_keV, double high_keV);

FanBeamGeometry desk_geometry();
FanBeamGeometry small_geometry(std::size_t n, std::size_t views, std::size_t channels);

Image random_image(std::size_t w, std::size_t h, std::mt19937_64& rng, double lo = 0.0,
                   double hi = 1.0);

/// Dense reference of one SART pass over the given view subsets.
std::vector<double> dense_sart(const Matrix& a, const FanBeamGeometry& geom,
                               std::vector<double> f, std::span<const double> sino,
                               const std::vector<std::vector<std::size_t>>& subsets, double lambda,
                               bool clamp);

/// Dense reference of one E-SART iteration over the given view subsets.
std::array<std::vector<double>, 2> dense_esart_iteration(
    const Matrix& a, const FanBeamGeometry& geom, std::array<std::vector<double>, 2> f,
    const DualScan& scan, const std::vector<std::vector<std::size_t>>& subsets, double lambda,
    bool clamp, double tolerance);

} // namespace dsct::test
