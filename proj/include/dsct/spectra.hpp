#pragma once

#include "dsct/image.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dsct {

/// Uniform energy bins, identified by their centers.
struct EnergyGrid {
    std::vector<double> centers_keV;
    double bin_width_keV = 1.0;

    std::size_t size() const noexcept { return centers_keV.size(); }
    void validate() const;

    friend bool operator==(const EnergyGrid&, const EnergyGrid&) = default;
};

/// Normalized emission spectrum; weights[j] = S_j * dE and sums to one.
struct Spectrum {
    EnergyGrid grid;
    std::vector<double> weights;
    /// Sum of the weights as read from the file, before normalization.
    double original_sum = 1.0;

    /// Throws DataError unless weights are nonnegative and sum to one.
    void validate() const;
    double mean_energy_keV() const;
};

/// Tabulated (energy, mass attenuation) pairs with log-log interpolation.
class AttenuationTable {
public:
    AttenuationTable() = default;
    AttenuationTable(std::vector<double> energies_keV, std::vector<double> values);

    /// Log-log interpolation; throws DataError outside the tabulated range.
    double at(double energy_keV) const;

    const std::vector<double>& energies_keV() const noexcept { return energies_; }
    const std::vector<double>& values() const noexcept { return values_; }
    bool empty() const noexcept { return energies_.empty(); }

private:
    std::vector<double> energies_;
    std::vector<double> values_;
};

/// Two basis functions psi_i sampled on an energy grid.
struct BasisSet {
    EnergyGrid grid;
    std::array<std::vector<double>, 2> psi;
    std::array<std::string, 2> names;
    /// Source tables, kept for evaluating psi at arbitrary energies.
    std::array<AttenuationTable, 2> tables;

    void validate() const;
    /// psi_i(E) from the source table; falls back to the sampled grid for table-less sets.
    double psi_at(std::size_t basis, double energy_keV) const;
};

Spectrum parse_spectrum(std::istream& in, std::string_view source);
Spectrum load_spectrum(const std::filesystem::path& path);

AttenuationTable parse_attenuation_table(std::istream& in, std::string_view source);
AttenuationTable load_attenuation_table(const std::filesystem::path& path);

/// Samples a table at the grid's bin centers.
std::vector<double> resample(const AttenuationTable& table, const EnergyGrid& grid);
std::vector<double> load_basis(const std::filesystem::path& path, const EnergyGrid& grid);

BasisSet make_basis(std::array<AttenuationTable, 2> tables, std::array<std::string, 2> names,
                    const EnergyGrid& grid);

/**
 * Smallest uniform grid that contains the centers of both grids. Single-bin
 * grids adopt the other grid's width. Throws DataError when the bins do not
 * line up.
 */
EnergyGrid common_grid(const EnergyGrid& a, const EnergyGrid& b);

/// Re-expresses a spectrum on a finer-or-equal grid containing its bins (zero elsewhere).
Spectrum embed(const Spectrum& spectrum, const EnergyGrid& grid);

/// Linear attenuation psi_1 rho_1 + psi_2 rho_2 at bin j (1/cm).
double mu_at(const BasisSet& basis, const BasisPair& densities, std::size_t j);

} // namespace dsct
