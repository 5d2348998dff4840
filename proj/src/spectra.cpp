#include "dsct/spectra.hpp"

#include "dsct/error.hpp"
#include "dsct/text_table.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dsct {

namespace {

constexpr double kUniformTolerance = 1e-6;

std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path.string());
    return in;
}

std::string at_line(std::string_view source, std::size_t line)
{
    std::ostringstream out;
    out << source << ":" << line << ": ";
    return out.str();
}

} // namespace

void EnergyGrid::validate() const
{
    if (centers_keV.empty())
        throw DataError("energy grid is empty");
    if (!(bin_width_keV > 0.0))
        throw DataError("energy grid bin width must be positive");
    for (std::size_t j = 0; j < centers_keV.size(); ++j) {
        if (!(centers_keV[j] > 0.0))
            throw DataError("energy grid contains a nonpositive energy");
        if (j > 0 && !(centers_keV[j] > centers_keV[j - 1]))
            throw DataError("energy grid is not strictly ascending");
    }
}

void Spectrum::validate() const
{
    grid.validate();
    if (weights.size() != grid.size())
        throw DataError("spectrum weights do not match its energy grid");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw DataError("spectrum weights must be finite and nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw DataError("spectrum weights are not normalized");
}

double Spectrum::mean_energy_keV() const
{
    double mean = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j)
        mean += weights[j] * grid.centers_keV[j];
    return mean;
}

Spectrum parse_spectrum(std::istream& in, std::string_view source)
{
    const auto rows = read_numeric_rows(in, source, 2);
    if (rows.empty())
        throw DataError(std::string(source) + ": spectrum file has no data");

    Spectrum spectrum;
    for (const auto& row : rows) {
        const double energy = row.values[0];
        const double weight = row.values[1];
        if (!(energy > 0.0))
            throw DataError(at_line(source, row.line) + "energy must be positive");
        if (!(weight >= 0.0))
            throw DataError(at_line(source, row.line) + "negative weight");
        if (!spectrum.grid.centers_keV.empty() && !(energy > spectrum.grid.centers_keV.back()))
            throw DataError(at_line(source, row.line) + "energies must be strictly ascending");
        spectrum.grid.centers_keV.push_back(energy);
        spectrum.weights.push_back(weight);
    }

    const auto& e = spectrum.grid.centers_keV;
    if (e.size() > 1) {
        const double width = (e.back() - e.front()) / static_cast<double>(e.size() - 1);
        for (std::size_t j = 1; j < e.size(); ++j) {
            if (std::abs((e[j] - e[j - 1]) - width) > kUniformTolerance * width)
                throw DataError(at_line(source, rows[j].line) + "energy spacing is not uniform");
        }
        spectrum.grid.bin_width_keV = width;
    }

    const double sum = std::accumulate(spectrum.weights.begin(), spectrum.weights.end(), 0.0);
    if (!(sum > 0.0))
        throw DataError(std::string(source) + ": spectrum weights sum to zero");
    for (double& w : spectrum.weights)
        w /= sum;
    spectrum.original_sum = sum;
    return spectrum;
}

Spectrum load_spectrum(const std::filesystem::path& path)
{
    auto in = open_input(path);
    return parse_spectrum(in, path.string());
}

AttenuationTable::AttenuationTable(std::vector<double> energies_keV, std::vector<double> values)
    : energies_(std::move(energies_keV)), values_(std::move(values))
{
    if (energies_.empty() || energies_.size() != values_.size())
        throw DataError("attenuation table needs matching, nonempty energy and value columns");
    for (std::size_t i = 0; i < energies_.size(); ++i) {
        if (!(energies_[i] > 0.0) || !(values_[i] > 0.0))
            throw DataError("attenuation table entries must be positive");
        if (i > 0 && !(energies_[i] > energies_[i - 1]))
            throw DataError("attenuation table energies must be strictly ascending");
    }
}

double AttenuationTable::at(double energy_keV) const
{
    if (energies_.empty())
        throw DataError("attenuation table is empty");
    const double lo = energies_.front();
    const double hi = energies_.back();
    if (!(energy_keV >= lo * (1.0 - 1e-12)) || !(energy_keV <= hi * (1.0 + 1e-12))) {
        std::ostringstream msg;
        msg << "energy " << energy_keV << " keV outside attenuation table range [" << lo << ", "
            << hi << "] keV";
        throw DataError(msg.str());
    }
    energy_keV = std::clamp(energy_keV, lo, hi);

    const auto upper = std::lower_bound(energies_.begin(), energies_.end(), energy_keV);
    const auto i = static_cast<std::size_t>(upper - energies_.begin());
    if (energies_[i] == energy_keV)
        return values_[i];
    const double e0 = energies_[i - 1];
    const double e1 = energies_[i];
    const double t = std::log(energy_keV / e0) / std::log(e1 / e0);
    return std::exp(std::log(values_[i - 1]) + t * std::log(values_[i] / values_[i - 1]));
}

AttenuationTable parse_attenuation_table(std::istream& in, std::string_view source)
{
    const auto rows = read_numeric_rows(in, source, 2);
    std::vector<double> energies;
    std::vector<double> values;
    for (const auto& row : rows) {
        if (!(row.values[0] > 0.0) || !(row.values[1] > 0.0))
            throw DataError(at_line(source, row.line) + "energy and attenuation must be positive");
        if (!energies.empty() && !(row.values[0] > energies.back()))
            throw DataError(at_line(source, row.line) + "energies must be strictly ascending");
        energies.push_back(row.values[0]);
        values.push_back(row.values[1]);
    }
    if (energies.empty())
        throw DataError(std::string(source) + ": attenuation table has no data");
    return AttenuationTable(std::move(energies), std::move(values));
}

AttenuationTable load_attenuation_table(const std::filesystem::path& path)
{
    auto in = open_input(path);
    return parse_attenuation_table(in, path.string());
}

std::vector<double> resample(const AttenuationTable& table, const EnergyGrid& grid)
{
    std::vector<double> out;
    out.reserve(grid.size());
    for (double e : grid.centers_keV)
        out.push_back(table.at(e));
    return out;
}

std::vector<double> load_basis(const std::filesystem::path& path, const EnergyGrid& grid)
{
    return resample(load_attenuation_table(path), grid);
}

void BasisSet::validate() const
{
    grid.validate();
    for (const auto& values : psi) {
        if (values.size() != grid.size())
            throw DataError("basis functions do not match the energy grid");
        for (double v : values)
            if (!(v > 0.0) || !std::isfinite(v))
                throw DataError("basis functions must be positive and finite");
    }
}

double BasisSet::psi_at(std::size_t basis, double energy_keV) const
{
    if (!tables[basis].empty())
        return tables[basis].at(energy_keV);
    const auto& e = grid.centers_keV;
    for (std::size_t j = 0; j < e.size(); ++j)
        if (std::abs(e[j] - energy_keV) <= 1e-9 * energy_keV)
            return psi[basis][j];
    throw DataError("basis has no table and the requested energy is not a grid node");
}

BasisSet make_basis(std::array<AttenuationTable, 2> tables, std::array<std::string, 2> names,
                    const EnergyGrid& grid)
{
    BasisSet basis;
    basis.grid = grid;
    for (std::size_t i = 0; i < 2; ++i)
        basis.psi[i] = resample(tables[i], grid);
    basis.names = std::move(names);
    basis.tables = std::move(tables);
    basis.validate();
    return basis;
}

EnergyGrid common_grid(const EnergyGrid& a, const EnergyGrid& b)
{
    a.validate();
    b.validate();
    double width = 0.0;
    if (a.size() > 1 && b.size() > 1) {
        if (std::abs(a.bin_width_keV - b.bin_width_keV) >
            kUniformTolerance * std::max(a.bin_width_keV, b.bin_width_keV))
            throw DataError("spectra use different energy bin widths");
        width = a.bin_width_keV;
    } else if (a.size() > 1) {
        width = a.bin_width_keV;
    } else if (b.size() > 1) {
        width = b.bin_width_keV;
    } else {
        width = std::abs(a.centers_keV[0] - b.centers_keV[0]);
        if (width == 0.0)
            width = a.bin_width_keV;
    }

    const double start = std::min(a.centers_keV.front(), b.centers_keV.front());
    const double stop = std::max(a.centers_keV.back(), b.centers_keV.back());
    const auto n = static_cast<std::size_t>(std::llround((stop - start) / width)) + 1;
    EnergyGrid grid;
    grid.bin_width_keV = width;
    grid.centers_keV.reserve(n);
    for (std::size_t k = 0; k < n; ++k)
        grid.centers_keV.push_back(start + static_cast<double>(k) * width);

    auto check = [&](const EnergyGrid& g) {
        for (double e : g.centers_keV) {
            const double k = (e - start) / width;
            if (std::abs(k - std::round(k)) > kUniformTolerance)
                throw DataError("spectrum energy bins are not aligned to a common grid");
        }
    };
    check(a);
    check(b);
    return grid;
}

Spectrum embed(const Spectrum& spectrum, const EnergyGrid& grid)
{
    grid.validate();
    Spectrum out;
    out.grid = grid;
    out.weights.assign(grid.size(), 0.0);
    out.original_sum = spectrum.original_sum;
    const double start = grid.centers_keV.front();
    const double width = grid.bin_width_keV;
    for (std::size_t j = 0; j < spectrum.weights.size(); ++j) {
        const double e = spectrum.grid.centers_keV[j];
        const double k = (e - start) / width;
        const auto node = std::llround(k);
        if (std::abs(k - static_cast<double>(node)) > kUniformTolerance || node < 0 ||
            static_cast<std::size_t>(node) >= grid.size())
            throw DataError("spectrum bin does not lie on the target energy grid");
        out.weights[static_cast<std::size_t>(node)] += spectrum.weights[j];
    }
    return out;
}

double mu_at(const BasisSet& basis, const BasisPair& densities, std::size_t j)
{
    return basis.psi[0][j] * densities[0] + basis.psi[1][j] * densities[1];
}

} // namespace dsct
