#pragma once

#include "dsct/forward.hpp"
#include "dsct/solver.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dsct::cli {

enum ExitCode : int {
    kSuccess = 0,
    kFailure = 1,
    kConfigFailure = 2,
    kDataFailure = 3,
    kNumericalFailure = 4,
};

/// Fully parsed run configuration. Relative paths resolve against the config file's directory.
struct RunConfig {
    nlohmann::json effective;   // config after overrides, echoed into manifests
    FanBeamGeometry geometry;
    std::filesystem::path spectrum_low;
    std::filesystem::path spectrum_high;
    std::array<std::string, 2> basis_names{"water", "bone"};
    std::array<std::filesystem::path, 2> basis_tables;
    std::optional<std::filesystem::path> phantom;
    PathIntegralMode path_mode = PathIntegralMode::Analytic;
    NoiseConfig noise;
    std::string method = "esart";
    ProposedConfig solver;
    std::optional<std::filesystem::path> guide_image;
    std::filesystem::path output_dir;
    std::vector<double> composite_energies_keV{70.0};
    bool export_pgm = true;
    std::optional<std::filesystem::path> rois;
};

/// Applies "a.b.c=value" overrides; values parse as JSON, falling back to a plain string.
void apply_override(nlohmann::json& config, const std::string& assignment);

RunConfig parse_config(const nlohmann::json& config, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

/// Runs the command line; returns the process exit code. Messages go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace dsct::cli
