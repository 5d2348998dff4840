#include "cli.hpp"

#include "dsct/error.hpp"
#include "dsct/io.hpp"
#include "dsct/metrics.hpp"
#include "dsct/parallel.hpp"
#include "dsct/phantom.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

namespace dsct::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Re-throws a module error with the failing stage prepended, keeping its category.
template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(name + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(name + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(name + ": " + e.what());
    } catch (const Error& e) {
        throw Error(name + ": " + e.what());
    } catch (const fs::filesystem_error& e) {
        throw DataError(name + ": " + e.what());
    }
}

void check_keys(const json& block, const std::string& where, std::set<std::string> allowed)
{
    if (!block.is_object())
        throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : block.items())
        if (!allowed.count(key))
            throw ConfigError("unknown key \"" + (where.empty() ? key : where + "." + key) + "\"");
}

template <typename T>
T get_or(const json& block, const std::string& key, T fallback, const std::string& where)
{
    if (!block.contains(key) || block.at(key).is_null())
        return fallback;
    try {
        return block.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

std::size_t get_count(const json& block, const std::string& key, std::size_t fallback,
                      const std::string& where)
{
    if (!block.contains(key) || block.at(key).is_null())
        return fallback;
    const json& v = block.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(where + "." + key + " must be a nonnegative integer");
    return v.get<std::size_t>();
}

fs::path resolve(const fs::path& base, const std::string& p)
{
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

GuideSource parse_guide(const std::string& name)
{
    if (name == "high")
        return GuideSource::High;
    if (name == "low")
        return GuideSource::Low;
    if (name == "self")
        return GuideSource::Self;
    if (name == "external")
        return GuideSource::External;
    throw ConfigError("solver.guide_source must be high, low, self or external, got \"" + name + "\"");
}

FilterSetting parse_filter(const json& block, const std::string& where, int default_radius)
{
    check_keys(block, where, {"radius_px", "epsilon", "epsilon_mode"});
    FilterSetting f;
    f.radius_px = get_or<int>(block, "radius_px", default_radius, where);
    f.epsilon = get_or<double>(block, "epsilon", 1e-4, where);
    const auto mode = get_or<std::string>(block, "epsilon_mode", "relative", where);
    if (mode != "relative" && mode != "absolute")
        throw ConfigError(where + ".epsilon_mode must be relative or absolute");
    f.relative = mode == "relative";
    return f;
}

struct Physics {
    std::array<Spectrum, 2> spectra;
    BasisSet basis;
};

Physics load_physics(const RunConfig& config)
{
    return stage("spectra", [&] {
        Spectrum low = load_spectrum(config.spectrum_low);
        Spectrum high = load_spectrum(config.spectrum_high);
        const EnergyGrid grid = common_grid(low.grid, high.grid);
        Physics physics;
        physics.basis = make_basis({load_attenuation_table(config.basis_tables[0]),
                                    load_attenuation_table(config.basis_tables[1])},
                                   config.basis_names, grid);
        physics.spectra = {embed(low, grid), embed(high, grid)};
        return physics;
    });
}

// Accumulates output files and their hashes for the manifest.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

    void bytes(const std::string& name, const std::string& data)
    {
        io::write_atomic(dir_ / name, data);
        hashes_[name] = io::sha256_hex(data);
    }
    void image(const std::string& name, const Image& img) { bytes(name, io::encode_image(img)); }
    void sinogram(const std::string& name, const Sinogram& s) { bytes(name, io::encode_sinogram(s)); }
    void pgm(const std::string& name, const Image& img)
    {
        io::write_pgm16(dir_ / name, img);
        hashes_[name] = io::sha256_file(dir_ / name);
        hashes_[name + ".window"] = io::sha256_file(dir_ / (name + ".window"));
    }

    const json& hashes() const { return hashes_; }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    json hashes_ = json::object();
};

json input_hashes(const std::vector<fs::path>& paths)
{
    json out = json::object();
    for (const auto& p : paths)
        out[p.string()] = io::sha256_file(p);
    return out;
}

void write_manifest(const Outputs& outputs, const std::string& command, const RunConfig& config,
                    const json& inputs, const json& summary)
{
    json manifest;
    manifest["command"] = command;
    manifest["format_version"] = io::kFormatVersion;
    manifest["config"] = config.effective;
    manifest["inputs"] = inputs;
    manifest["outputs"] = outputs.hashes();
    manifest["summary"] = summary;
    io::write_atomic(outputs.dir() / ("manifest_" + command + ".json"), manifest.dump(2) + "\n");
}

std::string energy_tag(double e)
{
    std::ostringstream s;
    s << e;
    std::string tag = s.str();
    for (char& c : tag)
        if (c == '.')
            c = 'p';
    return tag + "keV";
}

int cmd_simulate(const RunConfig& config, std::ostream& out)
{
    const Physics physics = load_physics(config);
    const Phantom phantom = stage("phantom", [&] {
        return config.phantom ? load_phantom(*config.phantom) : Phantom{};
    });
    const auto truth = stage("rasterize", [&] { return rasterize(phantom, config.geometry); });
    const DualScan scan = stage("forward", [&] {
        return simulate_dual_scan(phantom, config.geometry, physics.spectra[kLow],
                                  physics.spectra[kHigh], physics.basis, config.noise,
                                  config.path_mode);
    });

    Outputs outputs(config.output_dir);
    stage("write", [&] {
        outputs.sinogram("low.dsctsino", scan.low);
        outputs.sinogram("high.dsctsino", scan.high);
        outputs.image("truth_f1.dsctimg", truth.first);
        outputs.image("truth_f2.dsctimg", truth.second);
        if (config.export_pgm) {
            outputs.pgm("truth_f1.pgm", truth.first);
            outputs.pgm("truth_f2.pgm", truth.second);
        }
        std::vector<fs::path> inputs{config.spectrum_low, config.spectrum_high,
                                     config.basis_tables[0], config.basis_tables[1]};
        if (config.phantom)
            inputs.push_back(*config.phantom);
        json summary;
        summary["max_f1"] = truth.first.max();
        summary["max_f2"] = truth.second.max();
        summary["max_projection_low"] = *std::max_element(scan.low.values().begin(), scan.low.values().end());
        summary["max_projection_high"] = *std::max_element(scan.high.values().begin(), scan.high.values().end());
        write_manifest(outputs, "simulate", config, input_hashes(inputs), summary);
    });
    out << "simulate: wrote " << outputs.hashes().size() << " files to " << config.output_dir.string()
        << "\n";
    return kSuccess;
}

int cmd_decompose(const RunConfig& config, const fs::path& input_dir, std::ostream& out)
{
    const Physics physics = load_physics(config);
    DualScan scan;
    scan.spectra = physics.spectra;
    scan.basis = physics.basis;
    std::vector<fs::path> inputs{config.spectrum_low, config.spectrum_high, config.basis_tables[0],
                                 config.basis_tables[1], input_dir / "low.dsctsino",
                                 input_dir / "high.dsctsino"};
    std::optional<GroundTruth> truth;
    stage("read", [&] {
        scan.low = io::read_sinogram(input_dir / "low.dsctsino");
        scan.high = io::read_sinogram(input_dir / "high.dsctsino");
        const fs::path t1 = input_dir / "truth_f1.dsctimg";
        const fs::path t2 = input_dir / "truth_f2.dsctimg";
        if (fs::exists(t1) && fs::exists(t2)) {
            truth = GroundTruth{io::read_image(t1), io::read_image(t2)};
            inputs.push_back(t1);
            inputs.push_back(t2);
        }
    });

    ProposedConfig solver = config.solver;
    if (config.guide_image) {
        solver.external_guide = stage("read", [&] { return io::read_image(*config.guide_image); });
        inputs.push_back(*config.guide_image);
    }
    const GroundTruth* truth_ptr = truth ? &*truth : nullptr;
    const bool proposed = config.method == "proposed";
    const Projector projector = stage("geometry", [&] {
        config.geometry.validate();
        return Projector(config.geometry);
    });
    const DecompositionResult result = stage("decompose", [&] {
        if (proposed)
            return decompose_proposed(scan, projector, solver, truth_ptr);
        return decompose_esart(scan, projector, solver.esart(), truth_ptr);
    });

    Outputs outputs(config.output_dir);
    stage("write", [&] {
        for (std::size_t i = 0; i < 2; ++i) {
            const std::string name = "f" + std::to_string(i + 1);
            outputs.image(name + ".dsctimg", result.state.f[i]);
            if (config.export_pgm)
                outputs.pgm(name + ".pgm", result.state.f[i]);
        }
        for (double e : config.composite_energies_keV) {
            const Image composite = composite_image(result.state, physics.basis, e);
            const std::string name = "composite_" + energy_tag(e);
            outputs.image(name + ".dsctimg", composite);
            if (config.export_pgm)
                outputs.pgm(name + ".pgm", composite);
        }
        outputs.bytes("diagnostics.csv", io::diagnostics_csv(result.diagnostics, proposed));
        json summary;
        summary["method"] = config.method;
        summary["iterations"] = result.state.iteration;
        if (!result.diagnostics.empty()) {
            const auto& last = result.diagnostics.back();
            summary["final_residual_low"] = last.residual_low;
            summary["final_residual_high"] = last.residual_high;
        }
        if (truth) {
            summary["rmse_f1"] = rmse(result.state.f[0], (*truth)[0]);
            summary["rmse_f2"] = rmse(result.state.f[1], (*truth)[1]);
        }
        write_manifest(outputs, "decompose", config, input_hashes(inputs), summary);
    });
    out << "decompose: " << config.method << ", " << result.state.iteration << " iterations, wrote "
        << outputs.hashes().size() << " files to " << config.output_dir.string() << "\n";
    return kSuccess;
}

int cmd_metrics(const std::vector<std::string>& images, const std::vector<std::string>& truths,
                const fs::path& rois_path, const std::optional<fs::path>& output, std::ostream& out)
{
    if (!truths.empty() && truths.size() != 1 && truths.size() != images.size())
        throw ConfigError("metrics: give one --truth, or one per --image");
    const auto rois = stage("rois", [&] { return load_rois(rois_path); });
    std::string report = "image,roi,mean,std,snr_db,rmse\n";
    stage("metrics", [&] {
        for (std::size_t k = 0; k < images.size(); ++k) {
            const Image image = io::read_image(images[k]);
            double error = std::nan("");
            if (!truths.empty()) {
                const std::string& truth_path = truths.size() == 1 ? truths[0] : truths[k];
                const Image truth = io::read_image(truth_path);
                if (!image.same_shape(truth))
                    throw DataError(images[k] + " is " + std::to_string(image.width()) + "x" +
                                    std::to_string(image.height()) + " but " + truth_path + " is " +
                                    std::to_string(truth.width()) + "x" +
                                    std::to_string(truth.height()));
                error = rmse(image, truth);
            }
            for (const auto& roi : rois) {
                const RoiStats s = roi_stats(image, roi);
                report += images[k] + "," + roi.label + "," + io::format_double(s.mean) + "," +
                          io::format_double(s.std) + "," + io::format_double(roi_snr(image, roi)) +
                          "," + io::format_double(error) + "\n";
            }
        }
    });
    if (output)
        stage("write", [&] { io::write_atomic(*output, report); });
    else
        out << report;
    return kSuccess;
}

unsigned threads_from_env()
{
    const char* env = std::getenv("DSCT_THREADS");
    if (!env || !*env)
        return 0;
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (*end != '\0' || value < 0)
        throw ConfigError("DSCT_THREADS must be a nonnegative integer");
    return static_cast<unsigned>(value);
}

} // namespace

void apply_override(json& config, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override \"" + assignment + "\" is not of the form key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded())
        value = text;

    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (part.empty())
            throw ConfigError("override key \"" + key + "\" has an empty component");
        if (!node->is_object())
            throw ConfigError("override key \"" + key + "\" descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null())
            *node = json::object();
        start = dot + 1;
    }
}

RunConfig parse_config(const json& config, const fs::path& base_dir)
{
    check_keys(config, "", {"geometry", "spectra", "basis", "phantom", "simulation", "noise",
                            "method", "solver", "output", "rois"});
    RunConfig rc;
    rc.effective = config;

    const json geom = config.value("geometry", json::object());
    check_keys(geom, "geometry", {"sod_cm", "sdd_cm", "n_channels", "channel_pitch_cm", "n_views",
                                  "angle_span_deg", "n_x", "n_y", "pixel_cm"});
    FanBeamGeometry& g = rc.geometry;
    g.sod_cm = get_or<double>(geom, "sod_cm", g.sod_cm, "geometry");
    g.sdd_cm = get_or<double>(geom, "sdd_cm", g.sdd_cm, "geometry");
    g.n_channels = get_count(geom, "n_channels", g.n_channels, "geometry");
    g.channel_pitch_cm = get_or<double>(geom, "channel_pitch_cm", g.channel_pitch_cm, "geometry");
    g.n_views = get_count(geom, "n_views", g.n_views, "geometry");
    g.angle_span_rad = get_or<double>(geom, "angle_span_deg", 360.0, "geometry") * std::numbers::pi / 180.0;
    g.n_x = get_count(geom, "n_x", g.n_x, "geometry");
    g.n_y = get_count(geom, "n_y", g.n_y, "geometry");
    g.pixel_cm = get_or<double>(geom, "pixel_cm", g.pixel_cm, "geometry");
    g.validate();

    const json spectra = config.value("spectra", json::object());
    check_keys(spectra, "spectra", {"low", "high"});
    if (!spectra.contains("low") || !spectra.contains("high"))
        throw ConfigError("spectra.low and spectra.high are required");
    rc.spectrum_low = resolve(base_dir, get_or<std::string>(spectra, "low", "", "spectra"));
    rc.spectrum_high = resolve(base_dir, get_or<std::string>(spectra, "high", "", "spectra"));

    const json basis = config.value("basis", json::array());
    if (!basis.is_array() || basis.size() != 2)
        throw ConfigError("basis must list exactly two materials");
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string where = "basis[" + std::to_string(i) + "]";
        check_keys(basis[i], where, {"name", "table"});
        rc.basis_names[i] = get_or<std::string>(basis[i], "name", rc.basis_names[i], where);
        if (!basis[i].contains("table"))
            throw ConfigError(where + ".table is required");
        rc.basis_tables[i] = resolve(base_dir, get_or<std::string>(basis[i], "table", "", where));
    }

    const auto phantom = get_or<std::string>(config, "phantom", "", "config");
    if (!phantom.empty())
        rc.phantom = resolve(base_dir, phantom);
    const auto rois = get_or<std::string>(config, "rois", "", "config");
    if (!rois.empty())
        rc.rois = resolve(base_dir, rois);

    const json sim = config.value("simulation", json::object());
    check_keys(sim, "simulation", {"path_integrals"});
    const auto mode = get_or<std::string>(sim, "path_integrals", "analytic", "simulation");
    if (mode != "analytic" && mode != "discrete")
        throw ConfigError("simulation.path_integrals must be analytic or discrete");
    rc.path_mode = mode == "analytic" ? PathIntegralMode::Analytic : PathIntegralMode::Discrete;

    const json noise = config.value("noise", json::object());
    check_keys(noise, "noise", {"enabled", "photons_per_ray", "seed"});
    rc.noise.enabled = get_or<bool>(noise, "enabled", false, "noise");
    rc.noise.photons_per_ray = get_or<double>(noise, "photons_per_ray", 1e5, "noise");
    rc.noise.seed = get_or<std::uint64_t>(noise, "seed", 0, "noise");
    if (rc.noise.enabled && !(rc.noise.photons_per_ray > 0.0))
        throw ConfigError("noise.photons_per_ray must be positive");

    rc.method = get_or<std::string>(config, "method", "esart", "config");
    if (rc.method != "esart" && rc.method != "proposed")
        throw ConfigError("method must be esart or proposed, got \"" + rc.method + "\"");

    const json solver = config.value("solver", json::object());
    check_keys(solver, "solver", {"iterations", "relaxation", "subsets", "clamp",
                                  "degeneracy_tolerance", "filter", "filters", "guide_source",
                                  "guide_sources", "guide_iterations", "guide_image"});
    ProposedConfig& s = rc.solver;
    s = ProposedConfig::defaults(g.n_x);
    s.iterations = get_count(solver, "iterations", s.iterations, "solver");
    s.relaxation = get_or<double>(solver, "relaxation", s.relaxation, "solver");
    s.subsets = get_count(solver, "subsets", s.subsets, "solver");
    s.clamp = get_or<bool>(solver, "clamp", s.clamp, "solver");
    s.degeneracy_tolerance =
        get_or<double>(solver, "degeneracy_tolerance", s.degeneracy_tolerance, "solver");
    s.guide_iterations = get_count(solver, "guide_iterations", s.guide_iterations, "solver");
    const int default_radius = default_filter_radius(g.n_x);
    if (solver.contains("filter") && solver.contains("filters"))
        throw ConfigError("solver: give either filter or filters, not both");
    if (solver.contains("filter")) {
        const FilterSetting f = parse_filter(solver["filter"], "solver.filter", default_radius);
        s.filters = {f, f};
    } else if (solver.contains("filters")) {
        const json& list = solver["filters"];
        if (!list.is_array() || list.size() != 2)
            throw ConfigError("solver.filters must list two filter blocks");
        for (std::size_t i = 0; i < 2; ++i)
            s.filters[i] = parse_filter(list[i], "solver.filters[" + std::to_string(i) + "]",
                                        default_radius);
    }
    if (solver.contains("guide_source") && solver.contains("guide_sources"))
        throw ConfigError("solver: give either guide_source or guide_sources, not both");
    if (solver.contains("guide_source")) {
        const GuideSource src = parse_guide(get_or<std::string>(solver, "guide_source", "high", "solver"));
        s.guides = {src, src};
    } else if (solver.contains("guide_sources")) {
        const auto list = get_or<std::vector<std::string>>(solver, "guide_sources", {}, "solver");
        if (list.size() != 2)
            throw ConfigError("solver.guide_sources must list two entries");
        s.guides = {parse_guide(list[0]), parse_guide(list[1])};
    }
    const auto guide_image = get_or<std::string>(solver, "guide_image", "", "solver");
    if (!guide_image.empty())
        rc.guide_image = resolve(base_dir, guide_image);
    for (GuideSource src : s.guides)
        if (src == GuideSource::External && !rc.guide_image)
            throw ConfigError("solver.guide_image is required for an external guide");
    s.esart().validate();
    for (const auto& f : s.filters)
        guided::GuidedFilterParams{f.radius_px, f.epsilon}.validate();

    const json output = config.value("output", json::object());
    check_keys(output, "output", {"directory", "composite_energies_keV", "pgm"});
    rc.output_dir = resolve(base_dir, get_or<std::string>(output, "directory", "out", "output"));
    rc.composite_energies_keV = get_or<std::vector<double>>(
        output, "composite_energies_keV", rc.composite_energies_keV, "output");
    for (double e : rc.composite_energies_keV)
        if (!(e > 0.0))
            throw ConfigError("output.composite_energies_keV must be positive");
    rc.export_pgm = get_or<bool>(output, "pgm", true, "output");
    return rc;
}

RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path.string());
    json config = json::parse(in, nullptr, false, true);
    if (config.is_discarded())
        throw ConfigError(path.string() + ": not valid JSON");
    for (const auto& o : overrides)
        apply_override(config, o);
    return parse_config(config, fs::absolute(path).parent_path());
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Dual spectral CT simulation and material decomposition"};
    app.require_subcommand(1);
    int threads = -1;
    app.add_option("--threads", threads, "Worker thread cap (0 = all cores; default DSCT_THREADS)")
        ->check(CLI::NonNegativeNumber);

    std::string config_path;
    std::vector<std::string> overrides;
    auto add_config_options = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON run configuration")->required();
        sub->add_option("--set", overrides, "Override a config key: dotted.key=value")
            ->take_all()
            ->allow_extra_args(false);
    };

    auto* simulate = app.add_subcommand("simulate", "Simulate dual-spectral sinograms and truth images");
    add_config_options(simulate);
    std::string output_override;
    simulate->add_option("-o,--output", output_override, "Output directory (overrides output.directory)");

    auto* decompose = app.add_subcommand("decompose", "Decompose a dual scan into basis images");
    add_config_options(decompose);
    std::string input_dir;
    decompose->add_option("-i,--input", input_dir, "Directory holding low/high sinograms (default: output directory)");
    decompose->add_option("-o,--output", output_override, "Output directory (overrides output.directory)");

    auto* metrics = app.add_subcommand("metrics", "RMSE and ROI statistics report");
    std::vector<std::string> images;
    std::vector<std::string> truths;
    std::string rois;
    std::string report;
    metrics->add_option("--image", images, "Image file (DSCTIMG), repeatable")->required();
    metrics->add_option("--truth", truths, "Reference image: one, or one per --image");
    metrics->add_option("--rois", rois, "ROI file")->required();
    metrics->add_option("-o,--output", report, "Report CSV path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kConfigFailure;
    }

    try {
        set_thread_limit(threads >= 0 ? static_cast<unsigned>(threads) : threads_from_env());
        if (*metrics)
            return cmd_metrics(images, truths, rois,
                               report.empty() ? std::nullopt : std::optional<fs::path>(report), out);

        if (!output_override.empty())
            overrides.push_back("output.directory=" + json(fs::absolute(output_override).string()).dump());
        RunConfig config = stage("config", [&] { return load_config(config_path, overrides); });
        if (*simulate)
            return cmd_simulate(config, out);
        const fs::path in_dir = input_dir.empty() ? config.output_dir : fs::absolute(input_dir);
        return cmd_decompose(config, in_dir, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigFailure;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kDataFailure;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return kNumericalFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
}

} // namespace dsct::cli
