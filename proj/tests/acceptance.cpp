// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "support.hpp"

#include "cli.hpp"
#include "dsct/error.hpp"
#include "dsct/io.hpp"
#include "dsct/metrics.hpp"
#include "dsct/solver.hpp"

#include <sys/resource.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace dsct;
namespace fs = std::filesystem;

namespace {

// Peak resident set ceiling for the paper-scale smoke run.
constexpr double kPaperScaleMemoryCeilingMiB = 512.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

double max_abs_diff(const Image& a, const Image& b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    long double s = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += static_cast<long double>(a[i]) * b[i];
    return static_cast<double>(s);
}

// Bundled 64 x 64 scenario shared by criteria 4 to 8.
struct Desk {
    FanBeamGeometry geom = dsct::test::desk_geometry();
    Projector projector{geom};
    Phantom phantom = load_phantom(dsct::test::data_dir() / "phantoms/head_like.txt");
    std::vector<RoiSpec> rois = load_rois(dsct::test::data_dir() / "rois/head_like_64.txt");
    GroundTruth truth;

    Desk()
    {
        auto [f1, f2] = rasterize(phantom, geom);
        truth = {std::move(f1), std::move(f2)};
    }

    DualScan scan(const dsct::test::Physics& physics, NoiseConfig noise = {}) const
    {
        return simulate_dual_scan(phantom, geom, physics.spectra[0], physics.spectra[1],
                                  physics.basis, noise);
    }

    const RoiSpec& water_roi() const
    {
        for (const auto& r : rois)
            if (r.label == "water")
                return r;
        throw DataError("bundled ROI file has no water ROI");
    }
};

Outcome forward_oracle()
{
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const std::size_t bins = 1 + rng() % 40;
        std::vector<double> energies, weights, psi1, psi2;
        for (std::size_t j = 0; j < bins; ++j) {
            energies.push_back(20.0 + 2.0 * static_cast<double>(j));
            weights.push_back(u(rng) < 0.1 ? 0.0 : u(rng));
            psi1.push_back(0.15 + 2.0 * u(rng));
            psi2.push_back(0.15 + 6.0 * u(rng));
        }
        weights[rng() % bins] += 0.5;
        const Spectrum s = dsct::test::make_spectrum(energies, weights);
        const BasisSet b = dsct::test::make_table_basis(s.grid, psi1, psi2);
        const BasisPair p{30.0 * u(rng), 8.0 * u(rng)};
        const double got = polychromatic_projection(s, b, p);
        const long double ref =
            dsct::test::direct_projection(s.weights, b.psi[0], b.psi[1], p[0], p[1]);
        const double rel = std::abs(got - static_cast<double>(ref)) /
                           std::max(std::abs(static_cast<double>(ref)), 1e-300);
        worst = std::max(worst, rel);
    }
    return {worst <= 1e-12, fmt("max relative error %.3g over 1000 instances (limit 1e-12)", worst)};
}

Outcome adjointness()
{
    FanBeamGeometry g = dsct::test::small_geometry(32, 64, 64);
    const Projector projector(g);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        Image x = g.make_image();
        Sinogram y = g.make_sinogram();
        for (double& v : x.values())
            v = n(rng);
        for (double& v : y.values())
            v = n(rng);
        const double lhs = dot(projector.project(x).values(), y.values());
        const double rhs = dot(x.values(), projector.backproject(y).values());
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)));
    }
    return {worst <= 1e-10, fmt("max relative gap %.3g over 100 pairs at 32x32, 64 views (limit 1e-10)", worst)};
}

Outcome guided_equivalence()
{
    std::mt19937_64 rng(11);
    double worst = 0.0;
    bool fixed_point = true;
    double identity = 0.0;
    for (std::size_t w = 1; w <= 8; ++w) {
        for (std::size_t h = 1; h <= 8; ++h) {
            const Image guide = dsct::test::random_image(w, h, rng);
            const Image x = dsct::test::random_image(w, h, rng);
            const Image constant(w, h, 0.3 + static_cast<double>(w * h) / 7.0);
            for (int r : {1, 2}) {
                for (double eps : {1e-3, 1e-1, 10.0}) {
                    const Image fast = guided::apply(guide, x, {r, eps});
                    worst = std::max(
                        worst, max_abs_diff(fast, dsct::test::naive_guided_filter(guide, x, r, eps)));
                    fixed_point = fixed_point && guided::apply(guide, constant, {r, eps}) == constant;
                }
            }
            if (w >= 3 && h >= 3) {
                const double range = guide.max() - guide.min();
                const Image self = guided::apply(guide, guide, {1, 1e-12});
                identity = std::max(identity, max_abs_diff(self, guide) / range);
            }
        }
    }
    const bool pass = worst <= 1e-12 && fixed_point && identity < 1e-6;
    return {pass, fmt("naive gap %.3g (limit 1e-12); constant fixed point %s; self-guidance deviation "
                      "%.3g of range (limit 1e-6)",
                      worst, fixed_point ? "exact" : "BROKEN", identity)};
}

Outcome esart_monochromatic(const Desk& desk)
{
    const auto physics = dsct::test::monochromatic_physics(60.0, 100.0);
    const DualScan scan = desk.scan(physics);
    const auto result = decompose_esart(scan, desk.projector, EsartConfig{}, &desk.truth);
    const double r1 = *result.diagnostics.back().rmse_f1 / desk.truth[0].max();
    const double r2 = *result.diagnostics.back().rmse_f2 / desk.truth[1].max();
    bool monotone = true;
    for (std::size_t n = 1; n < 10; ++n) {
        const auto& a = result.diagnostics[n - 1];
        const auto& b = result.diagnostics[n];
        monotone = monotone && b.residual_low <= a.residual_low && b.residual_high <= a.residual_high;
    }
    const bool pass = r1 < 0.01 && r2 < 0.01 && monotone;
    return {pass, fmt("RMSE f1 %.2f%%, f2 %.2f%% of max after 30 iterations (limit 1%%); residual "
                      "%s over the first 10 iterations",
                      100.0 * r1, 100.0 * r2, monotone ? "nonincreasing" : "INCREASES")};
}

Outcome beam_hardening(const Desk& desk, const dsct::test::Physics& physics, const DualScan& clean)
{
    const auto config = ProposedConfig::defaults(desk.geom.n_x);
    const auto result = decompose_esart(clean, desk.projector, config.esart());
    const Image reference = composite_image(DecompositionState{desk.truth, 0}, physics.basis, 70.0);
    const Image composite = composite_image(result.state, physics.basis, 70.0);
    const Image guide = reconstruct_guide(clean.high, desk.projector, config.guide_iterations,
                                          config.relaxation, config.subsets);
    const double e_comp = rmse(composite, reference);
    const double e_guide = rmse(guide, reference);
    const double ratio = e_guide / e_comp;
    return {ratio >= 3.0, fmt("70 keV RMSE: composite %.4g, SART guide %.4g 1/cm, ratio %.2f (limit 3)",
                              e_comp, e_guide, ratio)};
}

Outcome noise_suppression(const Desk& desk, const dsct::test::Physics& physics)
{
    const auto config = ProposedConfig::defaults(desk.geom.n_x);
    const RoiSpec& roi = desk.water_roi();
    bool pass = true;
    std::ostringstream detail;
    double min_ratio = INFINITY;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        NoiseConfig noise{true, 1e5, seed};
        const DualScan scan = desk.scan(physics, noise);
        const auto esart = decompose_esart(scan, desk.projector, config.esart());
        const auto proposed = decompose_proposed(scan, desk.projector, config);
        detail << (seed == 1 ? "" : "; ") << "seed " << seed << ":";
        for (std::size_t i = 0; i < 2; ++i) {
            const double se = roi_stats(esart.state.f[i], roi).std;
            const double sp = roi_stats(proposed.state.f[i], roi).std;
            const double ee = rmse(esart.state.f[i], desk.truth[i]);
            const double ep = rmse(proposed.state.f[i], desk.truth[i]);
            pass = pass && sp < se && ep < ee;
            min_ratio = std::min(min_ratio, se / sp);
            detail << fmt(" f%zu std %.3g/%.3g rmse %.3g/%.3g", i + 1, sp, se, ep, ee);
        }
    }
    return {pass, fmt("proposed/E-SART, water ROI; smallest std reduction %.2fx (target 2x); ",
                      min_ratio) +
                      detail.str()};
}

Outcome clean_non_degradation(const Desk& desk, const DualScan& clean)
{
    const auto config = ProposedConfig::defaults(desk.geom.n_x);
    const auto esart = decompose_esart(clean, desk.projector, config.esart(), &desk.truth);
    const auto proposed = decompose_proposed(clean, desk.projector, config, &desk.truth);
    double worst = 0.0;
    std::string detail;
    for (std::size_t i = 0; i < 2; ++i) {
        const double ee = rmse(esart.state.f[i], desk.truth[i]);
        const double ep = rmse(proposed.state.f[i], desk.truth[i]);
        worst = std::max(worst, ep / ee);
        detail += fmt("%sf%zu %.4g vs %.4g", i ? ", " : "", i + 1, ep, ee);
    }
    return {worst <= 1.5, fmt("RMSE proposed vs E-SART at iteration 30: ", 0) + detail +
                              fmt("; worst ratio %.3f (limit 1.5)", worst)};
}

Outcome reduction(const Desk& desk, const DualScan& clean)
{
    ProposedConfig config = ProposedConfig::defaults(desk.geom.n_x);
    config.guides = {GuideSource::Self, GuideSource::Self};
    for (auto& f : config.filters)
        f = FilterSetting{f.radius_px, 1e-12, false};
    const auto proposed = decompose_proposed(clean, desk.projector, config);
    const auto esart = decompose_esart(clean, desk.projector, config.esart());
    double worst = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
        worst = std::max(worst, max_abs_diff(proposed.state.f[i], esart.state.f[i]) / desk.truth[i].max());
    return {worst <= 1e-6, fmt("max difference %.3g of max density (limit 1e-6)", worst)};
}

int run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "dsct");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out;
    return cli::run(static_cast<int>(argv.size()), argv.data(), out, std::cerr);
}

std::map<std::string, std::string> hash_dir(const fs::path& dir)
{
    std::map<std::string, std::string> hashes;
    for (const auto& e : fs::directory_iterator(dir))
        hashes[e.path().filename().string()] = io::sha256_file(e.path());
    return hashes;
}

Outcome determinism()
{
    const auto dir = dsct::test::scratch_dir("acceptance_determinism");
    const std::string cfg = (dsct::test::config_dir() / "desk.json").string();
    std::vector<std::map<std::string, std::string>> runs;
    for (int k = 0; k < 2; ++k) {
        const auto out = dir / "out";
        fs::remove_all(out);
        const std::vector<std::string> common{"-c", cfg, "-o", out.string(), "--set",
                                              "noise.enabled=true", "--set", "noise.seed=5"};
        auto sim = common;
        sim.insert(sim.begin(), "simulate");
        auto dec = common;
        dec.insert(dec.begin(), "decompose");
        if (run_cli(sim) != 0 || run_cli(dec) != 0)
            return {false, "pipeline run failed"};
        runs.push_back(hash_dir(out));
    }
    const bool same = runs[0] == runs[1];
    return {same, fmt("%zu output files, hashes %s across reruns", runs[0].size(),
                      same ? "identical" : "DIFFER")};
}

Outcome paper_scale()
{
    const auto dir = dsct::test::scratch_dir("acceptance_paper");
    const std::string cfg = (dsct::test::config_dir() / "paper.json").string();
    const std::vector<std::string> common{"-c",    cfg,   "-o", dir.string(), "--set",
                                          "solver.iterations=3", "--set",
                                          "solver.guide_iterations=3", "--set", "output.pgm=false"};
    auto sim = common;
    sim.insert(sim.begin(), "simulate");
    auto dec = common;
    dec.insert(dec.begin(), "decompose");
    const int a = run_cli(sim);
    const int b = a == 0 ? run_cli(dec) : a;
    rusage usage{};
    getrusage(RUSAGE_SELF, &usage);
    const double peak_mib = static_cast<double>(usage.ru_maxrss) / 1024.0;
    bool finite = false;
    if (b == 0) {
        const Image f1 = io::read_image(dir / "f1.dsctimg");
        const Image f2 = io::read_image(dir / "f2.dsctimg");
        finite = f1.width() == 512 && std::isfinite(f1.max()) && std::isfinite(f2.max()) &&
                 f1.max() > 0.0;
    }
    const bool pass = a == 0 && b == 0 && finite && peak_mib <= kPaperScaleMemoryCeilingMiB;
    return {pass, fmt("512x512, 512 channels, 360 views, 3 iterations: exit %d/%d, images %s; peak "
                      "RSS %.0f MiB (ceiling %.0f MiB)",
                      a, b, finite ? "finite" : "INVALID", peak_mib, kPaperScaleMemoryCeilingMiB)};
}

} // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<Outcome()> check;
    };

    std::unique_ptr<Desk> desk;
    std::unique_ptr<dsct::test::Physics> physics;
    std::unique_ptr<DualScan> clean;
    auto setup = [&] {
        if (!desk) {
            desk = std::make_unique<Desk>();
            physics = std::make_unique<dsct::test::Physics>(dsct::test::bundled_physics());
            clean = std::make_unique<DualScan>(desk->scan(*physics));
        }
    };

    const std::vector<Criterion> criteria{
        {1, "forward-model oracle", 1.0, forward_oracle},
        {2, "projector adjointness", 10.0, adjointness},
        {3, "guided filter brute-force equivalence", 5.0, guided_equivalence},
        {4, "E-SART monochromatic correctness", 60.0, [&] { setup(); return esart_monochromatic(*desk); }},
        {5, "E-SART beam-hardening removal", 90.0, [&] { setup(); return beam_hardening(*desk, *physics, *clean); }},
        {6, "noise suppression, 3 seeds", 300.0, [&] { setup(); return noise_suppression(*desk, *physics); }},
        {7, "clean-data non-degradation", 120.0, [&] { setup(); return clean_non_degradation(*desk, *clean); }},
        {8, "reduction to E-SART", 120.0, [&] { setup(); return reduction(*desk, *clean); }},
        {9, "pipeline determinism", 120.0, determinism},
        {10, "paper-scale smoke test", INFINITY, paper_scale},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.check();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = seconds < c.limit_s;
        const bool pass = outcome.pass && in_time;
        failures += pass ? 0 : 1;
        std::string timing = fmt("%.1f s", seconds);
        if (std::isfinite(c.limit_s))
            timing += fmt(" (limit %.0f s)%s", c.limit_s, in_time ? "" : " TOO SLOW");
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.name << ": "
                  << outcome.detail << " [" << timing << "]" << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
              << " criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
