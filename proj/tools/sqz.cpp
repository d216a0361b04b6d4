// Command-line front end.  Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include "sqz/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> bands;
    std::optional<std::size_t> nmax;
    std::optional<double> kc;
    std::optional<std::size_t> workers;
    bool deterministic = false;
    bool nondeterministic = false;

    [[nodiscard]] sqz::RunConfig apply() const {
        sqz::RunConfig cfg = config_path.empty() ? sqz::RunConfig{} : sqz::load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (out) cfg.out_dir = *out;
        if (bands) cfg.acq.n_bands = *bands;
        if (nmax) cfg.tomo.n_max = *nmax;
        if (kc) cfg.tomo.cutoff = *kc;
        if (workers) cfg.workers = *workers;
        if (deterministic) cfg.deterministic = true;
        if (nondeterministic) cfg.deterministic = false;
        cfg.validate();
        return cfg;
    }
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "simulation seed");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--bands", o.bands, "number of spectral bands")->check(CLI::Range(2, 4096));
    cmd->add_option("--nmax", o.nmax, "Fock truncation of the reconstructed states")->check(CLI::Range(0, 80));
    cmd->add_option("--kc", o.kc, "back-projection filter cutoff")->check(CLI::PositiveNumber);
    cmd->add_option("--workers", o.workers, "concurrent band jobs")->check(CLI::Range(1, 256));
    auto* det = cmd->add_flag("--deterministic", o.deterministic,
                              "fixed reduction order: results independent of --workers (default)");
    cmd->add_flag("--no-deterministic", o.nondeterministic, "split each band's sums across workers")->excludes(det);
}

void summarize_reconstruct(const std::vector<sqz::pipeline::BandState>& states) {
    for (const auto& s : states) {
        if (s.discarded) {
            std::printf("band %2zu  discarded\n", s.band_index);
            continue;
        }
        const auto& p = s.photons.p;
        std::printf("band %2zu  %6.2f MHz  trace %.4f  p0 %.4f  p1 %.4f  p2 %.4f  W rms %.4f\n", s.band_index,
                    s.center_frequency / sqz::kTwoPi / 1e6, s.estimate.rho.trace(), p[0], p.size() > 1 ? p[1] : 0.0,
                    p.size() > 2 ? p[2] : 0.0, s.wigner_rms);
    }
}

void summarize_analyze(const sqz::pipeline::AnalyzeResult& r) {
    const auto& rep = r.report;
    if (rep.contains("fit"))
        std::printf("fit: d = %.4f  xi*eta = %.4f  Gamma/2pi = %.3f MHz%s\n", rep["fit"]["pump"].get<double>(),
                    rep["fit"]["efficiency"].get<double>(), rep["fit"]["cavity_hwhm_mhz"].get<double>(),
                    r.fit_converged ? "" : "  (not converged)");
    if (rep.contains("total_variance") && !rep["total_variance"]["v_min_db"].is_null())
        std::printf("total variance: min %.2f dB  max %.2f dB\n", rep["total_variance"]["v_min_db"].get<double>(),
                    rep["total_variance"]["v_max_db"].get<double>());
    if (rep.contains("photon_flux"))
        std::printf("<n> = %.3f per mode  flux = %.3e /s  power = %.3e W\n",
                    rep["photon_flux"]["mean_photons_per_mode"].get<double>(), rep["photon_flux"]["flux_per_s"].get<double>(),
                    rep["photon_flux"]["power_w"].get<double>());
    if (rep.contains("g1") && !rep["g1"]["rms_within_5_over_gamma"].is_null())
        std::printf("g1 rms vs model (tau <= 5/Gamma): %.4f\n", rep["g1"]["rms_within_5_over_gamma"].get<double>());
    for (const auto& g : r.gaps) std::printf("gap: %s\n", g.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Broadband squeezed-vacuum simulation, band tomography and analysis"};
    app.require_subcommand(1, 1);
    Overrides o;
    auto* sim = app.add_subcommand("simulate", "write signal and vacuum traces");
    auto* rec = app.add_subcommand("reconstruct", "per-band density matrices, tomograms and Wigner functions");
    auto* ana = app.add_subcommand("analyze", "spectrum fit, totals, photon statistics and g1");
    auto* all = app.add_subcommand("all", "simulate, reconstruct and analyze");
    for (auto* c : {sim, rec, ana, all}) add_common(c, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    sqz::RunConfig cfg;
    try {
        cfg = o.apply();
    } catch (const std::exception& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        int status = kOk;
        if (*sim || *all) {
            const auto r = sqz::pipeline::cmd_simulate(cfg);
            std::printf("wrote %s\nwrote %s\n", r.signal_path.string().c_str(), r.vacuum_path.string().c_str());
        }
        if (*rec || *all) summarize_reconstruct(sqz::pipeline::cmd_reconstruct(cfg));
        if (*ana || *all) {
            const auto r = sqz::pipeline::cmd_analyze(cfg);
            summarize_analyze(r);
            if (!r.fit_converged) status = kNumeric;
        }
        return status;
    } catch (const sqz::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const sqz::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::domain_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    }
}
