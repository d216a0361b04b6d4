// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance <work directory>

#include "sqz/pipeline.hpp"

#include "oracles/gaussian_state.hpp"
#include "support.hpp"

#include <cstdarg>
#include <cstdio>
#include <map>
#include <random>

using namespace sqz;
namespace fs = std::filesystem;
namespace ts = testing_support;

namespace {

class Criterion {
public:
    explicit Criterion(int id, std::string title) : id_(id), title_(std::move(title)) {}
    void expect(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4))) {
        char buf[512];
        va_list ap;
        va_start(ap, fmt);
        std::vsnprintf(buf, sizeof buf, fmt, ap);
        va_end(ap);
        std::printf("    %s %s\n", ok ? "ok  " : "FAIL", buf);
        ok_ = ok_ && ok;
    }
    bool finish() const {
        std::printf("%s criterion %d: %s\n", ok_ ? "PASS" : "FAIL", id_, title_.c_str());
        std::fflush(stdout);
        return ok_;
    }

private:
    int id_;
    std::string title_;
    bool ok_ = true;
};

fs::path fresh(const fs::path& root, const std::string& name) {
    const auto p = root / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<fs::path> artifacts(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> m;
    for (const auto& p : artifacts(dir)) m[p.filename().string()] = ts::slurp(p);
    return m;
}

double abs_pct(std::vector<double> v, double q) {
    for (double& x : v) x = std::abs(x);
    return ts::percentile(v, q);
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "sqz_acceptance";
    fs::create_directories(root);
    bool all_ok = true;

    // The nominal run shared by criteria 1, 3, 4, 5, 6 and 7.
    RunConfig nominal;
    nominal.out_dir = fresh(root, "nominal").string();
    (void)pipeline::cmd_simulate(nominal);
    const auto states = pipeline::cmd_reconstruct(nominal);
    const auto analysis = pipeline::cmd_analyze(nominal);
    const auto& rep = analysis.report;
    const auto theory = theory_spectrum(nominal.opa, nominal.acq);

    {
        Criterion c(1, "per-band (V_min, V_max) within 5% of the model, 15 bands");
        const auto& spec = rep["spectrum"];
        c.expect(spec.size() == 15, "%zu active bands", spec.size());
        for (std::size_t i = 0; i < spec.size() && i < theory.points.size(); ++i) {
            const double rmin = spec[i]["v_min"].get<double>() / theory.points[i].v_min;
            const double rmax = spec[i]["v_max"].get<double>() / theory.points[i].v_max;
            c.expect(std::abs(rmin - 1) <= 0.05 && std::abs(rmax - 1) <= 0.05,
                     "band %2zu  V_min %.4f (model %.4f)  V_max %.3f (model %.3f)", i + 1, spec[i]["v_min"].get<double>(),
                     theory.points[i].v_min, spec[i]["v_max"].get<double>(), theory.points[i].v_max);
        }
        all_ok &= c.finish();
    }

    {
        Criterion c(2, "fit recovers d and xi eta within 0.03 (90th percentile, 20 seeds)");
        std::vector<double> dd, de;
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto sig = simulate_trace(nominal.opa, nominal.acq, SimSeed{1000 + s});
            const auto vac = simulate_vacuum_trace(nominal.acq, SimSeed{1000 + s});
            const auto spec = squeezing_spectrum(discard_low_band(decompose(sig, vac)));
            try {
                const auto fit = fit_spectrum(spec, nominal.opa.cavity_hwhm);
                dd.push_back(fit.pump - nominal.opa.pump);
                de.push_back(fit.efficiency - nominal.opa.efficiency());
            } catch (const FitError& e) {
                c.expect(false, "seed %llu: fit did not converge", static_cast<unsigned long long>(1000 + s));
                dd.push_back(e.best_so_far().pump - nominal.opa.pump);
                de.push_back(e.best_so_far().efficiency - nominal.opa.efficiency());
            }
        }
        const double pd = abs_pct(dd, 0.9), pe = abs_pct(de, 0.9);
        c.expect(pd <= 0.03, "|d - d_true| 90th percentile %.4f", pd);
        c.expect(pe <= 0.03, "|xi eta - 0.7| 90th percentile %.4f", pe);
        all_ok &= c.finish();
    }

    {
        Criterion c(3, "totals: -2.9 +/- 0.5 dB, +6.7 +/- 0.5 dB, <n> 0.8 +/- 0.1, flux 2.2e8 +/- 15%");
        const auto& tv = rep["total_variance"];
        const double lo = tv["v_min_db"].get<double>(), hi = tv["v_max_db"].get<double>();
        const double n = rep["photon_flux"]["mean_photons_per_mode"].get<double>();
        const double flux = rep["photon_flux"]["flux_per_s"].get<double>();
        double mlo = 0.0, mhi = 0.0;
        for (const auto& p : theory.points) {
            mlo += p.v_min / theory.points.size();
            mhi += p.v_max / theory.points.size();
        }
        std::printf("    info band-averaged model: %.2f dB, %.2f dB, <n> %.3f\n", to_decibel(mlo), to_decibel(mhi),
                    rep["photon_flux"]["model_mean_photons_per_mode"].get<double>());
        c.expect(std::abs(lo - -2.9) <= 0.5, "minimum %.2f dB", lo);
        c.expect(std::abs(hi - 6.7) <= 0.5, "maximum %.2f dB", hi);
        c.expect(std::abs(n - 0.8) <= 0.1, "<n> %.3f per mode", n);
        c.expect(std::abs(flux / 2.2e8 - 1.0) <= 0.15, "flux %.3e /s (power %.3e W)", flux,
                 rep["photon_flux"]["power_w"].get<double>());
        all_ok &= c.finish();
    }

    {
        Criterion c(4, "state quality: vacuum rho00 and fidelity >= 0.99; odd suppression; diagonals vs oracle within 0.02");
        // About 1.3e5 samples per band equivalent.
        RunConfig vac = nominal;
        vac.opa.pump = 0.0;
        vac.acq.n_samples = 1u << 21;
        vac.out_dir = fresh(root, "vacuum").string();
        (void)pipeline::cmd_simulate(vac);
        const auto vstates = pipeline::cmd_reconstruct(vac);
        double worst_r00 = 2.0, worst_f = 2.0;
        for (const auto& s : vstates) {
            if (s.discarded) continue;
            worst_r00 = std::min(worst_r00, s.estimate.rho(0, 0).real());
            worst_f = std::min(worst_f, vacuum_fidelity(s.estimate.rho));
        }
        c.expect(worst_r00 >= 0.99, "vacuum input: lowest rho00 %.4f", worst_r00);
        c.expect(worst_f >= 0.99, "vacuum input: lowest fidelity %.4f", worst_f);

        double worst_diag = 0.0;
        std::size_t worst_band = 0;
        for (const auto& s : states) {
            if (s.discarded) continue;
            const auto psi = band_variances(nominal.opa, s.center_frequency);
            const auto& p = s.photons.p;
            if (psi.antisqueezed / psi.squeezed > 3.0)
                c.expect(p[1] < 0.5 * (p[0] + p[2]), "band %2zu (ratio %.1f): p1 %.4f < (p0 + p2)/2 = %.4f", s.band_index,
                         psi.antisqueezed / psi.squeezed, p[1], 0.5 * (p[0] + p[2]));
            const auto ref = oracle::photon_numbers(oracle::GaussianMode::squeezed(psi.squeezed, psi.antisqueezed, 0.0), 5);
            for (std::size_t n = 0; n <= 5; ++n) {
                const double d = std::abs(s.estimate.rho(n, n).real() - ref[n]);
                if (d > worst_diag) {
                    worst_diag = d;
                    worst_band = s.band_index;
                }
            }
        }
        c.expect(worst_diag <= 0.02, "largest |rho_nn - oracle|, n <= 5: %.4f (band %zu)", worst_diag, worst_band);

        // Vacuum W(0, 0) from the same vacuum run, back-projected with the default settings.
        const auto traces = pipeline::load_traces(vac);
        const auto dec = discard_low_band(decompose(traces.signal, traces.vacuum));
        const auto grid = UniformAxis::symmetric(vac.tomo.wigner_half_width, vac.tomo.wigner_points);
        double worst_w = 0.0;
        for (const auto& b : dec.bands) {
            if (b.discarded) continue;
            const auto w = wigner_backprojection(marginal_histogram(b.samples, vac.tomo.tomogram_phase_bins, vac.tomo.tomogram_x_bins),
                                                 grid, grid, {vac.tomo.cutoff, vac.tomo.filter_points});
            worst_w = std::max(worst_w, std::abs(w.at(grid.points / 2, grid.points / 2) * kPi - 1.0));
        }
        all_ok &= c.finish();

        Criterion c5(5, "Wigner: back-projection vs Fock synthesis RMS < 0.02 max|W|; integral 1 +/- 0.02; vacuum W(0,0) = 1/pi +/- 3%");
        double worst_rms = 0.0, worst_int = 0.0;
        for (const auto& s : states) {
            if (s.discarded) continue;
            worst_rms = std::max(worst_rms, s.wigner_rms);
            worst_int = std::max(worst_int, std::abs(s.wigner_integral - 1.0));
        }
        c5.expect(worst_rms < 0.02, "largest relative RMS %.4f", worst_rms);
        c5.expect(worst_int <= 0.02, "largest |integral - 1| %.4f", worst_int);
        c5.expect(worst_w <= 0.03, "vacuum: largest |pi W(0,0) - 1| %.4f", worst_w);
        all_ok &= c5.finish();
    }

    {
        Criterion c(6, "convolution law exact on a toy case; no parity oscillations in the total");
        const std::vector<std::vector<double>> toy(2, std::vector<double>{0.8, 0.0, 0.2});
        const auto t = total_photon_statistics(toy);
        const bool exact = t.p.size() == 5 && std::abs(t.p[0] - 0.64) < 1e-15 && std::abs(t.p[2] - 0.32) < 1e-15 &&
                           std::abs(t.p[4] - 0.04) < 1e-15 && t.p[1] == 0.0 && t.p[3] == 0.0;
        c.expect(exact, "(0.8, 0, 0.2) * (0.8, 0, 0.2) = (0.64, 0, 0.32, 0, 0.04)");
        const auto& tot = rep["total_photon_statistics"];
        const auto extrema = tot["local_extrema"].get<std::size_t>();
        const double par = tot["parity"].get<double>();
        c.expect(extrema == 1, "total distribution has %zu local extrema above 1e-3 of its peak", extrema);
        c.expect(std::abs(par) <= 0.03, "total parity %.4f (single band 1: %.3f)", par, pipeline::parity(states[1].photons.p));
        all_ok &= c.finish();
    }

    {
        Criterion c(7, "g1: RMS < 0.05 over (0, 5/Gamma]; g1(0) = 1; continuity at d = 0 to 1e-4");
        const auto& g = rep["g1"];
        const double rms = g["rms_within_5_over_gamma"].is_null() ? 1e9 : g["rms_within_5_over_gamma"].get<double>();
        c.expect(g["normalized"].get<bool>(), "vacuum-subtracted curve normalized");
        c.expect(rms < 0.05, "RMS vs model %.4f", rms);
        bool unit = true;
        for (double d : {0.0, 1e-6, 0.3, std::sqrt(0.5), 0.99}) unit &= g1_theory(d, nominal.opa.cavity_hwhm, 0.0) == 1.0;
        c.expect(unit, "g1_theory(tau = 0) == 1 for d in {0, 1e-6, 0.3, 0.707, 0.99}");
        double gap = 0.0;
        for (double gt = 0.0; gt <= 10.0; gt += 0.01) gap = std::max(gap, std::abs(g1_theory(0.0, 1.0, gt) - g1_theory(1e-6, 1.0, gt)));
        c.expect(gap <= 1e-4, "max |g1(d = 0) - g1(d = 1e-6)| %.2e", gap);
        all_ok &= c.finish();
    }

    {
        Criterion c(8, "properties: biorthogonality 1e-6, partition 1e-10, n^-1/2 scaling, byte determinism");
        const auto kernel = pattern_kernel(10, UniformAxis::symmetric(8.0, 1024));
        const auto& ax = kernel.axis();
        std::vector<double> xs(ax.points);
        for (std::size_t i = 0; i < ax.points; ++i) xs[i] = ax[i];
        double bio = 0.0;
        for (std::size_t k = 0; k <= 10; ++k) {
            const auto psi = oscillator_wavefunction(k, xs);
            for (std::size_t n = 0; n <= 10; ++n) {
                double s = 0.0;
                for (std::size_t i = 0; i < ax.points; ++i)
                    s += ((i == 0 || i + 1 == ax.points) ? 0.5 : 1.0) * kernel.node(n, n, i) * psi[i] * psi[i];
                bio = std::max(bio, std::abs(s * ax.step() - (n == k ? 1.0 : 0.0)));
            }
        }
        c.expect(bio < 1e-6, "max |int f_nn psi_k^2 - delta_nk|, n, k <= 10: %.2e", bio);

        const auto sig = io::read_trace(nominal.resolve(nominal.signal_file), nominal.acq);
        const auto bands = band_decompose(sig, nominal.acq.n_bands);
        double part = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < sig.samples.size(); ++i) {
            double s = 0.0;
            for (const auto& b : bands) s += b[i];
            part = std::max(part, std::abs(s - sig.samples[i]));
            scale = std::max(scale, std::abs(sig.samples[i]));
        }
        c.expect(part / scale < 1e-10, "band sum vs trace, max relative deviation %.2e", part / scale);

        // Replicated squared error of rho (n, m <= 4) at 1e4 and 1.6e5 samples.
        const auto mode = oracle::GaussianMode::squeezed(0.5, 2.0, 0.3);
        const int n_max = 4;
        std::vector<std::complex<double>> truth;
        for (int n = 0; n <= n_max; ++n)
            for (int m = 0; m <= n_max; ++m) truth.push_back(oracle::density_element(mode, n, m, {256, 3000, 20.0}));
        const auto small_kernel = pattern_kernel(n_max, UniformAxis::symmetric(9.0, 1152));
        const auto sq_error = [&](std::size_t count, std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> u(0.0, kTwoPi);
            std::normal_distribution<double> gauss;
            QuadratureSamples q;
            for (std::size_t i = 0; i < count; ++i) {
                const double th = u(rng);
                q.theta.push_back(th);
                q.x.push_back(std::sqrt(mode.var_at(th)) * gauss(rng));
            }
            const auto est = estimate_density_matrix(q, small_kernel);
            double e = 0.0;
            for (int n = 0; n <= n_max; ++n)
                for (int m = 0; m <= n_max; ++m) e += std::norm(est.rho(n, m) - truth[n * (n_max + 1) + m]);
            return e;
        };
        const int reps = 24;
        std::vector<double> e1, e2;
        for (int r = 0; r < reps; ++r) {
            e1.push_back(sq_error(10000, 5000 + r));
            e2.push_back(sq_error(160000, 6000 + r));
        }
        const double m1 = ts::mean(e1), m2 = ts::mean(e2);
        const double ratio = std::sqrt(m1 / m2);
        const double sigma = ratio * 0.5 * std::hypot(std::sqrt(ts::variance(e1) / reps) / m1, std::sqrt(ts::variance(e2) / reps) / m2);
        c.expect(std::abs(ratio - 4.0) <= 3.0 * sigma, "RMS error ratio for 16x samples %.3f (expected 4, sigma %.3f)", ratio, sigma);

        RunConfig small = nominal;
        small.acq.n_samples = 1u << 16;
        small.acq.sweep_period = static_cast<double>(small.acq.n_samples) / small.acq.sample_rate;
        small.out_dir = fresh(root, "determinism").string();
        const auto run = [](const RunConfig& cfg) {
            (void)pipeline::cmd_simulate(cfg);
            (void)pipeline::cmd_reconstruct(cfg);
            (void)pipeline::cmd_analyze(cfg);
        };
        run(small);
        const auto first = snapshot(small.out_path());
        run(small);
        const auto second = snapshot(small.out_path());
        c.expect(!first.empty() && first == second, "two runs from one config: %zu artifacts byte-identical", first.size());
        small.workers = 3;
        run(small);
        auto third = snapshot(small.out_path());
        // The report echoes the worker count in its configuration block; everything else must match.
        auto a = report::Json::parse(first.at("report.json")), b = report::Json::parse(third.at("report.json"));
        a.erase("config");
        b.erase("config");
        auto first_rest = first, third_rest = third;
        first_rest.erase("report.json");
        third_rest.erase("report.json");
        c.expect(first_rest == third_rest && a == b, "3 workers vs 1: artifacts identical");
        all_ok &= c.finish();
    }

    std::printf("%s\n", all_ok ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
    return all_ok ? 0 : 1;
}
