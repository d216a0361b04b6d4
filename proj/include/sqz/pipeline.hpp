#pragma once

// End-to-end orchestration: simulate -> reconstruct -> analyze, with every artifact written
// under the configured output directory.
//
// Layout of the output directory:
//   signal.sqzb, vacuum.sqzb                         traces
//   band_NN.json, tomogram_NN.csv, wigner_NN.{csv,svg}  per-band states (NN = 00..n_bands-1)
//   report.json, spectrum.*, total_variance.*, photon_total.*, g1.*   analysis

#include "sqz/analysis.hpp"
#include "sqz/config.hpp"
#include "sqz/opa_sim.hpp"
#include "sqz/pattern.hpp"
#include "sqz/report.hpp"
#include "sqz/spectral.hpp"
#include "sqz/tomography.hpp"
#include "sqz/trace_io.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace sqz::pipeline {

namespace fs = std::filesystem;
using report::Json;

/// Runs job(i) for i in [0, count) on up to `workers` threads.  The first exception thrown by
/// any job is rethrown after all threads have joined.
inline void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

inline std::string band_name(const char* stem, std::size_t b, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%02zu.%s", stem, b, ext);
    return buf;
}

inline std::string tagged_csv(const RunConfig& cfg, const std::string& body) {
    return "# config_hash=" + config_hash(cfg) + "\n" + body;
}

inline std::string tagged_svg(const RunConfig& cfg, std::string svg) {
    const auto end = svg.find('>') + 1;
    return svg.insert(end, "\n<!-- config_hash=" + config_hash(cfg) + " -->");
}

inline void ensure_out_dir(const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.out_path(), ec);
    if (ec) throw DataError("cannot create output directory " + cfg.out_dir + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateResult {
    fs::path signal_path;
    fs::path vacuum_path;
};

inline SimulateResult cmd_simulate(const RunConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg);
    auto signal = simulate_trace(cfg.opa, cfg.acq, SimSeed{cfg.seed});
    auto vacuum = simulate_vacuum_trace(cfg.acq, SimSeed{cfg.seed});
    if (cfg.acq.adc_bits) {
        // One converter range for both records, set by the signal.
        const double full_scale = 5.0 * antisqueezed_rms(signal);
        signal = apply_adc(signal, *cfg.acq.adc_bits, full_scale);
        vacuum = apply_adc(vacuum, *cfg.acq.adc_bits, full_scale);
    }
    SimulateResult r{cfg.resolve(cfg.signal_file), cfg.resolve(cfg.vacuum_file)};
    io::write_trace(r.signal_path, signal);
    io::write_trace(r.vacuum_path, vacuum);
    return r;
}

// ---------------------------------------------------------------------------
// trace loading

inline void check_against_config(const BroadbandTrace& t, const RunConfig& cfg, const fs::path& path) {
    const auto& a = cfg.acq;
    if (t.config.sample_rate != a.sample_rate || t.config.n_samples != a.n_samples ||
        t.config.sweep_period != a.sweep_period || t.config.phase_offset != a.phase_offset)
        throw DataError("config/trace mismatch: acquisition header of " + path.string() +
                        " differs from the configuration");
}

struct TracePair {
    BroadbandTrace signal;
    BroadbandTrace vacuum;
};

inline TracePair load_traces(const RunConfig& cfg) {
    const auto sp = cfg.resolve(cfg.signal_file), vp = cfg.resolve(cfg.vacuum_file);
    if (!fs::exists(sp)) throw DataError("signal trace not found: " + sp.string());
    if (!fs::exists(vp))
        throw DataError("calibration missing: vacuum trace not found at " + vp.string() +
                        " (needed to normalize every band)");
    TracePair p{io::read_trace(sp, cfg.acq), io::read_trace(vp, cfg.acq)};
    check_against_config(p.signal, cfg, sp);
    check_against_config(p.vacuum, cfg, vp);
    if (p.vacuum.kind != TraceKind::vacuum) throw DataError("file " + vp.string() + " is not a vacuum trace");
    return p;
}

// ---------------------------------------------------------------------------
// reconstruct

struct BandState {
    std::size_t band_index = 0;
    double center_frequency = 0.0;
    bool discarded = false;
    DensityEstimate estimate;
    PhotonDistribution photons;
    double wigner_rms = 0.0;  ///< back-projection vs Fock synthesis, relative to max |W|
    double wigner_integral = 0.0;
};

/// Pattern-function grid wide enough for every sample, keeping the configured node spacing.
inline PatternKernel kernel_for(const BandDecomposition& dec, const RunConfig& cfg) {
    double reach = 0.0;
    for (const auto& b : dec.bands)
        for (double x : b.samples.x) reach = std::max(reach, std::abs(x));
    const double spacing = 2.0 * cfg.tomo.kernel_half_width / static_cast<double>(cfg.tomo.kernel_points - 1);
    const double half = std::max({cfg.tomo.kernel_half_width, std::ceil(reach) + 1.0,
                                  PatternKernel::required_half_width(cfg.tomo.n_max)});
    const auto points = static_cast<std::size_t>(std::ceil(2.0 * half / spacing)) + 1;
    return pattern_kernel(cfg.tomo.n_max, UniformAxis::symmetric(half, points));
}

inline Json density_json(const DensityMatrix& rho) {
    Json re = Json::array(), im = Json::array();
    for (std::size_t n = 0; n < rho.dim(); ++n) {
        Json rr = Json::array(), ii = Json::array();
        for (std::size_t m = 0; m < rho.dim(); ++m) {
            rr.push_back(rho(n, m).real());
            ii.push_back(rho(n, m).imag());
        }
        re.push_back(rr);
        im.push_back(ii);
    }
    return Json{{"real", re}, {"imag", im}};
}

inline std::vector<BandState> cmd_reconstruct(const RunConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg);
    const auto traces = load_traces(cfg);
    const auto dec = discard_low_band(decompose(traces.signal, traces.vacuum));
    const auto kernel = kernel_for(dec, cfg);
    const auto grid = UniformAxis::symmetric(cfg.tomo.wigner_half_width, cfg.tomo.wigner_points);

    std::vector<BandState> states(dec.bands.size());
    const auto job = [&](std::size_t b, std::size_t inner_threads) {
        const auto& rec = dec.bands[b];
        BandState& st = states[b];
        st.band_index = b;
        st.center_frequency = rec.samples.center_frequency;
        st.discarded = rec.discarded;
        Json doc{{"conventions", report::conventions(cfg)},
                 {"band_index", b},
                 {"center_frequency_hz", st.center_frequency / kTwoPi},
                 {"discarded", rec.discarded},
                 {"vacuum_variance_raw", rec.vacuum_variance},
                 {"calibration_scale", rec.scale}};
        if (rec.discarded) {
            doc["reason"] = "low-frequency band excluded from analysis";
            report::write_json(cfg.out_path() / band_name("band", b, "json"), doc);
            return;
        }
        EstimateOptions eo;
        eo.threads = inner_threads;
        st.estimate = estimate_density_matrix(rec.samples, kernel, eo);
        st.photons = photon_distribution(st.estimate.rho);
        const auto tomo = marginal_histogram(rec.samples, cfg.tomo.tomogram_phase_bins, cfg.tomo.tomogram_x_bins);
        const auto w_bp = wigner_backprojection(tomo, grid, grid, {cfg.tomo.cutoff, cfg.tomo.filter_points});
        const auto w_fock = wigner_from_density(st.estimate.rho, grid, grid);
        st.wigner_rms = wigner_rms_difference(w_bp, w_fock) / std::max(w_fock.max_abs(), 1e-300);
        st.wigner_integral = w_bp.integral();

        doc["samples"] = rec.samples.size();
        doc["samples_used"] = st.estimate.samples_used;
        doc["out_of_span"] = st.estimate.out_of_span;
        doc["phase_imbalance"] = st.estimate.phase_imbalance;
        doc["nonuniform_phase"] = st.estimate.nonuniform_phase;
        doc["trace"] = st.estimate.rho.trace();
        doc["vacuum_fidelity"] = vacuum_fidelity(st.estimate.rho);
        doc["photon_distribution"] = st.photons.p;
        doc["photon_clipped_mass"] = st.photons.clipped_mass;
        doc["trace_flagged"] = st.photons.trace_flagged;
        doc["density_matrix"] = density_json(st.estimate.rho);
        doc["wigner"] = Json{{"q_range", {grid.lo, grid.hi}},
                             {"p_range", {grid.lo, grid.hi}},
                             {"points", grid.points},
                             {"integral_backprojection", st.wigner_integral},
                             {"integral_fock", w_fock.integral()},
                             {"rms_difference_rel", st.wigner_rms},
                             {"backprojection_file", band_name("wigner", b, "csv")}};
        report::write_json(cfg.out_path() / band_name("band", b, "json"), doc);

        std::vector<double> th, xc, pr;
        for (std::size_t j = 0; j < tomo.phase_bins; ++j)
            for (std::size_t k = 0; k < tomo.x_bins(); ++k) {
                th.push_back(tomo.phase_center(j));
                xc.push_back(tomo.x_center(k));
                pr.push_back(tomo.probability(j, k));
            }
        report::write_text(cfg.out_path() / band_name("tomogram", b, "csv"),
                           tagged_csv(cfg, report::csv({"theta", "x", "probability"}, {th, xc, pr})));
        std::vector<double> q, p, wb, wf;
        for (std::size_t ip = 0; ip < grid.points; ++ip)
            for (std::size_t iq = 0; iq < grid.points; ++iq) {
                q.push_back(grid[iq]);
                p.push_back(grid[ip]);
                wb.push_back(w_bp.at(iq, ip));
                wf.push_back(w_fock.at(iq, ip));
            }
        report::write_text(cfg.out_path() / band_name("wigner", b, "csv"),
                           tagged_csv(cfg, report::csv({"q", "p", "w_backprojection", "w_fock"}, {q, p, wb, wf})));
        char title[96];
        std::snprintf(title, sizeof title, "Wigner function, band %zu (%.2f MHz)", b, st.center_frequency / kTwoPi / 1e6);
        report::write_text(cfg.out_path() / band_name("wigner", b, "svg"),
                           tagged_svg(cfg, report::render_heatmap(w_bp, title)));
    };

    if (cfg.deterministic) {
        // Bands in parallel; each band is one fixed-order reduction.
        parallel_for(states.size(), cfg.workers, [&](std::size_t b) { job(b, 1); });
    } else {
        // Bands in sequence; each band's sample sum is split across the workers.
        for (std::size_t b = 0; b < states.size(); ++b) job(b, cfg.workers);
    }
    return states;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeResult {
    Json report;
    bool fit_converged = true;
    std::vector<std::string> gaps;
};

/// Local maxima and minima of a distribution, counted where p exceeds `floor` * max p.
inline std::size_t local_extrema(const std::vector<double>& p, double floor = 1e-3) {
    if (p.size() < 3) return 0;
    const double top = *std::max_element(p.begin(), p.end());
    std::size_t n = 0;
    for (std::size_t k = 1; k + 1 < p.size(); ++k) {
        if (p[k] < floor * top) continue;
        const double a = p[k] - p[k - 1], b = p[k + 1] - p[k];
        if (a * b < 0.0) ++n;
    }
    return n;
}

/// sum_n (-1)^n p_n.
inline double parity(const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) s += n % 2 ? -p[n] : p[n];
    return s;
}

inline Json spectrum_json(const SqueezingSpectrum& s) {
    Json arr = Json::array();
    for (const auto& p : s.points)
        arr.push_back(Json{{"band_index", p.band_index},
                           {"center_frequency_hz", p.omega / kTwoPi},
                           {"v_min", p.v_min},
                           {"v_max", p.v_max},
                           {"v_min_db", p.v_min > 0 ? Json(to_decibel(p.v_min)) : Json(nullptr)},
                           {"v_max_db", p.v_max > 0 ? Json(to_decibel(p.v_max)) : Json(nullptr)},
                           {"raw_bin_min", p.raw_bin_min},
                           {"raw_bin_max", p.raw_bin_max},
                           {"flagged", p.flagged}});
    return arr;
}

inline AnalyzeResult cmd_analyze(const RunConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg);
    AnalyzeResult res;
    Json& rep = res.report;
    rep["conventions"] = report::conventions(cfg);
    rep["config"] = serialize_config(cfg);
    const auto& acq = cfg.acq;
    const double band_hz = acq.band_width();

    // Per-band state documents.
    std::vector<std::vector<double>> dists;
    Json states = Json::array();
    for (std::size_t b = 1; b < acq.n_bands; ++b) {
        const auto path = cfg.out_path() / band_name("band", b, "json");
        if (!fs::exists(path)) {
            res.gaps.push_back("state document for band " + std::to_string(b) + " missing");
            continue;
        }
        const auto doc = report::read_json(path);
        if (doc.value("discarded", false)) continue;
        const auto p = doc.at("photon_distribution").get<std::vector<double>>();
        dists.push_back(p);
        states.push_back(Json{{"band_index", b},
                              {"trace", doc.at("trace")},
                              {"vacuum_fidelity", doc.at("vacuum_fidelity")},
                              {"p0", p.size() > 0 ? p[0] : 0.0},
                              {"p1", p.size() > 1 ? p[1] : 0.0},
                              {"p2", p.size() > 2 ? p[2] : 0.0},
                              {"odd_suppressed", p.size() > 2 && p[1] < 0.5 * (p[0] + p[2])},
                              {"wigner_rms_rel", doc.at("wigner").at("rms_difference_rel")}});
    }
    rep["states"] = states;
    if (!dists.empty()) {
        const auto total = total_photon_statistics(dists, cfg.analysis.photon_max);
        double mean = 0.0;
        for (std::size_t n = 0; n < total.p.size(); ++n) mean += static_cast<double>(n) * total.p[n];
        rep["total_photon_statistics"] = Json{{"bands", dists.size()},
                                              {"mean", mean},
                                              {"tail_mass", total.tail_mass},
                                              {"parity", parity(total.p)},
                                              {"local_extrema", local_extrema(total.p)},
                                              {"p", total.p}};
        std::vector<double> n(total.p.size());
        for (std::size_t k = 0; k < n.size(); ++k) n[k] = static_cast<double>(k);
        report::write_text(cfg.out_path() / "photon_total.csv", tagged_csv(cfg, report::csv({"n", "p"}, {n, total.p})));
        report::LinePlot plot{"Total photon-number distribution", "n", "p(n)", {{"convolution of bands", n, total.p, true}}};
        report::write_text(cfg.out_path() / "photon_total.svg", tagged_svg(cfg, report::render(plot)));
    }

    // Trace-level analyses.
    const auto sp = cfg.resolve(cfg.signal_file), vp = cfg.resolve(cfg.vacuum_file);
    if (!fs::exists(sp) || !fs::exists(vp)) {
        res.gaps.push_back("trace files missing: spectrum, totals and g1 not computed");
    } else {
        const auto traces = load_traces(cfg);
        const auto dec = discard_low_band(decompose(traces.signal, traces.vacuum));
        const SpectrumOptions so{cfg.analysis.phase_bins, cfg.analysis.min_bin_samples};
        const auto spec = squeezing_spectrum(dec, so);
        const auto theory = theory_spectrum(cfg.opa, acq);
        rep["spectrum"] = spectrum_json(spec);

        SpectrumFit fit;
        FitOptions fo;
        fo.gamma_free = cfg.analysis.fit_gamma_free;
        try {
            fit = fit_spectrum(spec, cfg.opa.cavity_hwhm, fo);
        } catch (const FitError& e) {
            fit = e.best_so_far();
            res.fit_converged = false;
        }
        rep["fit"] = Json{{"converged", res.fit_converged},
                          {"pump", fit.pump},
                          {"efficiency", fit.efficiency},
                          {"cavity_hwhm_mhz", fit.cavity_hwhm / kTwoPi / 1e6},
                          {"gamma_free", fit.gamma_free},
                          {"residual_norm", fit.residual_norm},
                          {"covariance", fit.covariance},
                          {"bands_used", fit.bands_used},
                          {"truth_pump", cfg.opa.pump},
                          {"truth_efficiency", cfg.opa.efficiency()}};
        if (!res.fit_converged) res.gaps.push_back("spectrum fit did not converge; best-so-far reported");

        {
            std::vector<double> f, vmin, vmax, tmin, tmax;
            for (std::size_t i = 0; i < spec.points.size(); ++i) {
                f.push_back(spec.points[i].omega / kTwoPi / 1e6);
                vmin.push_back(spec.points[i].v_min);
                vmax.push_back(spec.points[i].v_max);
                tmin.push_back(theory.points[i].v_min);
                tmax.push_back(theory.points[i].v_max);
            }
            report::write_text(cfg.out_path() / "spectrum.csv",
                               tagged_csv(cfg, report::csv({"frequency_mhz", "v_min", "v_max", "model_v_min", "model_v_max"},
                                                           {f, vmin, vmax, tmin, tmax})));
            std::vector<double> ff, fmin, fmax;
            const auto fp = OpaParams::with_efficiency(fit.pump, fit.efficiency, fit.cavity_hwhm);
            for (int k = 0; k <= 200; ++k) {
                const double hz = acq.sample_rate / 2.0 * k / 200.0;
                const auto psi = band_variances(fp, kTwoPi * hz);
                ff.push_back(hz / 1e6);
                fmin.push_back(psi.squeezed);
                fmax.push_back(psi.antisqueezed);
            }
            report::LinePlot plot{"Squeezing spectrum", "frequency [MHz]", "variance / vacuum",
                                  {{"measured V_max", f, vmax, true},
                                   {"measured V_min", f, vmin, true},
                                   {"fit", ff, fmax, false},
                                   {"fit ", ff, fmin, false}},
                                  true};
            report::write_text(cfg.out_path() / "spectrum.svg", tagged_svg(cfg, report::render(plot)));
        }

        // Totals over the active bands.
        const auto flat_signal = spectral_flatten(traces.signal, traces.vacuum);
        const auto flat_vacuum = spectral_flatten(traces.vacuum, traces.vacuum);
        const std::vector<std::size_t> removed{0};
        const auto tv = total_variance_vs_phase(flat_signal.trace, acq, removed, so);
        rep["total_variance"] = Json{{"v_min", tv.v_min},
                                     {"v_max", tv.v_max},
                                     {"v_min_db", tv.v_min > 0 ? Json(tv.min_db()) : Json(nullptr)},
                                     {"v_max_db", tv.v_max > 0 ? Json(tv.max_db()) : Json(nullptr)},
                                     {"raw_bin_min", tv.raw_bin_min},
                                     {"raw_bin_max", tv.raw_bin_max},
                                     {"flagged", tv.flagged},
                                     {"excluded_bins", flat_signal.excluded_bins.size()}};
        report::write_text(cfg.out_path() / "total_variance.csv",
                           tagged_csv(cfg, report::csv({"theta", "variance"}, {tv.phase, tv.variance})));
        {
            std::vector<double> db;
            for (double v : tv.variance) db.push_back(v > 0 ? to_decibel(v) : std::nan(""));
            report::LinePlot plot{"Total variance vs LO phase", "theta [rad]", "variance [dB re vacuum]",
                                  {{"bands 1..15", tv.phase, db, false}}};
            report::write_text(cfg.out_path() / "total_variance.svg", tagged_svg(cfg, report::render(plot)));
        }

        const double active_bandwidth = band_hz * static_cast<double>(acq.n_bands - 1);
        const auto flux = mean_photon_and_flux(spec, active_bandwidth);
        const auto flux_model = mean_photon_and_flux(theory, active_bandwidth);
        rep["photon_flux"] = Json{{"bandwidth_hz", active_bandwidth},
                                  {"mean_photons_per_mode", flux.mean_photons},
                                  {"flux_per_s", flux.flux},
                                  {"power_w", flux.power},
                                  {"model_mean_photons_per_mode", flux_model.mean_photons},
                                  {"model_flux_per_s", flux_model.flux},
                                  {"model_power_w", flux_model.power}};

        // g1 on the whole flattened record.
        const auto g1 = g1_estimate(flat_signal.trace, flat_vacuum.trace, acq, cfg.analysis.max_lag);
        const double d_model = res.fit_converged ? fit.pump : cfg.opa.pump;
        const double gamma = fit.cavity_hwhm;
        std::vector<double> theory_g1, lag_ns;
        double rms = 0.0;
        std::size_t rms_n = 0;
        for (std::size_t i = 0; i < g1.lags.size(); ++i) {
            theory_g1.push_back(g1_theory(d_model, gamma, g1.lags[i]));
            lag_ns.push_back(g1.lags[i] * 1e9);
            if (g1.valid[i] && gamma * g1.lags[i] <= 5.0) {
                rms += std::pow(g1.values[i] - theory_g1.back(), 2);
                ++rms_n;
            }
        }
        rep["g1"] = Json{{"normalized", g1.normalized},
                         {"normalization", g1.normalization},
                         {"lags_s", g1.lags},
                         {"values", g1.values},
                         {"valid", g1.valid},
                         {"theory", theory_g1},
                         {"theory_pump", d_model},
                         {"rms_within_5_over_gamma", rms_n ? Json(std::sqrt(rms / static_cast<double>(rms_n))) : Json(nullptr)}};
        std::vector<double> valid_mask(g1.valid.begin(), g1.valid.end());
        report::write_text(cfg.out_path() / "g1.csv",
                           tagged_csv(cfg, report::csv({"lag_s", "g1", "g1_theory", "valid"},
                                                       {g1.lags, g1.values, theory_g1, valid_mask})));
        {
            std::vector<double> fine_t, fine_g;
            const double tmax = g1.lags.back();
            for (int k = 0; k <= 200; ++k) {
                fine_t.push_back(tmax * k / 200.0 * 1e9);
                fine_g.push_back(g1_theory(d_model, gamma, tmax * k / 200.0));
            }
            std::vector<double> lv(lag_ns.begin() + 1, lag_ns.end()), gv(g1.values.begin() + 1, g1.values.end());
            report::LinePlot plot{"First-order correlation", "tau [ns]", "g1", {{"estimate", lv, gv, true}, {"model", fine_t, fine_g, false}}};
            report::write_text(cfg.out_path() / "g1.svg", tagged_svg(cfg, report::render(plot)));
        }
    }
    if (dists.empty() && !rep.contains("spectrum")) throw DataError("analyze: neither state documents nor traces found in " + cfg.out_dir);
    rep["gaps"] = res.gaps;
    report::write_json(cfg.out_path() / "report.json", rep);
    return res;
}

}  // namespace sqz::pipeline
