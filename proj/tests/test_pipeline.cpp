#include "sqz/pipeline.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <unistd.h>

using namespace sqz;
namespace fs = std::filesystem;
namespace ts = testing_support;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("sqz_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

/// A run small enough for tests that only exercise plumbing.
RunConfig small_config(const fs::path& out) {
    RunConfig c;
    c.acq.n_samples = 1u << 16;
    c.acq.sweep_period = static_cast<double>(c.acq.n_samples) / c.acq.sample_rate;
    c.tomo.n_max = 6;
    c.tomo.wigner_points = 41;
    c.out_dir = out.string();
    return c;
}

void run_all(const RunConfig& cfg) {
    (void)pipeline::cmd_simulate(cfg);
    (void)pipeline::cmd_reconstruct(cfg);
    (void)pipeline::cmd_analyze(cfg);
}

std::vector<fs::path> artifacts(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SQZ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(RunConfig, SerializeParseRoundTrip) {
    RunConfig c;
    c.opa.pump = 0.61;
    c.opa.cavity_hwhm = kTwoPi * 12.25e6;
    c.acq.adc_bits = 12;
    c.acq.phase_offset = 0.3;
    c.tomo.n_max = 17;
    c.tomo.cutoff = 4.5;
    c.analysis.fit_gamma_free = true;
    c.seed = 987654321987ull;
    c.out_dir = "/tmp/somewhere else";
    c.workers = 3;
    c.deterministic = false;
    const auto back = parse_config(serialize_config(c));
    EXPECT_EQ(back, c);
    EXPECT_EQ(serialize_config(back), serialize_config(c));
    EXPECT_EQ(parse_config(serialize_config(RunConfig{})), RunConfig{});
}

TEST(RunConfig, ParseAcceptsCommentsAndRejectsMalformedLines) {
    const auto c = parse_config("# header\n\n  pump_parameter = 0.5   # trailing\nn_bands=8\nadc_bits = none\n");
    EXPECT_EQ(c.opa.pump, 0.5);
    EXPECT_EQ(c.acq.n_bands, 8u);
    EXPECT_FALSE(c.acq.adc_bits.has_value());
    EXPECT_THROW((void)parse_config("no_such_key = 1\n"), ConfigError);
    EXPECT_THROW((void)parse_config("n_max = twelve\n"), ConfigError);
    EXPECT_THROW((void)parse_config("n_max 12\n"), ConfigError);
    EXPECT_THROW((void)parse_config("n_max =\n"), ConfigError);
    EXPECT_THROW((void)parse_config("deterministic = maybe\n"), ConfigError);
    EXPECT_THROW((void)load_config("/nonexistent/sqz.conf"), ConfigError);
}

TEST(RunConfig, HashTracksResultsNotPaths) {
    RunConfig a;
    RunConfig b = a;
    b.out_dir = "elsewhere";
    b.signal_file = "s.sqzb";
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.workers = 4;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.deterministic = false;
    EXPECT_NE(config_hash(a), config_hash(b));
    b = a;
    b.seed = a.seed + 1;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(CmdSimulate, WritesTwoTracesWithConfigHeaders) {
    const auto dir = scratch("simulate");
    const auto cfg = small_config(dir);
    const auto r = pipeline::cmd_simulate(cfg);
    ASSERT_TRUE(fs::exists(r.signal_path));
    ASSERT_TRUE(fs::exists(r.vacuum_path));
    const auto s = io::read_trace(r.signal_path, cfg.acq);
    const auto v = io::read_trace(r.vacuum_path, cfg.acq);
    EXPECT_EQ(s.kind, TraceKind::signal);
    EXPECT_EQ(v.kind, TraceKind::vacuum);
    for (const auto* t : {&s, &v}) {
        EXPECT_EQ(t->config.sample_rate, cfg.acq.sample_rate);
        EXPECT_EQ(t->config.n_samples, cfg.acq.n_samples);
        EXPECT_EQ(t->config.sweep_period, cfg.acq.sweep_period);
        EXPECT_EQ(t->config.phase_offset, cfg.acq.phase_offset);
        EXPECT_EQ(t->samples.size(), cfg.acq.n_samples);
    }
}

TEST(CmdSimulate, SameSeedGivesByteIdenticalFiles) {
    const auto a = small_config(scratch("seed_a")), b = small_config(scratch("seed_b"));
    const auto ra = pipeline::cmd_simulate(a), rb = pipeline::cmd_simulate(b);
    EXPECT_EQ(ts::slurp(ra.signal_path), ts::slurp(rb.signal_path));
    EXPECT_EQ(ts::slurp(ra.vacuum_path), ts::slurp(rb.vacuum_path));
    auto c = small_config(scratch("seed_c"));
    c.seed = a.seed + 1;
    EXPECT_NE(ts::slurp(pipeline::cmd_simulate(c).signal_path), ts::slurp(ra.signal_path));
}

TEST(CmdSimulate, ZeroPumpSignalIsIndistinguishableFromVacuum) {
    auto cfg = small_config(scratch("zero_pump"));
    cfg.opa.pump = 0.0;
    const auto r = pipeline::cmd_simulate(cfg);
    const auto s = io::read_trace(r.signal_path, cfg.acq), v = io::read_trace(r.vacuum_path, cfg.acq);
    const auto ks = ts::ks_two_sample(s.samples, v.samples);
    EXPECT_GT(ks.p_value, 0.01) << "D = " << ks.statistic;
}

TEST(CmdReconstruct, MissingVacuumIsACalibrationError) {
    const auto dir = scratch("no_vacuum");
    const auto cfg = small_config(dir);
    const auto r = pipeline::cmd_simulate(cfg);
    fs::remove(r.vacuum_path);
    try {
        (void)pipeline::cmd_reconstruct(cfg);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("calibration missing"), std::string::npos) << e.what();
    }
}

TEST(CmdReconstruct, ConfigTraceMismatchIsADataError) {
    const auto dir = scratch("mismatch");
    auto cfg = small_config(dir);
    (void)pipeline::cmd_simulate(cfg);
    cfg.acq.sweep_period *= 0.5;
    try {
        (void)pipeline::cmd_reconstruct(cfg);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("mismatch"), std::string::npos) << e.what();
    }
}

TEST(CmdReconstruct, VacuumAsSignalReconstructsVacuumInEveryBand) {
    // 2^21 samples: about 1.3e5 per band equivalent.
    RunConfig cfg;
    cfg.opa.pump = 0.0;
    cfg.acq.n_samples = 1u << 21;
    cfg.tomo.n_max = 2;
    cfg.tomo.wigner_points = 41;
    cfg.out_dir = scratch("vacuum_signal").string();
    (void)pipeline::cmd_simulate(cfg);
    const auto states = pipeline::cmd_reconstruct(cfg);
    ASSERT_EQ(states.size(), 16u);
    EXPECT_TRUE(states[0].discarded);
    for (std::size_t b = 1; b < states.size(); ++b) {
        EXPECT_GT(vacuum_fidelity(states[b].estimate.rho), 0.99) << "band " << b;
        EXPECT_GE(states[b].estimate.rho(0, 0).real(), 0.99) << "band " << b;
    }
}

TEST(Pipeline, WorkerCountDoesNotChangeArtifacts) {
    auto one = small_config(scratch("workers_1"));
    auto three = small_config(scratch("workers_3"));
    three.workers = 3;
    run_all(one);
    run_all(three);
    const auto a = artifacts(one.out_path()), b = artifacts(three.out_path());
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a[i].filename(), b[i].filename());
        if (a[i].filename() == "report.json") {
            // The report echoes the full configuration, paths and worker count included.
            auto ra = report::read_json(a[i]), rb = report::read_json(b[i]);
            EXPECT_NE(ra["config"], rb["config"]);
            ra.erase("config");
            rb.erase("config");
            EXPECT_EQ(ra.dump(), rb.dump());
            continue;
        }
        EXPECT_EQ(ts::slurp(a[i]), ts::slurp(b[i])) << a[i].filename();
    }
}

TEST(Pipeline, SplitReductionAgreesToRounding) {
    auto det = small_config(scratch("split_det"));
    auto split = small_config(scratch("split_par"));
    split.workers = 3;
    split.deterministic = false;
    (void)pipeline::cmd_simulate(det);
    (void)pipeline::cmd_simulate(split);
    const auto a = pipeline::cmd_reconstruct(det), b = pipeline::cmd_reconstruct(split);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 1; k < a.size(); ++k)
        for (std::size_t n = 0; n <= det.tomo.n_max; ++n)
            for (std::size_t m = 0; m <= det.tomo.n_max; ++m)
                EXPECT_NEAR(std::abs(a[k].estimate.rho(n, m) - b[k].estimate.rho(n, m)), 0.0, 1e-12);
}

TEST(CmdAnalyze, PartialInputsAreReportedAsGaps) {
    const auto dir = scratch("partial");
    const auto cfg = small_config(dir);
    run_all(cfg);
    fs::remove(dir / "band_05.json");
    auto r = pipeline::cmd_analyze(cfg);
    ASSERT_FALSE(r.gaps.empty());
    EXPECT_NE(r.gaps.front().find("band 5"), std::string::npos);
    EXPECT_EQ(r.report["states"].size(), 14u);

    fs::remove(dir / "signal.sqzb");
    r = pipeline::cmd_analyze(cfg);
    EXPECT_FALSE(r.report.contains("spectrum"));
    EXPECT_TRUE(r.report.contains("total_photon_statistics"));
    bool traces_gap = false;
    for (const auto& g : r.gaps) traces_gap |= g.find("trace files missing") != std::string::npos;
    EXPECT_TRUE(traces_gap);

    for (std::size_t b = 0; b < 16; ++b) fs::remove(dir / pipeline::band_name("band", b, "json"));
    EXPECT_THROW((void)pipeline::cmd_analyze(cfg), DataError);
}

class DefaultRun : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        cfg_ = new RunConfig();
        cfg_->out_dir = scratch("default").string();
        (void)pipeline::cmd_simulate(*cfg_);
        states_ = new std::vector<pipeline::BandState>(pipeline::cmd_reconstruct(*cfg_));
        result_ = new pipeline::AnalyzeResult(pipeline::cmd_analyze(*cfg_));
    }
    static void TearDownTestSuite() {
        delete cfg_;
        delete states_;
        delete result_;
    }
    static RunConfig* cfg_;
    static std::vector<pipeline::BandState>* states_;
    static pipeline::AnalyzeResult* result_;
};

RunConfig* DefaultRun::cfg_ = nullptr;
std::vector<pipeline::BandState>* DefaultRun::states_ = nullptr;
pipeline::AnalyzeResult* DefaultRun::result_ = nullptr;

TEST_F(DefaultRun, FifteenStatesWithUnitTrace) {
    ASSERT_EQ(states_->size(), 16u);
    EXPECT_TRUE((*states_)[0].discarded);
    for (std::size_t b = 1; b < 16; ++b) {
        const auto& s = (*states_)[b];
        EXPECT_FALSE(s.discarded);
        EXPECT_GE(s.estimate.rho.trace(), 0.97) << b;
        EXPECT_LE(s.estimate.rho.trace(), 1.03) << b;
        EXPECT_EQ(s.estimate.out_of_span, 0u);
    }
    for (std::size_t b = 0; b < 16; ++b) {
        const auto doc = report::read_json(cfg_->out_path() / pipeline::band_name("band", b, "json"));
        EXPECT_EQ(doc["discarded"].get<bool>(), b == 0);
    }
}

TEST_F(DefaultRun, ReportFitMatchesConfigTruth) {
    const auto& fit = result_->report["fit"];
    EXPECT_TRUE(fit["converged"].get<bool>());
    EXPECT_NEAR(fit["pump"].get<double>(), cfg_->opa.pump, 0.03);
    EXPECT_NEAR(fit["efficiency"].get<double>(), cfg_->opa.efficiency(), 0.03);
    EXPECT_TRUE(result_->gaps.empty());
}

TEST_F(DefaultRun, DecibelFieldsMatchLinearFields) {
    const auto& rep = result_->report;
    for (const auto& p : rep["spectrum"]) {
        EXPECT_DOUBLE_EQ(p["v_min_db"].get<double>(), to_decibel(p["v_min"].get<double>()));
        EXPECT_DOUBLE_EQ(p["v_max_db"].get<double>(), to_decibel(p["v_max"].get<double>()));
    }
    const auto& tv = rep["total_variance"];
    EXPECT_DOUBLE_EQ(tv["v_min_db"].get<double>(), to_decibel(tv["v_min"].get<double>()));
    EXPECT_DOUBLE_EQ(tv["v_max_db"].get<double>(), to_decibel(tv["v_max"].get<double>()));
}

TEST_F(DefaultRun, RerunOfAnalyzeIsIdentical) {
    const auto before = ts::slurp(cfg_->out_path() / "report.json");
    (void)pipeline::cmd_analyze(*cfg_);
    EXPECT_EQ(ts::slurp(cfg_->out_path() / "report.json"), before);
}

TEST_F(DefaultRun, EveryDocumentCarriesTheConfigHash) {
    const auto hash = config_hash(*cfg_);
    std::size_t checked = 0;
    for (const auto& p : artifacts(cfg_->out_path())) {
        const auto ext = p.extension();
        if (ext == ".sqzb") continue;
        const auto text = ts::slurp(p);
        if (ext == ".json") {
            const auto doc = report::read_json(p);
            EXPECT_EQ(doc["conventions"]["config_hash"].get<std::string>(), hash) << p;
            EXPECT_EQ(doc["conventions"]["vacuum_variance"].get<double>(), 0.5) << p;
        } else {
            EXPECT_NE(text.find("config_hash=" + hash), std::string::npos) << p;
        }
        ++checked;
    }
    // 16 band documents, 15 tomograms, 30 Wigner files, report and 4 analyses x 2 formats.
    EXPECT_EQ(checked, 16u + 15u + 30u + 1u + 8u);
}

TEST(Cli, UsageErrorsExitWithOne) {
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli("simulate --bogus"), 1);
    EXPECT_EQ(run_cli("simulate --workers 0"), 1);
    EXPECT_EQ(run_cli("simulate --nmax -3"), 1);
    EXPECT_EQ(run_cli("all --deterministic --no-deterministic"), 1);
    EXPECT_EQ(run_cli("simulate --config /nonexistent/file.conf"), 1);
    EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Cli, MissingInputsExitWithTwo) {
    const auto dir = scratch("cli_missing");
    EXPECT_EQ(run_cli("reconstruct --out " + dir.string()), 2);
    EXPECT_EQ(run_cli("analyze --out " + dir.string()), 2);
}

TEST(Cli, ZeroCalibrationExitsWithThree) {
    const auto dir = scratch("cli_zero");
    const auto cfg = small_config(dir);
    report::write_text(dir / "run.conf", serialize_config(cfg));
    ASSERT_EQ(run_cli("simulate --config " + (dir / "run.conf").string()), 0);
    auto vac = io::read_trace(dir / "vacuum.sqzb", cfg.acq);
    std::fill(vac.samples.begin(), vac.samples.end(), 0.0);
    io::write_trace(dir / "vacuum.sqzb", vac);
    EXPECT_EQ(run_cli("reconstruct --config " + (dir / "run.conf").string()), 3);
}

TEST(Cli, SmallRunSucceedsAndHonorsOverrides) {
    const auto dir = scratch("cli_run");
    const auto cfg = small_config(dir);
    report::write_text(dir / "run.conf", serialize_config(cfg));
    ASSERT_EQ(run_cli("all --config " + (dir / "run.conf").string() + " --nmax 4 --kc 4 --seed 7 --workers 2"), 0);
    const auto rep = report::read_json(dir / "report.json");
    EXPECT_EQ(rep["conventions"]["n_max"].get<std::size_t>(), 4u);
    EXPECT_EQ(rep["conventions"]["kc"].get<double>(), 4.0);
    auto expect = cfg;
    expect.tomo.n_max = 4;
    expect.tomo.cutoff = 4.0;
    expect.seed = 7;
    expect.workers = 2;
    EXPECT_EQ(rep["conventions"]["config_hash"].get<std::string>(), config_hash(expect));
}
