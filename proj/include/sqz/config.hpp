#pragma once

// Run configuration: a flat `key = value` text file ('#' starts a comment).  Every key is
// optional; defaults describe the reference experiment.  serialize() writes every key in a
// fixed order with round-trip number formatting, so parse(serialize(c)) == c and the hash of
// the serialized text identifies a configuration.

#include "sqz/core.hpp"

#include <charconv>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>

namespace sqz {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct TomographySettings {
    std::size_t n_max = 25;
    double cutoff = 5.0;                 ///< k_c of the back-projection filter
    double kernel_half_width = 8.0;      ///< widened at run time to cover every sample
    std::size_t kernel_points = 1024;
    double wigner_half_width = 8.0;
    std::size_t wigner_points = 81;
    std::size_t tomogram_phase_bins = 64;
    std::size_t tomogram_x_bins = 256;
    std::size_t filter_points = 4096;

    friend bool operator==(const TomographySettings&, const TomographySettings&) = default;
};

struct AnalysisSettings {
    std::size_t phase_bins = 64;
    std::size_t min_bin_samples = 50;
    std::size_t max_lag = 10;
    bool fit_gamma_free = false;
    std::size_t photon_max = 256;  ///< truncation of the total photon distribution

    friend bool operator==(const AnalysisSettings&, const AnalysisSettings&) = default;
};

struct RunConfig {
    OpaParams opa;
    AcquisitionConfig acq;
    TomographySettings tomo;
    AnalysisSettings analysis;
    std::uint64_t seed = 12345;
    std::string out_dir = "out";
    std::string signal_file = "signal.sqzb";  ///< relative paths resolve against out_dir
    std::string vacuum_file = "vacuum.sqzb";
    std::size_t workers = 1;
    bool deterministic = true;

    [[nodiscard]] std::filesystem::path out_path() const { return out_dir; }
    [[nodiscard]] std::filesystem::path resolve(const std::string& file) const {
        const std::filesystem::path p(file);
        return p.is_absolute() ? p : out_path() / p;
    }

    void validate() const {
        opa.validate();
        acq.validate();
        if (tomo.kernel_points < 16 || tomo.wigner_points < 3) throw ConfigError("grid point counts too small");
        if (!(tomo.cutoff > 0.0)) throw ConfigError("kc must be > 0");
        if (analysis.max_lag < 2) throw ConfigError("max_lag must be >= 2");
        if (workers == 0) throw ConfigError("workers must be >= 1");
    }

    friend bool operator==(const RunConfig& a, const RunConfig& b) {
        const auto opa_eq = [](const OpaParams& x, const OpaParams& y) {
            return x.pump == y.pump && x.cavity_hwhm == y.cavity_hwhm && x.escape_efficiency == y.escape_efficiency &&
                   x.detection_efficiency == y.detection_efficiency;
        };
        return opa_eq(a.opa, b.opa) && a.acq == b.acq && a.tomo == b.tomo && a.analysis == b.analysis &&
               a.seed == b.seed && a.out_dir == b.out_dir && a.signal_file == b.signal_file &&
               a.vacuum_file == b.vacuum_file && a.workers == b.workers && a.deterministic == b.deterministic;
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc{} || r.ptr != text.data() + text.size())
        throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + text + "'");
}

/// One accessor per key: read from text, write to text.
struct KeyBinding {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<std::pair<std::string, KeyBinding>>& key_table() {
    using S = std::string;
    static const auto table = [] {
        std::vector<std::pair<std::string, KeyBinding>> t;
        const auto real = [&t](const char* k, auto member) {
            t.push_back({k, {[k, member](RunConfig& c, const S& v) { member(c) = parse_number<double>(k, v); },
                             [member](const RunConfig& c) { return format_double(member(const_cast<RunConfig&>(c))); }}});
        };
        const auto count = [&t](const char* k, auto member) {
            t.push_back({k, {[k, member](RunConfig& c, const S& v) { member(c) = parse_number<std::size_t>(k, v); },
                             [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }}});
        };
        const auto flag = [&t](const char* k, auto member) {
            t.push_back({k, {[k, member](RunConfig& c, const S& v) { member(c) = parse_bool(k, v); },
                             [member](const RunConfig& c) { return S(member(const_cast<RunConfig&>(c)) ? "true" : "false"); }}});
        };
        const auto text = [&t](const char* k, auto member) {
            t.push_back({k, {[member](RunConfig& c, const S& v) { member(c) = v; },
                             [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)); }}});
        };

        real("pump_parameter", [](RunConfig& c) -> double& { return c.opa.pump; });
        // Gamma is written as Gamma / 2 pi in MHz.
        t.push_back({"cavity_hwhm_mhz",
                     {[](RunConfig& c, const S& v) { c.opa.cavity_hwhm = kTwoPi * 1e6 * parse_number<double>("cavity_hwhm_mhz", v); },
                      [](const RunConfig& c) { return format_double(c.opa.cavity_hwhm / (kTwoPi * 1e6)); }}});
        real("escape_efficiency", [](RunConfig& c) -> double& { return c.opa.escape_efficiency; });
        real("detection_efficiency", [](RunConfig& c) -> double& { return c.opa.detection_efficiency; });

        real("sample_rate", [](RunConfig& c) -> double& { return c.acq.sample_rate; });
        count("n_samples", [](RunConfig& c) -> std::size_t& { return c.acq.n_samples; });
        real("sweep_period", [](RunConfig& c) -> double& { return c.acq.sweep_period; });
        real("phase_offset", [](RunConfig& c) -> double& { return c.acq.phase_offset; });
        t.push_back({"adc_bits",
                     {[](RunConfig& c, const S& v) {
                          if (v == "none") c.acq.adc_bits.reset();
                          else c.acq.adc_bits = parse_number<int>("adc_bits", v);
                      },
                      [](const RunConfig& c) { return c.acq.adc_bits ? std::to_string(*c.acq.adc_bits) : S("none"); }}});
        count("n_bands", [](RunConfig& c) -> std::size_t& { return c.acq.n_bands; });

        count("n_max", [](RunConfig& c) -> std::size_t& { return c.tomo.n_max; });
        real("kc", [](RunConfig& c) -> double& { return c.tomo.cutoff; });
        real("kernel_half_width", [](RunConfig& c) -> double& { return c.tomo.kernel_half_width; });
        count("kernel_points", [](RunConfig& c) -> std::size_t& { return c.tomo.kernel_points; });
        real("wigner_half_width", [](RunConfig& c) -> double& { return c.tomo.wigner_half_width; });
        count("wigner_points", [](RunConfig& c) -> std::size_t& { return c.tomo.wigner_points; });
        count("tomogram_phase_bins", [](RunConfig& c) -> std::size_t& { return c.tomo.tomogram_phase_bins; });
        count("tomogram_x_bins", [](RunConfig& c) -> std::size_t& { return c.tomo.tomogram_x_bins; });
        count("filter_points", [](RunConfig& c) -> std::size_t& { return c.tomo.filter_points; });

        count("phase_bins", [](RunConfig& c) -> std::size_t& { return c.analysis.phase_bins; });
        count("min_bin_samples", [](RunConfig& c) -> std::size_t& { return c.analysis.min_bin_samples; });
        count("max_lag", [](RunConfig& c) -> std::size_t& { return c.analysis.max_lag; });
        flag("fit_gamma_free", [](RunConfig& c) -> bool& { return c.analysis.fit_gamma_free; });
        count("photon_max", [](RunConfig& c) -> std::size_t& { return c.analysis.photon_max; });

        t.push_back({"seed", {[](RunConfig& c, const S& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
                              [](const RunConfig& c) { return std::to_string(c.seed); }}});
        text("out_dir", [](RunConfig& c) -> S& { return c.out_dir; });
        text("signal_file", [](RunConfig& c) -> S& { return c.signal_file; });
        text("vacuum_file", [](RunConfig& c) -> S& { return c.vacuum_file; });
        count("workers", [](RunConfig& c) -> std::size_t& { return c.workers; });
        flag("deterministic", [](RunConfig& c) -> bool& { return c.deterministic; });
        return t;
    }();
    return table;
}

}  // namespace detail

/// Applies one `key = value` setting.  Unknown keys are errors.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& [k, b] : detail::key_table())
        if (k == key) return b.set(cfg, value);
    throw ConfigError("unknown config key '" + key + "'");
}

[[nodiscard]] inline RunConfig parse_config(std::istream& is, RunConfig cfg = {}) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const auto key = detail::trim(std::string_view(t).substr(0, eq));
        const auto value = detail::trim(std::string_view(t).substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
        set_config_value(cfg, key, value);
    }
    return cfg;
}

[[nodiscard]] inline RunConfig parse_config(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

[[nodiscard]] inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    return parse_config(is);
}

[[nodiscard]] inline std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& [k, b] : detail::key_table()) out += k + " = " + b.get(cfg) + "\n";
    return out;
}

/// FNV-1a, 64 bit.
[[nodiscard]] inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Hash of the settings that determine the results.  Paths are excluded, and so is the worker
/// count when reductions run in a fixed order.
[[nodiscard]] inline std::string config_hash(const RunConfig& cfg) {
    RunConfig c = cfg;
    c.out_dir = "out";
    c.signal_file = "signal.sqzb";
    c.vacuum_file = "vacuum.sqzb";
    if (c.deterministic) c.workers = 1;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize_config(c))));
    return buf;
}

}  // namespace sqz
