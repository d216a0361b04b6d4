#pragma once

// Output documents: JSON (ordered keys), CSV tables and minimal SVG line / heat-map plots.
// Everything is a pure function of its inputs; there are no timestamps.

#include "sqz/config.hpp"
#include "sqz/core.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace sqz::report {

using Json = nlohmann::ordered_json;

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw DataError("write failed: " + path.string());
}

inline void write_json(const std::filesystem::path& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

[[nodiscard]] inline Json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path.string());
    try {
        return Json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed document " + path.string() + ": " + e.what());
    }
}

/// Metadata every document carries.
[[nodiscard]] inline Json conventions(const RunConfig& cfg) {
    return Json{{"config_hash", config_hash(cfg)},
                {"vacuum_variance", 0.5},
                {"power_units", "vacuum = 1"},
                {"quadrature", "x_theta = (a^dag e^{i theta} + a e^{-i theta}) / sqrt 2"},
                {"lo_phase", "theta(t) = mod(2 pi t / T + theta_0, 2 pi)"},
                {"n_max", cfg.tomo.n_max},
                {"kc", cfg.tomo.cutoff}};
}

[[nodiscard]] inline std::string csv(const std::vector<std::string>& header,
                                     const std::vector<std::vector<double>>& columns) {
    std::string out;
    for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
    out += "\n";
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (c) out += ",";
            const double v = columns[c][r];
            out += std::isfinite(v) ? sqz::detail::format_double(v) : "nan";
        }
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    bool markers = false;  ///< squares instead of a polyline
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    bool log_y = false;
};

namespace detail {

inline constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;
inline constexpr const char* kPalette[] = {"#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d68910", "#555555"};

inline std::string num(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", v);
    return b;
}

inline std::string tick(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

inline std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

inline std::string header(const std::string& title) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
           "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) +
           "</text>\n";
}

}  // namespace detail

[[nodiscard]] inline std::string render(const LinePlot& plot) {
    using namespace detail;
    const auto ty = [&](double v) { return plot.log_y ? std::log10(v) : v; };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : plot.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (plot.log_y && !(s.y[i] > 0))) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!(x1 > x0)) x0 -= 0.5, x1 += 0.5;
    if (!(y1 > y0)) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    const auto px = [&](double v) { return kLeft + (v - x0) / (x1 - x0) * pw; };
    const auto py = [&](double v) { return kTop + (y1 - ty(v)) / (y1 - y0) * ph; };

    std::string o = header(plot.title);
    o += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
        const double label_y = plot.log_y ? std::pow(10.0, yv) : yv;
        o += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(kTop + ph + 16) + "\" text-anchor=\"middle\">" + tick(xv) + "</text>\n";
        o += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(kTop + (y1 - yv) / (y1 - y0) * ph + 4) +
             "\" text-anchor=\"end\">" + tick(label_y) + "</text>\n";
    }
    o += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
         escape(plot.x_label) + "</text>\n";
    o += "<text transform=\"translate(16," + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(plot.y_label) + "</text>\n";
    for (std::size_t si = 0; si < plot.series.size(); ++si) {
        const auto& s = plot.series[si];
        const std::string color = kPalette[si % std::size(kPalette)];
        if (s.markers) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.y[i]) || (plot.log_y && !(s.y[i] > 0))) continue;
                o += "<rect x=\"" + num(px(s.x[i]) - 3) + "\" y=\"" + num(py(s.y[i]) - 3) +
                     "\" width=\"6\" height=\"6\" fill=\"" + color + "\"/>\n";
            }
        } else {
            o += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.y[i]) || (plot.log_y && !(s.y[i] > 0))) continue;
                o += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
            }
            o += "\"/>\n";
        }
        o += "<text x=\"" + num(kLeft + pw - 8) + "\" y=\"" + num(kTop + 16 + 15 * si) + "\" text-anchor=\"end\" fill=\"" +
             color + "\">" + escape(s.name) + "</text>\n";
    }
    return o + "</svg>\n";
}

/// Diverging heat map of a Wigner grid (blue negative, red positive), symmetric color scale.
[[nodiscard]] inline std::string render_heatmap(const WignerGrid& w, const std::string& title) {
    using namespace detail;
    const double scale = std::max(w.max_abs(), 1e-300);
    const double side = std::min(kWidth - kLeft - kRight, kHeight - kTop - kBottom);
    const double cw = side / static_cast<double>(w.q_axis.points), ch = side / static_cast<double>(w.p_axis.points);
    std::string o = header(title);
    for (std::size_t ip = 0; ip < w.p_axis.points; ++ip)
        for (std::size_t iq = 0; iq < w.q_axis.points; ++iq) {
            const double v = std::clamp(w.at(iq, ip) / scale, -1.0, 1.0);
            const int fade = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(v))));
            char color[8];
            if (v >= 0) std::snprintf(color, sizeof color, "#ff%02x%02x", fade, fade);
            else std::snprintf(color, sizeof color, "#%02x%02xff", fade, fade);
            o += "<rect x=\"" + num(kLeft + cw * static_cast<double>(iq)) + "\" y=\"" +
                 num(kTop + ch * static_cast<double>(w.p_axis.points - 1 - ip)) + "\" width=\"" + num(cw + 0.05) +
                 "\" height=\"" + num(ch + 0.05) + "\" fill=\"" + color + "\"/>\n";
        }
    o += "<text x=\"" + num(kLeft + side / 2) + "\" y=\"" + num(kTop + side + 18) + "\" text-anchor=\"middle\">q [" +
         tick(w.q_axis.lo) + ", " + tick(w.q_axis.hi) + "]</text>\n";
    o += "<text transform=\"translate(" + num(kLeft - 10) + "," + num(kTop + side / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">p [" + tick(w.p_axis.lo) + ", " + tick(w.p_axis.hi) + "]</text>\n";
    o += "<text x=\"" + num(kLeft + side + 10) + "\" y=\"" + num(kTop + 14) + "\">max |W| = " + tick(scale) + "</text>\n";
    return o + "</svg>\n";
}

}  // namespace sqz::report
