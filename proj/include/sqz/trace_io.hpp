#pragma once

// Binary trace container, little-endian:
//   "SQZB" | version u32 | sample_rate f64 | n_samples u64 | sweep_period f64 |
//   phase_offset f64 | kind u8 | n_samples x f64
// kind: 0 signal, 1 vacuum, 0x80 | b for the vacuum-normalized samples of band b.

#include "sqz/core.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace sqz::io {

inline constexpr std::array<char, 4> kTraceMagic{'S', 'Q', 'Z', 'B'};
inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr std::uint8_t kBandKindFlag = 0x80;
inline constexpr std::size_t kTraceHeaderBytes = 4 + 4 + 8 + 8 + 8 + 8 + 1;

namespace detail {

template <typename T>
void put_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw DataError("trace file truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

}  // namespace detail

struct TraceHeader {
    std::uint32_t version = kTraceVersion;
    double sample_rate = 0.0;
    std::uint64_t n_samples = 0;
    double sweep_period = 0.0;
    double phase_offset = 0.0;
    std::uint8_t kind = 0;
};

inline void write_trace(std::ostream& os, const TraceHeader& h, std::span<const double> samples) {
    if (samples.size() != h.n_samples) throw DataError("write_trace: sample count does not match header");
    os.write(kTraceMagic.data(), kTraceMagic.size());
    detail::put_le(os, h.version);
    detail::put_le(os, h.sample_rate);
    detail::put_le(os, h.n_samples);
    detail::put_le(os, h.sweep_period);
    detail::put_le(os, h.phase_offset);
    detail::put_le(os, h.kind);
    for (double v : samples) detail::put_le(os, v);
    if (!os) throw DataError("write_trace: stream error");
}

[[nodiscard]] inline TraceHeader header_for(const BroadbandTrace& trace) {
    return {kTraceVersion, trace.config.sample_rate, trace.config.n_samples, trace.config.sweep_period,
            trace.config.phase_offset, static_cast<std::uint8_t>(trace.kind)};
}

inline void write_trace(std::ostream& os, const BroadbandTrace& trace) {
    write_trace(os, header_for(trace), trace.samples);
}

inline void write_trace(const std::filesystem::path& path, const BroadbandTrace& trace) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path.string());
    write_trace(os, trace);
}

/// Vacuum-normalized samples of one band, for external tooling.
inline void write_band(const std::filesystem::path& path, const QuadratureSamples& band, const AcquisitionConfig& acq) {
    if (band.band_index >= 0x80) throw DataError("write_band: band index too large for container");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path.string());
    TraceHeader h{kTraceVersion, acq.sample_rate, band.x.size(), acq.sweep_period, acq.phase_offset,
                  static_cast<std::uint8_t>(kBandKindFlag | band.band_index)};
    write_trace(os, h, band.x);
}

struct TraceFile {
    TraceHeader header;
    std::vector<double> samples;
};

[[nodiscard]] inline TraceFile read_trace_file(std::istream& is) {
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), magic.size())) throw DataError("trace file truncated");
    if (magic != kTraceMagic) throw DataError("not a trace file (bad magic)");
    TraceFile f;
    f.header.version = detail::get_le<std::uint32_t>(is);
    if (f.header.version != kTraceVersion)
        throw DataError("unsupported trace version " + std::to_string(f.header.version));
    f.header.sample_rate = detail::get_le<double>(is);
    f.header.n_samples = detail::get_le<std::uint64_t>(is);
    f.header.sweep_period = detail::get_le<double>(is);
    f.header.phase_offset = detail::get_le<double>(is);
    f.header.kind = detail::get_le<std::uint8_t>(is);
    if (f.header.n_samples > (std::uint64_t{1} << 34)) throw DataError("implausible trace length");
    f.samples.resize(f.header.n_samples);
    for (auto& v : f.samples) v = detail::get_le<double>(is);
    return f;
}

/// Reads a broadband trace; acquisition fields not stored in the header (bands, ADC) come
/// from `defaults`.
[[nodiscard]] inline BroadbandTrace read_trace(std::istream& is, const AcquisitionConfig& defaults = {}) {
    auto f = read_trace_file(is);
    if (f.header.kind > static_cast<std::uint8_t>(TraceKind::vacuum))
        throw DataError("trace file holds band samples, not a broadband trace");
    BroadbandTrace trace;
    trace.config = defaults;
    trace.config.sample_rate = f.header.sample_rate;
    trace.config.n_samples = f.header.n_samples;
    trace.config.sweep_period = f.header.sweep_period;
    trace.config.phase_offset = f.header.phase_offset;
    trace.kind = static_cast<TraceKind>(f.header.kind);
    trace.samples = std::move(f.samples);
    trace.validate();
    return trace;
}

[[nodiscard]] inline BroadbandTrace read_trace(const std::filesystem::path& path, const AcquisitionConfig& defaults = {}) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open trace file: " + path.string());
    return read_trace(is, defaults);
}

}  // namespace sqz::io
