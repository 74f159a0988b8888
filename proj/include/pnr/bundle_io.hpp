#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnr/error.hpp"
#include "pnr/trace.hpp"

namespace pnr {

// Trace-bundle layout (all little-endian):
//   "PNRB" | u16 version | u8 channel | u8 reserved | u32 trace_count |
//   u32 samples_per_trace | f64 dt | f64 t0 | u8 mu_present | f64 mu |
//   u32 meta_len | meta (UTF-8 JSON) | trace_count * samples_per_trace f32
inline constexpr char bundle_magic[4] = {'P', 'N', 'R', 'B'};
inline constexpr std::uint16_t bundle_version = 1;
inline constexpr std::size_t bundle_fixed_header = 45;

namespace detail {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value)
{
    std::uint8_t bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(std::begin(bytes), std::end(bytes));
    }
    out.insert(out.end(), std::begin(bytes), std::end(bytes));
}

template <class T>
T get_le(std::span<const std::uint8_t> in, std::size_t offset)
{
    std::uint8_t bytes[sizeof(T)];
    std::memcpy(bytes, in.data() + offset, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(std::begin(bytes), std::end(bytes));
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), Errc::io_failure, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), Errc::io_failure, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), Errc::io_failure, "write failed for " + path.string());
}

inline std::string format_real(double v, int digits = 17)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

} // namespace detail

inline std::vector<std::uint8_t> encode_bundle(const TraceSet& set)
{
    validate(set);
    const std::string meta = set.meta.is_null() ? std::string("{}") : set.meta.dump();
    const std::size_t n = set.size();
    const std::size_t spt = set.samples_per_trace();

    std::vector<std::uint8_t> out;
    out.reserve(bundle_fixed_header + meta.size() + n * spt * 4);
    out.insert(out.end(), std::begin(bundle_magic), std::end(bundle_magic));
    detail::put_le<std::uint16_t>(out, bundle_version);
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(set.channel));
    detail::put_le<std::uint8_t>(out, 0);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(spt));
    detail::put_le<double>(out, set.dt());
    detail::put_le<double>(out, set.t0());
    detail::put_le<std::uint8_t>(out, set.mu_label ? 1 : 0);
    detail::put_le<double>(out, set.mu_label.value_or(0.0));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
    out.insert(out.end(), meta.begin(), meta.end());
    for (const Trace& t : set.traces) {
        for (double v : t.samples) {
            detail::put_le<float>(out, static_cast<float>(v));
        }
    }
    return out;
}

inline TraceSet decode_bundle(std::span<const std::uint8_t> bytes)
{
    using detail::get_le;
    require(bytes.size() >= bundle_fixed_header, Errc::malformed_header, "bundle shorter than its header");
    require(std::memcmp(bytes.data(), bundle_magic, 4) == 0, Errc::malformed_header, "bad magic");
    const auto version = get_le<std::uint16_t>(bytes, 4);
    require(version == bundle_version, Errc::version_mismatch,
            "bundle version " + std::to_string(version) + ", expected " + std::to_string(bundle_version));
    const auto channel = get_le<std::uint8_t>(bytes, 6);
    require(channel <= 1, Errc::malformed_header, "unknown channel code " + std::to_string(channel));
    require(get_le<std::uint8_t>(bytes, 7) == 0, Errc::malformed_header, "reserved byte not zero");
    const auto count = get_le<std::uint32_t>(bytes, 8);
    const auto spt = get_le<std::uint32_t>(bytes, 12);
    const auto dt = get_le<double>(bytes, 16);
    const auto t0 = get_le<double>(bytes, 24);
    const auto mu_present = get_le<std::uint8_t>(bytes, 32);
    require(mu_present <= 1, Errc::malformed_header, "mu_present must be 0 or 1");
    const auto mu = get_le<double>(bytes, 33);
    const auto meta_len = get_le<std::uint32_t>(bytes, 41);
    require(bytes.size() - bundle_fixed_header >= meta_len, Errc::malformed_header, "metadata runs past end of file");

    TraceSet set;
    set.channel = static_cast<Channel>(channel);
    if (mu_present) {
        set.mu_label = mu;
    }
    const char* meta_begin = reinterpret_cast<const char*>(bytes.data() + bundle_fixed_header);
    try {
        set.meta = nlohmann::json::parse(meta_begin, meta_begin + meta_len);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::malformed_header, std::string("metadata is not JSON: ") + e.what());
    }
    if (count > 0) {
        require(spt > 1, Errc::malformed_header, "samples_per_trace must exceed 1");
        require(std::isfinite(dt) && dt > 0.0, Errc::malformed_header, "dt must be positive");
    }

    const std::size_t payload_offset = bundle_fixed_header + meta_len;
    const std::size_t need = static_cast<std::size_t>(count) * spt * 4;
    const std::size_t have = bytes.size() - payload_offset;
    require(have >= need, Errc::truncated_payload,
            "payload has " + std::to_string(have) + " bytes, header declares " + std::to_string(need));
    require(have == need, Errc::malformed_header, "trailing bytes after payload");

    set.traces.resize(count);
    std::size_t offset = payload_offset;
    for (Trace& t : set.traces) {
        t.dt = dt;
        t.t0 = t0;
        t.samples.resize(spt);
        for (double& v : t.samples) {
            v = get_le<float>(bytes, offset);
            offset += 4;
        }
    }
    validate(set);
    return set;
}

inline void write_trace_bundle(const TraceSet& set, const std::filesystem::path& path)
{
    detail::write_file(path, encode_bundle(set));
}

inline TraceSet read_trace_bundle(const std::filesystem::path& path)
{
    return decode_bundle(detail::read_file(path));
}

/// One trace per row; header row holds `t=<seconds>` per column.
inline void write_trace_csv(const TraceSet& set, std::ostream& out)
{
    validate(set);
    const std::size_t n = set.samples_per_trace();
    for (std::size_t i = 0; i < n; ++i) {
        out << (i ? "," : "") << "t=" << detail::format_real(set.traces.front().time(i), 12);
    }
    out << '\n';
    for (const Trace& t : set.traces) {
        for (std::size_t i = 0; i < n; ++i) {
            out << (i ? "," : "") << detail::format_real(t.samples[i], 9);
        }
        out << '\n';
    }
}

inline void write_trace_csv(const TraceSet& set, const std::filesystem::path& path)
{
    std::ofstream out(path);
    require(static_cast<bool>(out), Errc::io_failure, "cannot open " + path.string());
    write_trace_csv(set, out);
}

enum class RawFormat { csv, f32, f64 };

/// Shape and grid for raw imports. For CSV with a `t=` header the grid comes
/// from the header; rows/cols of 0 mean "infer from the file".
struct RawImport {
    RawFormat format = RawFormat::f32;
    std::size_t rows = 0;
    std::size_t cols = 0;
    double dt = 0.0;
    double t0 = 0.0;
    Channel channel = Channel::snspd;
    std::optional<double> mu;
};

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep)) {
        out.push_back(field);
    }
    return out;
}

inline double parse_real(const std::string& s)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        fail(Errc::shape_mismatch, "cannot parse number '" + s + "'");
    }
    return v;
}

} // namespace detail

inline TraceSet import_raw(const std::filesystem::path& path, const RawImport& spec)
{
    TraceSet set;
    set.channel = spec.channel;
    set.mu_label = spec.mu;
    double dt = spec.dt;
    double t0 = spec.t0;
    std::vector<std::vector<double>> rows;

    if (spec.format == RawFormat::csv) {
        std::ifstream in(path);
        require(static_cast<bool>(in), Errc::io_failure, "cannot open " + path.string());
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (line.empty()) {
                continue;
            }
            auto fields = detail::split(line, ',');
            if (first && !fields.empty() && fields.front().rfind("t=", 0) == 0) {
                std::vector<double> times;
                for (const auto& f : fields) {
                    require(f.rfind("t=", 0) == 0, Errc::shape_mismatch, "mixed CSV header");
                    times.push_back(detail::parse_real(f.substr(2)));
                }
                require(times.size() > 1, Errc::shape_mismatch, "CSV header needs two or more columns");
                t0 = times.front();
                dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
                first = false;
                continue;
            }
            first = false;
            std::vector<double> row;
            row.reserve(fields.size());
            for (const auto& f : fields) {
                row.push_back(detail::parse_real(f));
            }
            rows.push_back(std::move(row));
        }
        if (spec.rows) {
            require(rows.size() == spec.rows, Errc::shape_mismatch, "CSV row count differs from declared rows");
        }
        for (const auto& r : rows) {
            require(r.size() == rows.front().size(), Errc::shape_mismatch, "ragged CSV rows");
            if (spec.cols) {
                require(r.size() == spec.cols, Errc::shape_mismatch, "CSV column count differs from declared cols");
            }
        }
    } else {
        require(spec.rows > 0 && spec.cols > 0, Errc::invalid_argument, "binary import needs rows and cols");
        const auto bytes = detail::read_file(path);
        const std::size_t width = spec.format == RawFormat::f32 ? 4 : 8;
        const std::size_t need = spec.rows * spec.cols * width;
        require(bytes.size() == need, Errc::shape_mismatch,
                "payload is " + std::to_string(bytes.size()) + " bytes, shape needs " + std::to_string(need));
        rows.assign(spec.rows, std::vector<double>(spec.cols));
        std::size_t offset = 0;
        for (auto& r : rows) {
            for (double& v : r) {
                v = width == 4 ? static_cast<double>(detail::get_le<float>(bytes, offset))
                               : detail::get_le<double>(bytes, offset);
                offset += width;
            }
        }
    }

    require(std::isfinite(dt) && dt > 0.0, Errc::invalid_argument, "import needs dt > 0 (flag or CSV header)");
    for (auto& r : rows) {
        set.traces.push_back(Trace{std::move(r), dt, t0});
    }
    validate(set);
    store(set, AcquisitionMeta{1.0 / dt, static_cast<std::uint32_t>(std::max(0.0, std::round(-t0 / dt))),
                               path.filename().string()});
    return set;
}

} // namespace pnr
