#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "pnr/bundle_io.hpp"
#include "pnr/error.hpp"
#include "pnr/parallel.hpp"
#include "pnr/preprocess.hpp"
#include "pnr/trace.hpp"

namespace pnr {

/// Derivative of a reference mean trace and its squared norm
/// C = sum(deriv^2) * dt, in V^2/s.
struct ProjectionBasis {
    Trace deriv;
    double norm_c = 0.0;
    std::string reference_label;
};

/// Single projection vector over a concatenated (SNSPD, sync) pair.
struct HybridBasis {
    std::vector<double> snspd_part; ///< deriv(mean SNSPD) / C_snspd
    std::vector<double> sync_part;  ///< -deriv(mean sync) / C_sync
    double dt = 0.0;
    double norm_snspd = 0.0;
    double norm_sync = 0.0;
};

inline std::string default_reference_label(const TraceSet& set)
{
    if (!set.mu_label) {
        return "single-photon";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "mu=%g", *set.mu_label);
    return buf;
}

inline ProjectionBasis basis_from_mean(const Trace& mean, std::string label)
{
    ProjectionBasis basis;
    basis.deriv = derivative(mean);
    basis.norm_c = dot(basis.deriv.samples, basis.deriv.samples) * basis.deriv.dt;
    require(basis.norm_c > 0.0 && std::isfinite(basis.norm_c), Errc::degenerate,
            "reference mean has zero derivative");
    basis.reference_label = std::move(label);
    return basis;
}

inline ProjectionBasis build_basis(const TraceSet& reference)
{
    require(!reference.empty(), Errc::empty_set, "basis reference set is empty");
    return basis_from_mean(mean_trace(reference), default_reference_label(reference));
}

/// Projected time in seconds; positive values mean the pulse arrives later
/// than the reference mean.
inline double project_time(const ProjectionBasis& basis, const Trace& trace)
{
    require(trace.size() == basis.deriv.size(), Errc::length_mismatch, "trace length differs from basis");
    return -dot(basis.deriv.samples, trace.samples) * basis.deriv.dt / basis.norm_c;
}

inline std::vector<double> project_set(const ProjectionBasis& basis, const TraceSet& set)
{
    std::vector<double> out(set.size());
    parallel_for(set.size(), [&](std::size_t i) { out[i] = project_time(basis, set.traces[i]); });
    return out;
}

inline HybridBasis hybrid_from_means(const Trace& snspd_mean, const Trace& sync_mean)
{
    require(snspd_mean.dt == sync_mean.dt, Errc::invalid_argument, "SNSPD and sync references differ in dt");
    const ProjectionBasis a = basis_from_mean(snspd_mean, "snspd");
    const ProjectionBasis b = basis_from_mean(sync_mean, "sync");
    HybridBasis h;
    h.dt = snspd_mean.dt;
    h.norm_snspd = a.norm_c;
    h.norm_sync = b.norm_c;
    h.snspd_part.resize(a.deriv.size());
    h.sync_part.resize(b.deriv.size());
    for (std::size_t i = 0; i < a.deriv.size(); ++i) {
        h.snspd_part[i] = a.deriv.samples[i] / a.norm_c;
    }
    for (std::size_t i = 0; i < b.deriv.size(); ++i) {
        h.sync_part[i] = -b.deriv.samples[i] / b.norm_c;
    }
    return h;
}

inline HybridBasis build_hybrid_basis(const TraceSet& snspd_ref, const TraceSet& sync_ref)
{
    require(!snspd_ref.empty() && !sync_ref.empty(), Errc::empty_set, "hybrid reference set is empty");
    return hybrid_from_means(mean_trace(snspd_ref), mean_trace(sync_ref));
}

/// SNSPD delay minus sync delay from one dot product over the raw pair.
inline double hybrid_project(const HybridBasis& basis, const Trace& snspd, const Trace& sync)
{
    require(snspd.size() == basis.snspd_part.size() && sync.size() == basis.sync_part.size(),
            Errc::length_mismatch, "trace lengths differ from hybrid basis");
    return -(dot(snspd.samples, basis.snspd_part) + dot(sync.samples, basis.sync_part)) * basis.dt;
}

inline std::vector<double> hybrid_project_set(const HybridBasis& basis, const TraceSet& snspd, const TraceSet& sync)
{
    require(snspd.size() == sync.size(), Errc::length_mismatch, "SNSPD and sync trace counts differ");
    std::vector<double> out(snspd.size());
    parallel_for(snspd.size(), [&](std::size_t i) { out[i] = hybrid_project(basis, snspd.traces[i], sync.traces[i]); });
    return out;
}

inline std::vector<double> median_subtracted(const std::vector<double>& values)
{
    if (values.empty()) {
        return {};
    }
    const double m = median(values);
    std::vector<double> out(values);
    for (double& v : out) {
        v -= m;
    }
    return out;
}

// Basis sidecar (little-endian):
//   "PNRP" | u16 version | u8 kind (0 basis, 1 hybrid) | u8 reserved |
//   u32 length | f64 dt | f64 t0 | f64 norm_a | f64 norm_b |
//   u32 label_len | label | f64 values (basis: deriv; hybrid: snspd_part then sync_part)
inline constexpr char sidecar_magic[4] = {'P', 'N', 'R', 'P'};
inline constexpr std::uint16_t sidecar_version = 1;

using AnyBasis = std::variant<ProjectionBasis, HybridBasis>;

inline std::vector<std::uint8_t> encode_basis(const AnyBasis& any)
{
    using detail::put_le;
    std::vector<std::uint8_t> out(std::begin(sidecar_magic), std::end(sidecar_magic));
    put_le<std::uint16_t>(out, sidecar_version);
    if (const auto* b = std::get_if<ProjectionBasis>(&any)) {
        put_le<std::uint8_t>(out, 0);
        put_le<std::uint8_t>(out, 0);
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b->deriv.size()));
        put_le<double>(out, b->deriv.dt);
        put_le<double>(out, b->deriv.t0);
        put_le<double>(out, b->norm_c);
        put_le<double>(out, 0.0);
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b->reference_label.size()));
        out.insert(out.end(), b->reference_label.begin(), b->reference_label.end());
        for (double v : b->deriv.samples) {
            put_le<double>(out, v);
        }
    } else {
        const auto& h = std::get<HybridBasis>(any);
        put_le<std::uint8_t>(out, 1);
        put_le<std::uint8_t>(out, 0);
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.snspd_part.size()));
        put_le<double>(out, h.dt);
        put_le<double>(out, 0.0);
        put_le<double>(out, h.norm_snspd);
        put_le<double>(out, h.norm_sync);
        put_le<std::uint32_t>(out, 0);
        for (double v : h.snspd_part) {
            put_le<double>(out, v);
        }
        for (double v : h.sync_part) {
            put_le<double>(out, v);
        }
    }
    return out;
}

inline AnyBasis decode_basis(std::span<const std::uint8_t> bytes)
{
    using detail::get_le;
    constexpr std::size_t fixed = 4 + 2 + 1 + 1 + 4 + 8 * 4 + 4;
    require(bytes.size() >= fixed, Errc::malformed_header, "basis sidecar shorter than header");
    require(std::memcmp(bytes.data(), sidecar_magic, 4) == 0, Errc::malformed_header, "bad basis magic");
    require(get_le<std::uint16_t>(bytes, 4) == sidecar_version, Errc::version_mismatch, "basis sidecar version");
    const auto kind = get_le<std::uint8_t>(bytes, 6);
    require(kind <= 1, Errc::malformed_header, "unknown basis kind");
    const auto length = get_le<std::uint32_t>(bytes, 8);
    const double dt = get_le<double>(bytes, 12);
    const double t0 = get_le<double>(bytes, 20);
    const double norm_a = get_le<double>(bytes, 28);
    const double norm_b = get_le<double>(bytes, 36);
    const auto label_len = get_le<std::uint32_t>(bytes, 44);
    require(bytes.size() >= fixed + label_len, Errc::malformed_header, "basis label runs past end");
    const std::size_t vectors = kind == 0 ? 1 : 2;
    const std::size_t need = fixed + label_len + vectors * length * 8;
    require(bytes.size() >= need, Errc::truncated_payload, "basis sidecar payload truncated");
    require(bytes.size() == need, Errc::malformed_header, "trailing bytes in basis sidecar");

    std::size_t offset = fixed + label_len;
    auto read_vector = [&] {
        std::vector<double> v(length);
        for (double& x : v) {
            x = get_le<double>(bytes, offset);
            offset += 8;
        }
        return v;
    };
    if (kind == 0) {
        ProjectionBasis b;
        b.reference_label.assign(reinterpret_cast<const char*>(bytes.data() + fixed), label_len);
        b.deriv = Trace{read_vector(), dt, t0};
        b.norm_c = norm_a;
        return b;
    }
    HybridBasis h;
    h.dt = dt;
    h.norm_snspd = norm_a;
    h.norm_sync = norm_b;
    h.snspd_part = read_vector();
    h.sync_part = read_vector();
    return h;
}

inline void write_basis(const AnyBasis& basis, const std::filesystem::path& path)
{
    detail::write_file(path, encode_basis(basis));
}

inline AnyBasis read_basis(const std::filesystem::path& path) { return decode_basis(detail::read_file(path)); }

} // namespace pnr
