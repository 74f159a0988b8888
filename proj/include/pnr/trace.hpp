#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pnr/error.hpp"

namespace pnr {

/// One sampled voltage waveform. `t0` is the time of the first sample relative
/// to the trigger; with `pre_trigger` samples recorded, t0 = -pre_trigger * dt.
struct Trace {
    std::vector<double> samples;
    double dt = 0.0;
    double t0 = 0.0;

    std::size_t size() const noexcept { return samples.size(); }
    double duration() const noexcept { return static_cast<double>(samples.size()) * dt; }
    double time(std::size_t i) const noexcept { return t0 + static_cast<double>(i) * dt; }
};

enum class Channel : std::uint8_t { snspd = 0, sync = 1 };

inline std::string to_string(Channel c) { return c == Channel::snspd ? "snspd" : "sync"; }

/// An ensemble of traces sharing one sampling grid.
struct TraceSet {
    std::vector<Trace> traces;
    Channel channel = Channel::snspd;
    std::optional<double> mu_label;
    nlohmann::json meta = nlohmann::json::object();

    std::size_t size() const noexcept { return traces.size(); }
    bool empty() const noexcept { return traces.empty(); }
    std::size_t samples_per_trace() const noexcept { return traces.empty() ? 0 : traces.front().size(); }
    double dt() const noexcept { return traces.empty() ? 0.0 : traces.front().dt; }
    double t0() const noexcept { return traces.empty() ? 0.0 : traces.front().t0; }

    /// Copy of everything but the traces.
    TraceSet header_copy() const
    {
        TraceSet out;
        out.channel = channel;
        out.mu_label = mu_label;
        out.meta = meta;
        return out;
    }
};

inline void validate(const Trace& trace)
{
    require(trace.samples.size() > 1, Errc::invalid_argument, "trace needs more than one sample");
    require(std::isfinite(trace.dt) && trace.dt > 0.0, Errc::invalid_argument, "dt must be positive and finite");
    require(std::isfinite(trace.t0), Errc::invalid_argument, "t0 must be finite");
    for (double v : trace.samples) {
        require(std::isfinite(v), Errc::invalid_argument, "non-finite sample");
    }
}

inline void validate(const TraceSet& set)
{
    if (set.mu_label) {
        require(std::isfinite(*set.mu_label) && *set.mu_label >= 0.0, Errc::invalid_argument,
                "mu label must be >= 0");
    }
    if (set.empty()) {
        return;
    }
    const Trace& first = set.traces.front();
    for (const Trace& t : set.traces) {
        validate(t);
        require(t.size() == first.size() && t.dt == first.dt && t.t0 == first.t0, Errc::shape_mismatch,
                "traces in a set must share length, dt and t0");
    }
}

/// Acquisition constants carried in a set's metadata blob.
struct AcquisitionMeta {
    double sample_rate = 0.0;
    std::uint32_t pre_trigger_samples = 0;
    std::string source_id;
};

inline void store(TraceSet& set, const AcquisitionMeta& acq)
{
    set.meta["sample_rate"] = acq.sample_rate;
    set.meta["pre_trigger_samples"] = acq.pre_trigger_samples;
    set.meta["source_id"] = acq.source_id;
}

/// Reads the acquisition block from metadata, checking sample_rate against dt.
inline std::optional<AcquisitionMeta> acquisition(const TraceSet& set)
{
    if (!set.meta.is_object() || !set.meta.contains("sample_rate")) {
        return std::nullopt;
    }
    AcquisitionMeta acq;
    acq.sample_rate = set.meta.at("sample_rate").get<double>();
    acq.pre_trigger_samples = set.meta.value("pre_trigger_samples", 0u);
    acq.source_id = set.meta.value("source_id", std::string{});
    if (!set.empty()) {
        require(std::abs(acq.sample_rate * set.dt() - 1.0) <= 1e-9, Errc::invalid_argument,
                "sample_rate disagrees with dt");
    }
    return acq;
}

inline double dot(std::span<const double> a, std::span<const double> b)
{
    require(a.size() == b.size(), Errc::length_mismatch, "inner product of unequal lengths");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

/// Pointwise arithmetic mean of all traces in the set.
inline Trace mean_trace(const TraceSet& set)
{
    require(!set.empty(), Errc::empty_set, "mean of an empty set");
    const std::size_t n = set.samples_per_trace();
    Trace out{std::vector<double>(n, 0.0), set.dt(), set.t0()};
    for (const Trace& t : set.traces) {
        require(t.size() == n, Errc::shape_mismatch, "ragged trace set");
        for (std::size_t i = 0; i < n; ++i) {
            out.samples[i] += t.samples[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(set.size());
    for (double& v : out.samples) {
        v *= inv;
    }
    return out;
}

/// Time derivative: central differences inside, one-sided at the two ends.
inline Trace derivative(const Trace& trace)
{
    const std::size_t n = trace.size();
    require(n >= 3, Errc::invalid_argument, "derivative needs at least 3 samples");
    require(trace.dt > 0.0, Errc::invalid_argument, "dt must be positive");
    const auto& x = trace.samples;
    Trace out{std::vector<double>(n), trace.dt, trace.t0};
    const double inv = 1.0 / trace.dt;
    out.samples[0] = (x[1] - x[0]) * inv;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        out.samples[i] = (x[i + 1] - x[i - 1]) * (0.5 * inv);
    }
    out.samples[n - 1] = (x[n - 1] - x[n - 2]) * inv;
    return out;
}

} // namespace pnr
