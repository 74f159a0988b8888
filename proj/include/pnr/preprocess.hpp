#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pnr/error.hpp"
#include "pnr/fft.hpp"
#include "pnr/parallel.hpp"
#include "pnr/trace.hpp"

namespace pnr {

/// Half-open sample-index range [begin, end).
struct SampleWindow {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
};

/// `width` samples centered on the largest sample, shifted to stay inside the trace.
inline SampleWindow centered_window(const Trace& trace, std::size_t width = 7)
{
    require(width >= 3, Errc::invalid_argument, "window must span at least 3 samples");
    require(trace.size() >= width, Errc::invalid_argument, "window wider than trace");
    const auto peak = static_cast<std::size_t>(
        std::distance(trace.samples.begin(), std::max_element(trace.samples.begin(), trace.samples.end())));
    const std::size_t half = width / 2;
    std::size_t begin = peak > half ? peak - half : 0;
    begin = std::min(begin, trace.size() - width);
    return {begin, begin + width};
}

/// Vertex time of the least-squares parabola through the samples in `window`.
inline double parabola_peak(const Trace& trace, SampleWindow window)
{
    require(window.end > window.begin && window.size() >= 3, Errc::invalid_argument,
            "parabola window needs at least 3 samples");
    require(window.end <= trace.size(), Errc::invalid_argument, "parabola window exceeds trace");

    // Abscissa in samples relative to the window center keeps the system well conditioned.
    const std::size_t w = window.size();
    const double center = 0.5 * static_cast<double>(window.begin + window.end - 1);
    Eigen::MatrixXd design(w, 3);
    Eigen::VectorXd y(w);
    double scale = 0.0;
    for (std::size_t j = 0; j < w; ++j) {
        const double x = static_cast<double>(window.begin + j) - center;
        design(j, 0) = x * x;
        design(j, 1) = x;
        design(j, 2) = 1.0;
        y(j) = trace.samples[window.begin + j];
        scale = std::max(scale, std::abs(y(j)));
    }
    const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(y);
    const double a = coef(0);
    const double b = coef(1);
    if (!(a < 0.0) || std::abs(a) <= 1e-12 * std::max(scale, 1e-300)) {
        fail(Errc::degenerate, "parabola has no maximum (curvature " + std::to_string(a) + ")");
    }
    const double vertex = -b / (2.0 * a);
    const double half_span = 0.5 * static_cast<double>(w - 1);
    require(std::abs(vertex) <= half_span, Errc::out_of_range, "parabola vertex outside fit window");
    return trace.t0 + (center + vertex) * trace.dt;
}

/// Circular sub-sample delay by `shift` seconds via the Fourier shift theorem.
/// Positive shift moves features later in time.
inline Trace fourier_shift(const Trace& trace, double shift)
{
    const std::size_t n = trace.size();
    require(n >= 2, Errc::invalid_argument, "trace too short to shift");
    require(std::abs(shift) < trace.duration(), Errc::invalid_argument, "shift exceeds trace duration");
    const auto fft = RealFft::get(n);
    auto spectrum = fft->forward(trace.samples);
    const double cycles = shift / (static_cast<double>(n) * trace.dt);
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) * cycles;
        if (n % 2 == 0 && k == n / 2) {
            spectrum[k] *= std::cos(phase);
        } else {
            spectrum[k] *= std::polar(1.0, phase);
        }
    }
    return Trace{fft->inverse(spectrum), trace.dt, trace.t0};
}

/// Whether `count` samples at each end stay within `fraction` of the trace's
/// peak-to-peak range, which keeps circular shifting free of wrap-around.
inline bool has_quiet_edges(const Trace& trace, std::size_t count = 20, double fraction = 0.05)
{
    if (trace.size() < 2 * count) {
        return false;
    }
    const auto [lo, hi] = std::minmax_element(trace.samples.begin(), trace.samples.end());
    const double range = *hi - *lo;
    if (range == 0.0) {
        return true;
    }
    double emin = trace.samples.front();
    double emax = emin;
    for (std::size_t i = 0; i < count; ++i) {
        for (double v : {trace.samples[i], trace.samples[trace.size() - 1 - i]}) {
            emin = std::min(emin, v);
            emax = std::max(emax, v);
        }
    }
    return emax - emin <= fraction * range;
}

struct AlignmentResult {
    TraceSet aligned;
    std::vector<double> shifts;
    std::vector<std::string> warnings;
};

/// Parabola peak time of every sync trace, each fitted in a window of `width`
/// samples centered on its maximum.
inline std::vector<double> sync_peak_times(const TraceSet& sync, std::size_t width = 7)
{
    std::vector<double> peaks(sync.size());
    parallel_for(sync.size(), [&](std::size_t i) {
        try {
            peaks[i] = parabola_peak(sync.traces[i], centered_window(sync.traces[i], width));
        } catch (const Error& e) {
            throw Error(e.code(), "trace " + std::to_string(i) + ": " + e.what());
        }
    });
    return peaks;
}

inline double median(std::vector<double> values)
{
    require(!values.empty(), Errc::empty_set, "median of nothing");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

/// Shifts every target trace by -shifts[i].
inline TraceSet apply_alignment(const TraceSet& target, const std::vector<double>& shifts)
{
    require(target.size() == shifts.size(), Errc::length_mismatch, "one shift per trace required");
    TraceSet out = target.header_copy();
    out.traces.resize(target.size());
    parallel_for(target.size(), [&](std::size_t i) { out.traces[i] = fourier_shift(target.traces[i], -shifts[i]); });
    return out;
}

/// Digitizer-jitter correction: each target trace is moved so that its sync
/// peak lands on the median sync peak time.
inline AlignmentResult align_dataset(const TraceSet& sync, const TraceSet& target, std::size_t width = 7)
{
    require(sync.size() == target.size(), Errc::length_mismatch, "sync and target trace counts differ");
    require(sync.empty() || sync.dt() == target.dt(), Errc::invalid_argument, "sync and target dt differ");
    AlignmentResult result;
    if (sync.empty()) {
        result.aligned = target.header_copy();
        return result;
    }
    result.shifts = sync_peak_times(sync, width);
    const double reference = median(result.shifts);
    for (double& s : result.shifts) {
        s -= reference;
    }
    result.aligned = apply_alignment(target, result.shifts);
    result.aligned.meta["aligned"] = true;

    std::size_t noisy = 0;
    for (const Trace& t : target.traces) {
        noisy += has_quiet_edges(t) ? 0 : 1;
    }
    if (noisy) {
        result.warnings.push_back(std::to_string(noisy) +
                                  " target traces lack 20 near-baseline samples at both ends; "
                                  "circular shift may wrap pulse energy");
    }
    return result;
}

/// Single-pole high-pass at f_lo cascaded with a single-pole low-pass at f_hi,
/// each discretized by the bilinear transform prewarped to its own cutoff.
inline Trace bandpass_first_order(const Trace& trace, double f_lo, double f_hi)
{
    validate(trace);
    const double nyquist = 0.5 / trace.dt;
    require(f_lo > 0.0 && f_lo < f_hi && f_hi < nyquist, Errc::out_of_range,
            "cutoffs must satisfy 0 < f_lo < f_hi < Nyquist");
    const double k_lo = std::tan(std::numbers::pi * f_lo * trace.dt);
    const double k_hi = std::tan(std::numbers::pi * f_hi * trace.dt);

    // y[n] = b0 x[n] + b1 x[n-1] - a1 y[n-1]
    const double hp_b0 = 1.0 / (1.0 + k_lo);
    const double hp_b1 = -hp_b0;
    const double hp_a1 = (k_lo - 1.0) / (k_lo + 1.0);
    const double lp_b0 = k_hi / (1.0 + k_hi);
    const double lp_b1 = lp_b0;
    const double lp_a1 = (k_hi - 1.0) / (k_hi + 1.0);

    Trace out{std::vector<double>(trace.size()), trace.dt, trace.t0};
    double hp_x1 = 0.0, hp_y1 = 0.0, lp_x1 = 0.0, lp_y1 = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double x = trace.samples[i];
        const double hp = hp_b0 * x + hp_b1 * hp_x1 - hp_a1 * hp_y1;
        hp_x1 = x;
        hp_y1 = hp;
        const double lp = lp_b0 * hp + lp_b1 * lp_x1 - lp_a1 * lp_y1;
        lp_x1 = hp;
        lp_y1 = lp;
        out.samples[i] = lp;
    }
    return out;
}

/// Keeps samples 0, k, 2k, ...; no anti-alias filtering.
inline Trace decimate(const Trace& trace, std::size_t k)
{
    require(k >= 1, Errc::invalid_argument, "decimation factor must be >= 1");
    require(trace.size() >= k, Errc::invalid_argument, "trace shorter than decimation factor");
    Trace out{{}, trace.dt * static_cast<double>(k), trace.t0};
    out.samples.reserve((trace.size() + k - 1) / k);
    for (std::size_t i = 0; i < trace.size(); i += k) {
        out.samples.push_back(trace.samples[i]);
    }
    require(out.size() > 1, Errc::invalid_argument, "decimation leaves fewer than 2 samples");
    return out;
}

inline TraceSet bandpass_set(const TraceSet& set, double f_lo, double f_hi)
{
    TraceSet out = set.header_copy();
    out.traces.resize(set.size());
    parallel_for(set.size(), [&](std::size_t i) { out.traces[i] = bandpass_first_order(set.traces[i], f_lo, f_hi); });
    out.meta["bandpass_hz"] = {f_lo, f_hi};
    return out;
}

inline TraceSet decimate_set(const TraceSet& set, std::size_t k)
{
    TraceSet out = set.header_copy();
    out.traces.resize(set.size());
    parallel_for(set.size(), [&](std::size_t i) { out.traces[i] = decimate(set.traces[i], k); });
    if (!out.empty() && out.meta.contains("sample_rate")) {
        out.meta["sample_rate"] = 1.0 / out.dt();
        out.meta["pre_trigger_samples"] = static_cast<std::uint32_t>(std::max(0.0, std::round(-out.t0() / out.dt())));
    }
    out.meta["decimation"] = k;
    return out;
}

} // namespace pnr
