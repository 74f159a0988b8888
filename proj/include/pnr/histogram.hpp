#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "pnr/error.hpp"

namespace pnr {

struct Histogram {
    std::vector<double> edges;
    std::vector<std::uint64_t> counts;

    std::size_t bins() const noexcept { return counts.size(); }
    double center(std::size_t i) const noexcept { return 0.5 * (edges[i] + edges[i + 1]); }
    double width(std::size_t i) const noexcept { return edges[i + 1] - edges[i]; }

    std::uint64_t total() const noexcept
    {
        std::uint64_t n = 0;
        for (auto c : counts) {
            n += c;
        }
        return n;
    }
};

inline void validate(const Histogram& h)
{
    require(h.edges.size() >= 2 && h.counts.size() + 1 == h.edges.size(), Errc::invalid_argument,
            "histogram needs edges.size() == counts.size() + 1");
    for (std::size_t i = 0; i + 1 < h.edges.size(); ++i) {
        require(h.edges[i] < h.edges[i + 1], Errc::invalid_argument, "histogram edges must increase");
    }
}

/// Linear-interpolated quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q)
{
    require(!sorted.empty(), Errc::empty_set, "quantile of nothing");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Freedman-Diaconis bin count, clamped to [1, max_bins].
inline std::size_t freedman_diaconis_bins(std::vector<double> samples, std::size_t max_bins = 4096)
{
    require(samples.size() >= 2, Errc::invalid_argument, "binning needs at least 2 samples");
    std::sort(samples.begin(), samples.end());
    const double range = samples.back() - samples.front();
    require(range > 0.0, Errc::degenerate, "all samples identical");
    const double iqr = quantile_sorted(samples, 0.75) - quantile_sorted(samples, 0.25);
    if (iqr <= 0.0) {
        return max_bins;
    }
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(samples.size()));
    const double bins = std::ceil(range / width);
    return static_cast<std::size_t>(std::clamp(bins, 1.0, static_cast<double>(max_bins)));
}

/// Uniform bins over [min, max] of the samples; the top edge is inclusive.
inline Histogram make_histogram(const std::vector<double>& samples, std::size_t bins)
{
    require(!samples.empty(), Errc::empty_set, "histogram of nothing");
    require(bins >= 1, Errc::invalid_argument, "histogram needs at least one bin");
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    require(hi > lo, Errc::degenerate, "all samples identical");
    Histogram h;
    h.edges.resize(bins + 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i <= bins; ++i) {
        h.edges[i] = lo + width * static_cast<double>(i);
    }
    h.edges.back() = hi;
    h.counts.assign(bins, 0);
    for (double v : samples) {
        auto idx = static_cast<std::size_t>((v - lo) / width);
        h.counts[std::min(idx, bins - 1)] += 1;
    }
    return h;
}

} // namespace pnr
