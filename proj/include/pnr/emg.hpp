#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "pnr/error.hpp"
#include "pnr/rng.hpp"

namespace pnr {

/// Scaled complementary error function exp(x^2) erfc(x).
inline double erfcx(double x)
{
    if (x < 0.0) {
        return 2.0 * std::exp(x * x) - erfcx(-x);
    }
    if (x < 8.0) {
        return std::exp(x * x) * std::erfc(x);
    }
    // Continued fraction, evaluated from the tail.
    double f = x;
    for (int k = 60; k >= 1; --k) {
        f = x + 0.5 * k / f;
    }
    return 1.0 / (std::sqrt(std::numbers::pi) * f);
}

inline double gaussian_pdf(double t, double mean, double sigma)
{
    const double z = (t - mean) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

/// Exponentially modified Gaussian: Gaussian(m, s) convolved with a one-sided
/// exponential of scale |tau| whose tail points along sign(tau).
struct EmgParams {
    double m = 0.0;
    double s = 1.0;
    double tau = 0.0;

    double mean() const noexcept { return m + tau; }
    double variance() const noexcept { return s * s + tau * tau; }
};

inline double emg_pdf(double t, const EmgParams& p)
{
    const double s = p.s;
    double tau = p.tau;
    if (std::abs(tau) < 1e-9 * s) {
        return gaussian_pdf(t, p.m, s);
    }
    double u = t - p.m;
    if (tau < 0.0) {
        u = -u;
        tau = -tau;
    }
    const double z = (s / tau - u / s) / std::numbers::sqrt2;
    if (z > 0.0) {
        return std::exp(-0.5 * (u / s) * (u / s)) * erfcx(z) / (2.0 * tau);
    }
    return std::exp(0.5 * (s / tau) * (s / tau) - u / tau) * std::erfc(z) / (2.0 * tau);
}

inline double sample_emg(const EmgParams& p, Rng& rng)
{
    double v = std::normal_distribution<double>(p.m, p.s)(rng);
    if (p.tau != 0.0) {
        const double e = std::exponential_distribution<double>(1.0 / std::abs(p.tau))(rng);
        v += p.tau > 0.0 ? e : -e;
    }
    return v;
}

/// Location of the density maximum (golden-section search).
inline double emg_mode(const EmgParams& p)
{
    double a = p.m - 3.0 * p.s - std::abs(p.tau);
    double b = p.m + 3.0 * p.s + std::abs(p.tau);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    for (int i = 0; i < 200 && (b - a) > 1e-12 * p.s; ++i) {
        if (emg_pdf(c, p) > emg_pdf(d, p)) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    return 0.5 * (a + b);
}

struct HalfMaximum {
    double left = 0.0;
    double right = 0.0;
    double width() const noexcept { return right - left; }
};

/// Half-maximum crossings on both sides of the mode.
inline HalfMaximum emg_half_maximum(const EmgParams& p)
{
    require(p.s > 0.0, Errc::invalid_argument, "EMG sigma must be positive");
    const double mode = emg_mode(p);
    const double half = 0.5 * emg_pdf(mode, p);
    auto crossing = [&](double direction) {
        double inner = mode;
        double step = p.s;
        double outer = mode + direction * step;
        while (emg_pdf(outer, p) > half) {
            inner = outer;
            step *= 2.0;
            outer = mode + direction * step;
        }
        for (int i = 0; i < 200 && std::abs(outer - inner) > 1e-13 * p.s; ++i) {
            const double mid = 0.5 * (inner + outer);
            (emg_pdf(mid, p) > half ? inner : outer) = mid;
        }
        return 0.5 * (inner + outer);
    };
    return {crossing(-1.0), crossing(1.0)};
}

inline double emg_fwhm(const EmgParams& p) { return emg_half_maximum(p).width(); }

} // namespace pnr
