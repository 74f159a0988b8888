#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pnr/emg.hpp"
#include "pnr/error.hpp"
#include "pnr/histogram.hpp"
#include "pnr/least_squares.hpp"

namespace pnr {

struct GaussianComponent {
    double weight = 0.0;
    double mean = 0.0;
    double sigma = 1.0;
};

/// EMG single-photon peak plus a Gaussian catching the few counts outside it.
/// Covariance order: g1.m, g1.s, g1.tau, w (EMG weight), bg.mean, bg.sigma.
struct SinglePhotonFit {
    EmgParams g1;
    GaussianComponent bg;
    Eigen::MatrixXd covariance;
    double reduced_chi2 = 0.0;
};

inline constexpr std::array<const char*, 7> mixture_parameter_names = {"g1.m",  "g1.s",    "g1.tau",  "p1",
                                                                       "p2",    "g2.mean", "g2.sigma"};

/// Photon-number mixture: P1 * EMG + P2 * Gaussian + P3+ * tabulated residual.
/// Covariance is over mixture_parameter_names.
struct MixtureFit {
    EmgParams g1;
    GaussianComponent bg;
    GaussianComponent g2;
    std::array<double, 3> p{0.0, 0.0, 0.0};
    std::vector<double> residual_grid;
    std::vector<double> residual_density;
    Eigen::MatrixXd covariance = Eigen::MatrixXd::Zero(7, 7);
    double mu_label = std::numeric_limits<double>::quiet_NaN();
    double reduced_chi2 = 0.0;
    std::vector<std::string> warnings;
};

/// Zero-truncated Poisson probability of n >= 1 detected photons.
inline double ztp_pmf(int n, double mu)
{
    require(n >= 1, Errc::invalid_argument, "zero-truncated Poisson needs n >= 1");
    require(mu > 0.0 && std::isfinite(mu), Errc::invalid_argument, "zero-truncated Poisson needs mu > 0");
    return std::exp(n * std::log(mu) - std::lgamma(n + 1.0)) / std::expm1(mu);
}

/// P(n >= k) among detections.
inline double ztp_tail(int k, double mu)
{
    double head = 0.0;
    for (int n = 1; n < k; ++n) {
        head += ztp_pmf(n, mu);
    }
    return 1.0 - head;
}

namespace detail {

struct HistogramStats {
    double median = 0.0;
    double iqr = 0.0;
    double mean = 0.0;
    double skew = 0.0;
};

inline double histogram_quantile(const Histogram& h, double q)
{
    const double target = q * static_cast<double>(h.total());
    double running = 0.0;
    for (std::size_t i = 0; i < h.bins(); ++i) {
        const double next = running + static_cast<double>(h.counts[i]);
        if (next >= target && h.counts[i] > 0) {
            const double frac = (target - running) / static_cast<double>(h.counts[i]);
            return h.edges[i] + frac * h.width(i);
        }
        running = next;
    }
    return h.edges.back();
}

inline HistogramStats histogram_stats(const Histogram& h)
{
    HistogramStats s;
    s.median = histogram_quantile(h, 0.5);
    s.iqr = histogram_quantile(h, 0.75) - histogram_quantile(h, 0.25);
    const double n = static_cast<double>(h.total());
    double m1 = 0.0;
    for (std::size_t i = 0; i < h.bins(); ++i) {
        m1 += static_cast<double>(h.counts[i]) * h.center(i);
    }
    m1 /= n;
    double m2 = 0.0, m3 = 0.0;
    for (std::size_t i = 0; i < h.bins(); ++i) {
        const double d = h.center(i) - m1;
        m2 += static_cast<double>(h.counts[i]) * d * d;
        m3 += static_cast<double>(h.counts[i]) * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    s.mean = m1;
    s.skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    return s;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double poisson_weight(double count) { return 1.0 / std::max(count, 1.0); }

} // namespace detail

/// Weighted least-squares fit of N * (w * EMG + (1 - w) * Gaussian) to the
/// bin counts, weights 1 / max(count, 1).
inline SinglePhotonFit fit_single_photon(const Histogram& hist)
{
    validate(hist);
    const double total = static_cast<double>(hist.total());
    require(total >= 1000.0, Errc::invalid_argument, "single-photon fit needs at least 1000 counts");
    std::size_t occupied = 0;
    for (auto c : hist.counts) {
        occupied += c > 0 ? 1 : 0;
    }
    require(occupied >= 6, Errc::rank_deficient, "too few occupied bins to fit six parameters");

    const auto stats = detail::histogram_stats(hist);
    // Work in a frame centered on the median with unit robust width.
    const double origin = stats.median;
    const double scale = stats.iqr > 0.0 ? stats.iqr / 1.349 : hist.width(0);
    const std::size_t m = hist.bins();
    std::vector<double> x(m), y(m), sw(m);
    for (std::size_t i = 0; i < m; ++i) {
        x[i] = (hist.center(i) - origin) / scale;
        y[i] = static_cast<double>(hist.counts[i]);
        sw[i] = std::sqrt(detail::poisson_weight(y[i]));
    }
    const double bin = hist.width(0) / scale;

    const double tau0 = (stats.skew >= 0.0 ? 0.5 : -0.5);
    Eigen::VectorXd p0(6);
    p0 << -0.7 * tau0, std::log(0.9), tau0, 4.0, (stats.mean - origin) / scale, std::log(4.0);

    const ResidualFn residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        const EmgParams g{p(0), std::exp(p(1)), p(2)};
        const double w = detail::logistic(p(3));
        const double bg_sigma = std::exp(p(5));
        for (std::size_t i = 0; i < m; ++i) {
            const double model =
                total * bin * (w * emg_pdf(x[i], g) + (1.0 - w) * gaussian_pdf(x[i], p(4), bg_sigma));
            r(static_cast<Eigen::Index>(i)) = (y[i] - model) * sw[i];
        }
    };
    const LsqResult fit = minimize_lm(residuals, p0, static_cast<int>(m));
    const Eigen::MatrixXd cov_internal = covariance_from_jacobian(fit.jacobian, 3);

    const Eigen::VectorXd& p = fit.x;
    SinglePhotonFit out;
    out.g1 = EmgParams{origin + scale * p(0), scale * std::exp(p(1)), scale * p(2)};
    const double w = detail::logistic(p(3));
    out.bg = GaussianComponent{1.0 - w, origin + scale * p(4), scale * std::exp(p(5))};
    Eigen::VectorXd jac(6);
    jac << scale, out.g1.s, scale, w * (1.0 - w), scale, out.bg.sigma;
    out.covariance = jac.asDiagonal() * cov_internal * jac.asDiagonal();
    out.reduced_chi2 = fit.chi2 / static_cast<double>(std::max<std::size_t>(m - 6, 1));
    return out;
}

inline Histogram histogram_for_fit(const std::vector<double>& samples, std::size_t bins)
{
    return make_histogram(samples, bins ? bins : freedman_diaconis_bins(samples));
}

/// Staged mixture fit with the single-photon shape held fixed:
///  1. amplitude P1 of g1, fitted on the side of the peak facing away from
///     the higher photon numbers (plus the mode region);
///  2. P1 * g1 subtracted;
///  3. Gaussian fitted to the dominant remaining peak -> P2, g2;
///  4. the clipped, normalized remainder is the 3+ density, P3+ = 1 - P1 - P2.
inline MixtureFit fit_mixture(const std::vector<double>& samples, const EmgParams& g1,
                              const Eigen::Matrix3d& g1_covariance, std::size_t bins = 0)
{
    require(samples.size() >= 5000, Errc::invalid_argument, "mixture fit needs at least 5000 samples");
    require(g1.s > 0.0, Errc::invalid_argument, "g1 sigma must be positive");
    const Histogram hist = histogram_for_fit(samples, bins);
    const double total = static_cast<double>(samples.size());
    const std::size_t m = hist.bins();
    const double bw = hist.width(0);

    MixtureFit out;
    out.g1 = g1;

    std::vector<double> y(m), c(m), shape(m);
    for (std::size_t i = 0; i < m; ++i) {
        y[i] = static_cast<double>(hist.counts[i]);
        c[i] = hist.center(i);
        shape[i] = bw * emg_pdf(c[i], g1);
    }

    // Stage 1. Higher photon numbers sit on the side the sample median moved to.
    const double mode = emg_mode(g1);
    const HalfMaximum hm = emg_half_maximum(g1);
    std::vector<double> sorted(samples);
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double direction = sorted[sorted.size() / 2] < mode ? -1.0 : 1.0;
    const double near_half_width = direction < 0.0 ? mode - hm.left : hm.right - mode;
    const double peak_density = emg_pdf(mode, g1);
    double sum_wyg = 0.0, sum_wgg = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const bool window = (c[i] - mode) * direction <= 0.5 * near_half_width &&
                            shape[i] >= 1e-3 * bw * peak_density;
        if (!window) {
            continue;
        }
        const double w = detail::poisson_weight(y[i]);
        sum_wyg += w * y[i] * shape[i];
        sum_wgg += w * shape[i] * shape[i];
    }
    require(sum_wgg > 0.0, Errc::degenerate, "single-photon shape does not overlap the histogram");
    const double a1 = sum_wyg / sum_wgg;
    double p1 = a1 / total;
    const double p1_var = 1.0 / sum_wgg / (total * total);

    // Stage 2.
    std::vector<double> residual(m);
    for (std::size_t i = 0; i < m; ++i) {
        residual[i] = y[i] - a1 * shape[i];
    }

    // Stage 3. Locate the dominant remaining peak on a lightly smoothed residual.
    std::vector<double> smooth(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        int cnt = 0;
        for (std::size_t j = (i >= 2 ? i - 2 : 0); j <= std::min(m - 1, i + 2); ++j) {
            acc += residual[j];
            ++cnt;
        }
        smooth[i] = acc / cnt;
    }
    const auto peak_it = std::max_element(smooth.begin(), smooth.end());
    const std::size_t peak = static_cast<std::size_t>(std::distance(smooth.begin(), peak_it));
    const double peak_height = *peak_it;
    require(peak_height > 0.0, Errc::degenerate, "no positive residual after removing the single-photon peak");
    std::size_t lo = peak, hi = peak;
    while (lo > 0 && smooth[lo] > 0.5 * peak_height) {
        --lo;
    }
    while (hi + 1 < m && smooth[hi] > 0.5 * peak_height) {
        ++hi;
    }
    const double sigma0 = std::max((c[hi] - c[lo]) / 2.3548, 2.0 * bw);
    // Narrow on the higher-photon side, where the next peak overlaps.
    const double reach_up = 1.0 * sigma0;
    const double reach_down = 1.5 * sigma0;
    std::vector<std::size_t> window;
    for (std::size_t i = 0; i < m; ++i) {
        const double d = (c[i] - c[peak]) * direction;
        if (d <= reach_up && -d <= reach_down) {
            window.push_back(i);
        }
    }
    require(window.size() >= 4, Errc::rank_deficient, "too few bins under the two-photon peak");

    const double origin = c[peak];
    const double scale = sigma0;
    Eigen::VectorXd q0(3);
    q0 << peak_height * sigma0 * std::sqrt(2.0 * std::numbers::pi) / bw / total, 0.0, 0.0;
    const ResidualFn stage3 = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
        const double sigma = scale * std::exp(q(2));
        const double mean = origin + scale * q(1);
        for (std::size_t k = 0; k < window.size(); ++k) {
            const std::size_t i = window[k];
            const double model = q(0) * total * bw * gaussian_pdf(c[i], mean, sigma);
            r(static_cast<Eigen::Index>(k)) = (residual[i] - model) * std::sqrt(detail::poisson_weight(y[i]));
        }
    };
    const LsqResult g2fit = minimize_lm(stage3, q0, static_cast<int>(window.size()));
    const Eigen::MatrixXd g2cov_internal = covariance_from_jacobian(g2fit.jacobian, 3);
    double p2 = g2fit.x(0);
    out.g2 = GaussianComponent{p2, origin + scale * g2fit.x(1), scale * std::exp(g2fit.x(2))};
    out.reduced_chi2 = g2fit.chi2 / static_cast<double>(std::max<std::size_t>(window.size() - 3, 1));

    if (p1 < 0.0) {
        out.warnings.push_back("negative P1 clamped to 0");
        p1 = 0.0;
    }
    if (p2 < 0.0) {
        out.warnings.push_back("negative P2 clamped to 0");
        p2 = 0.0;
    }
    if (p1 + p2 > 1.0) {
        out.warnings.push_back("P1 + P2 exceeded 1; rescaled, P3+ = 0");
        const double s = p1 + p2;
        p1 /= s;
        p2 /= s;
    }
    out.g2.weight = p2;
    out.p = {p1, p2, std::max(0.0, 1.0 - p1 - p2)};

    // Stage 4.
    out.residual_grid = c;
    out.residual_density.assign(m, 0.0);
    double mass = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double r = y[i] - p1 * total * shape[i] - p2 * total * bw * gaussian_pdf(c[i], out.g2.mean, out.g2.sigma);
        out.residual_density[i] = std::max(0.0, r);
        mass += out.residual_density[i];
    }
    if (mass > 0.0) {
        for (double& v : out.residual_density) {
            v /= mass * bw;
        }
    } else {
        out.warnings.push_back("no positive residual left for the 3+ density");
    }

    out.covariance = Eigen::MatrixXd::Zero(7, 7);
    out.covariance.topLeftCorner(3, 3) = g1_covariance;
    out.covariance(3, 3) = p1_var;
    Eigen::Vector3d jac(1.0, scale, out.g2.sigma);
    out.covariance.bottomRightCorner(3, 3) = jac.asDiagonal() * g2cov_internal * jac.asDiagonal();
    return out;
}

inline MixtureFit fit_mixture(const std::vector<double>& samples, const SinglePhotonFit& single, std::size_t bins = 0)
{
    MixtureFit fit = fit_mixture(samples, single.g1, single.covariance.topLeftCorner(3, 3), bins);
    fit.bg = single.bg;
    return fit;
}

inline MixtureFit fit_mixture(const std::vector<double>& samples, const EmgParams& g1, std::size_t bins = 0)
{
    return fit_mixture(samples, g1, Eigen::Matrix3d::Zero(), bins);
}

/// Linear interpolation of the tabulated 3+ density; 0 outside its grid.
inline double residual_density_at(const MixtureFit& fit, double t)
{
    const auto& g = fit.residual_grid;
    if (g.size() < 2 || t < g.front() || t > g.back()) {
        return 0.0;
    }
    const auto it = std::upper_bound(g.begin(), g.end(), t);
    const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(std::distance(g.begin(), it)), g.size() - 1);
    const std::size_t lo = hi - 1;
    const double frac = (t - g[lo]) / (g[hi] - g[lo]);
    return fit.residual_density[lo] + frac * (fit.residual_density[hi] - fit.residual_density[lo]);
}

/// Normalized shape density of class 1, 2 or 3 (= 3+).
inline double class_density(const MixtureFit& fit, int photon_class, double t)
{
    switch (photon_class) {
    case 1: return emg_pdf(t, fit.g1);
    case 2: return gaussian_pdf(t, fit.g2.mean, fit.g2.sigma);
    case 3: return residual_density_at(fit, t);
    default: fail(Errc::missing_class, "class " + std::to_string(photon_class) + " not in the mixture");
    }
}

/// Maximum a posteriori class; ties go to the lower photon number.
inline int classify(double dt, const MixtureFit& fit)
{
    int best = 1;
    double best_score = fit.p[0] * class_density(fit, 1, dt);
    for (int n = 2; n <= 3; ++n) {
        const double score = fit.p[static_cast<std::size_t>(n - 1)] * class_density(fit, n, dt);
        if (score > best_score) {
            best = n;
            best_score = score;
        }
    }
    return best;
}

// JSON

inline void to_json(nlohmann::json& j, const EmgParams& p) { j = {{"m", p.m}, {"s", p.s}, {"tau", p.tau}}; }

inline void from_json(const nlohmann::json& j, EmgParams& p)
{
    p.m = j.at("m").get<double>();
    p.s = j.at("s").get<double>();
    p.tau = j.at("tau").get<double>();
}

inline void to_json(nlohmann::json& j, const GaussianComponent& g)
{
    j = {{"weight", g.weight}, {"mean", g.mean}, {"sigma", g.sigma}};
}

inline void from_json(const nlohmann::json& j, GaussianComponent& g)
{
    g.weight = j.at("weight").get<double>();
    g.mean = j.at("mean").get<double>();
    g.sigma = j.at("sigma").get<double>();
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m)
{
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(row);
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j)
{
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
        }
    }
    return m;
}

inline void to_json(nlohmann::json& j, const SinglePhotonFit& f)
{
    j = {{"kind", "single_photon"},
         {"g1", f.g1},
         {"bg", f.bg},
         {"fwhm", emg_fwhm(f.g1)},
         {"covariance_parameters", {"g1.m", "g1.s", "g1.tau", "w", "bg.mean", "bg.sigma"}},
         {"covariance", matrix_to_json(f.covariance)},
         {"reduced_chi2", f.reduced_chi2}};
}

inline void from_json(const nlohmann::json& j, SinglePhotonFit& f)
{
    f.g1 = j.at("g1").get<EmgParams>();
    f.bg = j.at("bg").get<GaussianComponent>();
    f.covariance = matrix_from_json(j.at("covariance"));
    f.reduced_chi2 = j.value("reduced_chi2", 0.0);
}

inline void to_json(nlohmann::json& j, const MixtureFit& f)
{
    j = {{"kind", "mixture"},
         {"g1", f.g1},
         {"bg", f.bg},
         {"g2", f.g2},
         {"p", f.p},
         {"residual", {{"grid", f.residual_grid}, {"density", f.residual_density}}},
         {"covariance_parameters", mixture_parameter_names},
         {"covariance", matrix_to_json(f.covariance)},
         {"reduced_chi2", f.reduced_chi2},
         {"warnings", f.warnings}};
    if (std::isfinite(f.mu_label)) {
        j["mu_label"] = f.mu_label;
    } else {
        j["mu_label"] = nullptr;
    }
}

inline void from_json(const nlohmann::json& j, MixtureFit& f)
{
    f.g1 = j.at("g1").get<EmgParams>();
    f.bg = j.at("bg").get<GaussianComponent>();
    f.g2 = j.at("g2").get<GaussianComponent>();
    f.p = j.at("p").get<std::array<double, 3>>();
    f.residual_grid = j.at("residual").at("grid").get<std::vector<double>>();
    f.residual_density = j.at("residual").at("density").get<std::vector<double>>();
    f.covariance = matrix_from_json(j.at("covariance"));
    f.reduced_chi2 = j.value("reduced_chi2", 0.0);
    f.warnings = j.value("warnings", std::vector<std::string>{});
    const auto& mu = j.at("mu_label");
    f.mu_label = mu.is_null() ? std::numeric_limits<double>::quiet_NaN() : mu.get<double>();
}

} // namespace pnr
