#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pnr/bundle_io.hpp"
#include "pnr/error.hpp"
#include "pnr/fitting.hpp"
#include "pnr/parallel.hpp"
#include "pnr/rng.hpp"

namespace pnr {

inline constexpr std::size_t default_grid_points = 4096;
inline constexpr std::size_t default_bootstrap_draws = 1000;

struct UniformGrid {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t points = default_grid_points;

    double step() const noexcept { return (hi - lo) / static_cast<double>(points - 1); }
    double at(std::size_t i) const noexcept { return lo + step() * static_cast<double>(i); }
    bool operator==(const UniformGrid&) const = default;
};

struct GridDensity {
    UniformGrid grid;
    std::vector<double> values;
};

inline double trapezoid(const UniformGrid& grid, const std::vector<double>& values)
{
    require(values.size() == grid.points && grid.points >= 2, Errc::grid_mismatch, "values do not match grid");
    double sum = 0.5 * (values.front() + values.back());
    for (std::size_t i = 1; i + 1 < values.size(); ++i) {
        sum += values[i];
    }
    return sum * grid.step();
}

template <class Fn>
GridDensity tabulate(const UniformGrid& grid, Fn&& fn)
{
    require(grid.points >= 2 && grid.hi > grid.lo, Errc::invalid_argument, "grid needs two points and hi > lo");
    GridDensity d{grid, std::vector<double>(grid.points)};
    for (std::size_t i = 0; i < grid.points; ++i) {
        d.values[i] = fn(grid.at(i));
    }
    return d;
}

/// Trapezoidal integral of sqrt(a * b), clamped to [0, 1].
inline double bhattacharyya(const GridDensity& a, const GridDensity& b)
{
    require(a.grid == b.grid, Errc::grid_mismatch, "densities live on different grids");
    for (const GridDensity* d : {&a, &b}) {
        for (double v : d->values) {
            require(v >= 0.0, Errc::invalid_argument, "density has negative values");
        }
        const double mass = trapezoid(d->grid, d->values);
        require(std::abs(mass - 1.0) <= 1e-3, Errc::unnormalized,
                "density integrates to " + std::to_string(mass) + " on the grid");
    }
    std::vector<double> root(a.values.size());
    for (std::size_t i = 0; i < root.size(); ++i) {
        root[i] = std::sqrt(a.values[i] * b.values[i]);
    }
    return std::clamp(trapezoid(a.grid, root), 0.0, 1.0);
}

inline void require_class(const MixtureFit& fit, int n)
{
    require(n >= 1 && n <= 3, Errc::missing_class, "class " + std::to_string(n) + " not in the mixture");
    require(fit.p[static_cast<std::size_t>(n - 1)] > 0.0, Errc::missing_class,
            "class " + std::to_string(n) + " has zero weight");
    if (n == 3) {
        require(fit.residual_grid.size() >= 2, Errc::missing_class, "no tabulated 3+ density");
    }
}

/// Grid covering +-8 widths of the parametric components and the residual table.
inline UniformGrid confidence_grid(const MixtureFit& fit, std::size_t points = default_grid_points)
{
    const double reach1 = 8.0 * fit.g1.s + 8.0 * std::abs(fit.g1.tau);
    double lo = std::min(fit.g1.m - reach1, fit.g2.mean - 8.0 * fit.g2.sigma);
    double hi = std::max(fit.g1.m + reach1, fit.g2.mean + 8.0 * fit.g2.sigma);
    if (!fit.residual_grid.empty()) {
        lo = std::min(lo, fit.residual_grid.front());
        hi = std::max(hi, fit.residual_grid.back());
    }
    return UniformGrid{lo, hi, points};
}

/// Shape density of class n on the grid. The interpolated 3+ table is
/// renormalized on the grid so resampling does not bias the overlap.
inline GridDensity class_density_on_grid(const MixtureFit& fit, int n, const UniformGrid& grid)
{
    require_class(fit, n);
    GridDensity d = tabulate(grid, [&](double t) { return class_density(fit, n, t); });
    if (n == 3) {
        const double mass = trapezoid(grid, d.values);
        require(mass > 0.0, Errc::missing_class, "3+ density is empty on the grid");
        for (double& v : d.values) {
            v /= mass;
        }
    }
    return d;
}

/// 1 - Bhattacharyya overlap of the two normalized class shapes; weights
/// only decide whether a class is present.
inline double confidence_pair(const MixtureFit& fit, int from_n, int to_n, std::size_t points = default_grid_points)
{
    require_class(fit, from_n);
    require_class(fit, to_n);
    const UniformGrid grid = confidence_grid(fit, points);
    return 1.0 - bhattacharyya(class_density_on_grid(fit, from_n, grid), class_density_on_grid(fit, to_n, grid));
}

inline Eigen::VectorXd mixture_parameters(const MixtureFit& fit)
{
    Eigen::VectorXd v(7);
    v << fit.g1.m, fit.g1.s, fit.g1.tau, fit.p[0], fit.p[1], fit.g2.mean, fit.g2.sigma;
    return v;
}

inline MixtureFit with_parameters(MixtureFit fit, const Eigen::VectorXd& v)
{
    fit.g1 = EmgParams{v(0), std::abs(v(1)), v(2)};
    fit.g2.mean = v(5);
    fit.g2.sigma = std::abs(v(6));
    return fit;
}

/// Parametric bootstrap: draws from N(theta, covariance), recomputes the pair
/// confidence per draw and returns the sample standard deviation.
inline double confidence_error(const MixtureFit& fit, int from_n, int to_n,
                               std::size_t n_draws = default_bootstrap_draws, std::uint64_t seed = 0,
                               std::vector<std::string>* warnings = nullptr,
                               std::size_t points = default_grid_points)
{
    require(n_draws >= 2, Errc::invalid_argument, "bootstrap needs at least 2 draws");
    require(fit.covariance.rows() == 7 && fit.covariance.cols() == 7, Errc::shape_mismatch,
            "mixture covariance must be 7x7");
    require(fit.covariance.allFinite(), Errc::invalid_argument, "covariance has non-finite entries");
    require_class(fit, from_n);
    require_class(fit, to_n);

    // Parameters mix seconds and probabilities, so decompose the covariance in
    // units of each parameter's own spread.
    const Eigen::MatrixXd sym = 0.5 * (fit.covariance + fit.covariance.transpose());
    Eigen::VectorXd scale = sym.diagonal().cwiseAbs().cwiseSqrt();
    for (Eigen::Index i = 0; i < scale.size(); ++i) {
        if (scale(i) == 0.0) {
            scale(i) = 1.0;
        }
    }
    const Eigen::VectorXd inv = scale.cwiseInverse();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inv.asDiagonal() * sym * inv.asDiagonal());
    Eigen::VectorXd lambda = eig.eigenvalues();
    const double top = std::max(lambda.cwiseAbs().maxCoeff(), 0.0);
    bool clipped = false;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (lambda(i) < 0.0) {
            clipped = clipped || lambda(i) < -1e-12 * top;
            lambda(i) = 0.0;
        }
    }
    if (clipped && warnings) {
        warnings->push_back("covariance not positive semidefinite; negative eigenvalues clipped to 0");
    }
    const Eigen::MatrixXd root = scale.asDiagonal() * eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
    const Eigen::VectorXd theta = mixture_parameters(fit);

    std::vector<double> draws(n_draws);
    parallel_for(n_draws, [&](std::size_t k) {
        Rng rng = stream(seed, k);
        std::normal_distribution<double> normal;
        Eigen::VectorXd z(7);
        for (Eigen::Index i = 0; i < 7; ++i) {
            z(i) = normal(rng);
        }
        draws[k] = confidence_pair(with_parameters(fit, theta + root * z), from_n, to_n, points);
    });
    // Shifted accumulation keeps identical draws at exactly zero spread.
    double sum = 0.0, sum2 = 0.0;
    for (double c : draws) {
        const double d = c - draws.front();
        sum += d;
        sum2 += d * d;
    }
    const double n = static_cast<double>(n_draws);
    return std::sqrt(std::max(0.0, (sum2 - sum * sum / n) / (n - 1.0)));
}

struct ConfidencePair {
    int from_n = 1;
    int to_n = 2;
    bool to_plus = false; ///< the upper class collects all higher numbers
    double confidence = 0.0;
    double std_error = 0.0;

    std::string label() const
    {
        return "C" + std::to_string(from_n) + "->" + std::to_string(to_n) + (to_plus ? "+" : "");
    }
};

struct ConfidenceReport {
    std::string system;
    std::vector<ConfidencePair> pairs;
    UniformGrid grid;
    std::size_t n_bootstrap = 0;
    std::vector<std::string> warnings;
};

/// Confidences C1->2 and C2->3+ of a mixture fit; a pair whose class has zero
/// weight is left out.
inline ConfidenceReport confidence_report(const MixtureFit& fit, std::string system,
                                          std::size_t n_draws = default_bootstrap_draws, std::uint64_t seed = 0,
                                          std::size_t points = default_grid_points)
{
    ConfidenceReport report;
    report.system = std::move(system);
    report.grid = confidence_grid(fit, points);
    report.n_bootstrap = n_draws;
    for (int n = 1; n <= 2; ++n) {
        if (fit.p[static_cast<std::size_t>(n - 1)] <= 0.0 || fit.p[static_cast<std::size_t>(n)] <= 0.0) {
            report.warnings.push_back("pair " + std::to_string(n) + "->" + std::to_string(n + 1) +
                                      " skipped: class has zero weight");
            continue;
        }
        ConfidencePair pair;
        pair.from_n = n;
        pair.to_n = n + 1;
        pair.to_plus = n + 1 == 3;
        pair.confidence = confidence_pair(fit, n, n + 1, points);
        pair.std_error = confidence_error(fit, n, n + 1, n_draws, derive_seed(seed, pair.label()), &report.warnings,
                                          points);
        report.pairs.push_back(pair);
    }
    return report;
}

struct ComparisonTable {
    std::vector<std::string> systems;
    std::vector<std::string> rows;
    /// cells[row][system]; empty when the system lacks that pair.
    std::vector<std::vector<std::optional<ConfidencePair>>> cells;
};

inline ComparisonTable compare_systems(const std::vector<ConfidenceReport>& reports)
{
    require(!reports.empty(), Errc::invalid_argument, "nothing to compare");
    std::map<std::pair<int, std::string>, std::size_t> order;
    for (const auto& r : reports) {
        for (const auto& p : r.pairs) {
            order.emplace(std::make_pair(p.from_n, p.label()), 0);
        }
    }
    ComparisonTable table;
    for (auto& [key, index] : order) {
        index = table.rows.size();
        table.rows.push_back(key.second);
    }
    table.cells.assign(table.rows.size(), std::vector<std::optional<ConfidencePair>>(reports.size()));
    for (std::size_t s = 0; s < reports.size(); ++s) {
        table.systems.push_back(reports[s].system);
        for (const auto& p : reports[s].pairs) {
            table.cells[order.at({p.from_n, p.label()})][s] = p;
        }
    }
    return table;
}

inline std::string render_table(const ComparisonTable& table)
{
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"metric"});
    for (const auto& s : table.systems) {
        grid.front().push_back(s);
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::vector<std::string> line{table.rows[r]};
        for (const auto& cell : table.cells[r]) {
            if (!cell) {
                line.emplace_back("-");
                continue;
            }
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.3f +- %.3f", cell->confidence, cell->std_error);
            line.emplace_back(buf);
        }
        grid.push_back(std::move(line));
    }
    std::vector<std::size_t> width(grid.front().size(), 0);
    for (const auto& line : grid) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            width[c] = std::max(width[c], line[c].size());
        }
    }
    std::ostringstream os;
    for (const auto& line : grid) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            os << line[c] << std::string(width[c] - line[c].size() + (c + 1 < line.size() ? 2 : 0), ' ');
        }
        os << '\n';
    }
    return os.str();
}

/// CSV with columns metric, <system>, <system>_err, ...; absent pairs are "-".
inline std::string render_csv(const ComparisonTable& table)
{
    std::ostringstream os;
    os << "metric";
    for (const auto& s : table.systems) {
        os << ',' << s << ',' << s << "_err";
    }
    os << '\n';
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        os << table.rows[r];
        for (const auto& cell : table.cells[r]) {
            if (cell) {
                os << ',' << detail::format_real(cell->confidence) << ',' << detail::format_real(cell->std_error);
            } else {
                os << ",-,-";
            }
        }
        os << '\n';
    }
    return os.str();
}

inline void to_json(nlohmann::json& j, const UniformGrid& g)
{
    j = {{"lo", g.lo}, {"hi", g.hi}, {"points", g.points}, {"step", g.step()}};
}

inline void from_json(const nlohmann::json& j, UniformGrid& g)
{
    g.lo = j.at("lo").get<double>();
    g.hi = j.at("hi").get<double>();
    g.points = j.at("points").get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const ConfidencePair& p)
{
    j = {{"from_n", p.from_n},
         {"to_n", p.to_n},
         {"to_plus", p.to_plus},
         {"label", p.label()},
         {"confidence", p.confidence},
         {"std_error", p.std_error}};
}

inline void from_json(const nlohmann::json& j, ConfidencePair& p)
{
    p.from_n = j.at("from_n").get<int>();
    p.to_n = j.at("to_n").get<int>();
    p.to_plus = j.value("to_plus", false);
    p.confidence = j.at("confidence").get<double>();
    p.std_error = j.at("std_error").get<double>();
}

inline void to_json(nlohmann::json& j, const ConfidenceReport& r)
{
    j = {{"system", r.system},
         {"pairs", r.pairs},
         {"grid", r.grid},
         {"n_bootstrap", r.n_bootstrap},
         {"warnings", r.warnings}};
}

inline void from_json(const nlohmann::json& j, ConfidenceReport& r)
{
    r.system = j.value("system", std::string{});
    r.pairs = j.at("pairs").get<std::vector<ConfidencePair>>();
    r.grid = j.at("grid").get<UniformGrid>();
    r.n_bootstrap = j.value("n_bootstrap", std::size_t{0});
    r.warnings = j.value("warnings", std::vector<std::string>{});
}

} // namespace pnr
