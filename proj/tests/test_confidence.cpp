#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "desk.hpp"
#include "pnr/confidence.hpp"
#include "test_util.hpp"

using namespace pnr;

namespace {

constexpr double ps = 1e-12;

GridDensity gaussian_on(const UniformGrid& grid, double mean, double sigma)
{
    return tabulate(grid, [&](double t) { return gaussian_pdf(t, mean, sigma); });
}

MixtureFit toy_fit()
{
    MixtureFit fit;
    fit.g1 = EmgParams{0.0, 17 * ps, 8.5 * ps};
    fit.g2 = GaussianComponent{0.3, -70 * ps, 24 * ps};
    fit.p = {0.4, 0.3, 0.3};
    for (int i = 0; i <= 100; ++i) {
        const double t = -300 * ps + 3 * ps * i;
        fit.residual_grid.push_back(t);
        fit.residual_density.push_back(gaussian_pdf(t, -150 * ps, 40 * ps));
    }
    fit.covariance = Eigen::MatrixXd::Zero(7, 7);
    const double sd[7] = {1 * ps, 0.8 * ps, 1 * ps, 0.01, 0.01, 2 * ps, 1.5 * ps};
    for (int i = 0; i < 7; ++i) {
        fit.covariance(i, i) = sd[i] * sd[i];
    }
    fit.covariance(0, 2) = fit.covariance(2, 0) = -0.5 * sd[0] * sd[2];
    return fit;
}

MixtureFit desk_fit(const SynthConfig& cfg, std::size_t count)
{
    const auto d = pnr::testing::desk_projection(cfg, 20'000, count, 500);
    return fit_mixture(d.target, fit_single_photon(histogram_for_fit(d.reference, 0)));
}

const MixtureFit& default_desk_fit()
{
    static const MixtureFit fit = desk_fit(SynthConfig{}, 40'000);
    return fit;
}

double naive_emg(double u, double s, double tau)
{
    return std::exp(0.5 * s * s / (tau * tau) - u / tau) * std::erfc((s / tau - u / s) / std::sqrt(2.0)) / (2.0 * tau);
}

} // namespace

TEST(Bhattacharyya, IdenticalDensities)
{
    const UniformGrid grid{-10.0, 10.0, 4096};
    const GridDensity a = gaussian_on(grid, 0.3, 1.1);
    EXPECT_NEAR(bhattacharyya(a, a), 1.0, 1e-6);
}

TEST(Bhattacharyya, DisjointSupports)
{
    const UniformGrid grid{0.0, 4.0, 401};
    auto box = [&](double lo, double hi) {
        return tabulate(grid, [=](double t) { return t >= lo && t <= hi ? 1.0 / (hi - lo) : 0.0; });
    };
    // Boxes sampled at grid points; the trapezoid mass is within 1e-3 only if the
    // edges land on grid points, so use widths that are whole multiples of the step.
    GridDensity a = box(0.0, 1.0), b = box(2.0, 3.0);
    const double ma = trapezoid(grid, a.values), mb = trapezoid(grid, b.values);
    for (double& v : a.values) v /= ma;
    for (double& v : b.values) v /= mb;
    EXPECT_EQ(bhattacharyya(a, b), 0.0);
}

TEST(Bhattacharyya, EqualWidthGaussiansTwoSigmaApart)
{
    const UniformGrid grid{-12.0, 14.0, 4096};
    const double value = bhattacharyya(gaussian_on(grid, 0.0, 1.0), gaussian_on(grid, 2.0, 1.0));
    EXPECT_NEAR(value, std::exp(-0.5), 1e-4);
    EXPECT_NEAR(value, 0.60653, 1e-4);
    for (double delta : {0.5, 1.0, 3.0}) {
        EXPECT_NEAR(bhattacharyya(gaussian_on(grid, 0.0, 1.0), gaussian_on(grid, delta, 1.0)),
                    std::exp(-delta * delta / 8.0), 1e-6);
    }
}

TEST(Bhattacharyya, Errors)
{
    const GridDensity a = gaussian_on(UniformGrid{-10.0, 10.0, 1000}, 0.0, 1.0);
    const GridDensity b = gaussian_on(UniformGrid{-10.0, 10.0, 1001}, 0.0, 1.0);
    EXPECT_PNR_ERROR(bhattacharyya(a, b), Errc::grid_mismatch);
    GridDensity half = a;
    for (double& v : half.values) v *= 0.5;
    EXPECT_PNR_ERROR(bhattacharyya(a, half), Errc::unnormalized);
    GridDensity negative = a;
    negative.values[10] = -1e-9;
    EXPECT_PNR_ERROR(bhattacharyya(negative, a), Errc::invalid_argument);
}

TEST(ConfidencePair, SameShapeGivesZero)
{
    const MixtureFit fit = toy_fit();
    for (int n = 1; n <= 3; ++n) {
        EXPECT_NEAR(confidence_pair(fit, n, n), 0.0, 1e-6);
    }
    // Gaussian g2 that coincides with a nearly unskewed g1.
    MixtureFit same = fit;
    same.g1 = EmgParams{0.0, 20 * ps, 1e-6 * ps};
    same.g2 = GaussianComponent{0.3, 0.0, 20 * ps};
    EXPECT_NEAR(confidence_pair(same, 1, 2), 0.0, 1e-6);
}

TEST(ConfidencePair, BoundedAndSymmetric)
{
    const MixtureFit fit = toy_fit();
    for (auto [a, b] : {std::pair{1, 2}, std::pair{2, 3}, std::pair{1, 3}}) {
        const double ab = confidence_pair(fit, a, b);
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0);
        EXPECT_NEAR(ab, confidence_pair(fit, b, a), 1e-14);
    }
}

TEST(ConfidencePair, WeightsDoNotEnter)
{
    MixtureFit fit = toy_fit();
    const double before = confidence_pair(fit, 1, 2);
    fit.p = {0.9, 0.05, 0.05};
    EXPECT_EQ(confidence_pair(fit, 1, 2), before);
}

TEST(ConfidencePair, TranslationAndRescalingInvariance)
{
    const MixtureFit fit = toy_fit();
    const double c12 = confidence_pair(fit, 1, 2);
    const double c23 = confidence_pair(fit, 2, 3);

    MixtureFit moved = fit;
    const double shift = 123 * ps;
    moved.g1.m += shift;
    moved.g2.mean += shift;
    for (double& t : moved.residual_grid) t += shift;
    EXPECT_NEAR(confidence_pair(moved, 1, 2), c12, 1e-9);
    EXPECT_NEAR(confidence_pair(moved, 2, 3), c23, 1e-9);

    MixtureFit scaled = fit;
    const double k = 2.5;
    scaled.g1 = EmgParams{k * fit.g1.m, k * fit.g1.s, k * fit.g1.tau};
    scaled.g2.mean *= k;
    scaled.g2.sigma *= k;
    for (double& t : scaled.residual_grid) t *= k;
    for (double& v : scaled.residual_density) v /= k;
    EXPECT_NEAR(confidence_pair(scaled, 1, 2), c12, 1e-9);
    EXPECT_NEAR(confidence_pair(scaled, 2, 3), c23, 1e-9);
}

TEST(ConfidencePair, QuadratureConverged)
{
    const MixtureFit fit = toy_fit();
    for (auto [a, b] : {std::pair{1, 2}, std::pair{2, 3}}) {
        EXPECT_NEAR(confidence_pair(fit, a, b, 4096), confidence_pair(fit, a, b, 8191), 1e-4);
    }
}

TEST(ConfidencePair, MissingClass)
{
    MixtureFit fit = toy_fit();
    fit.p = {1.0, 0.0, 0.0};
    EXPECT_PNR_ERROR(confidence_pair(fit, 1, 2), Errc::missing_class);
    EXPECT_PNR_ERROR(confidence_pair(toy_fit(), 1, 4), Errc::missing_class);
    MixtureFit no_table = toy_fit();
    no_table.residual_grid.clear();
    no_table.residual_density.clear();
    EXPECT_PNR_ERROR(confidence_pair(no_table, 2, 3), Errc::missing_class);
}

TEST(ConfidencePair, SyntheticDefaultNearTarget)
{
    const MixtureFit& fit = default_desk_fit();
    EXPECT_NEAR(confidence_pair(fit, 1, 2), 0.85, 0.03);
}

TEST(ConfidencePair, MatchesFineGridQuadrature)
{
    const MixtureFit& fit = default_desk_fit();
    const double s = fit.g1.s, tau = fit.g1.tau;
    const double lo = std::min(fit.g1.m, fit.g2.mean) - 30 * (s + std::abs(tau) + fit.g2.sigma);
    const double hi = std::max(fit.g1.m, fit.g2.mean) + 30 * (s + std::abs(tau) + fit.g2.sigma);
    const int steps = 400'000;
    const double h = (hi - lo) / steps;
    double overlap = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double t = lo + h * i;
        const double g2 = std::exp(-0.5 * std::pow((t - fit.g2.mean) / fit.g2.sigma, 2)) /
                          (fit.g2.sigma * std::sqrt(2.0 * std::numbers::pi));
        const double g1 = tau > 0.0 ? naive_emg(t - fit.g1.m, s, tau) : naive_emg(fit.g1.m - t, s, -tau);
        overlap += (i == 0 || i == steps ? 0.5 : 1.0) * std::sqrt(std::max(0.0, g1 * g2)) * h;
    }
    EXPECT_NEAR(confidence_pair(fit, 1, 2), 1.0 - overlap, 1e-3);
}

TEST(ConfidenceError, ZeroCovariance)
{
    MixtureFit fit = toy_fit();
    fit.covariance.setZero();
    EXPECT_EQ(confidence_error(fit, 1, 2, 50, 3), 0.0);
}

TEST(ConfidenceError, ScalesWithSquareRootOfCovariance)
{
    MixtureFit fit = toy_fit();
    const double base = confidence_error(fit, 1, 2, 2000, 9, nullptr, 1024);
    fit.covariance *= 4.0;
    const double wide = confidence_error(fit, 1, 2, 2000, 9, nullptr, 1024);
    EXPECT_GT(base, 0.0);
    EXPECT_NEAR(wide / base, 2.0, 0.4);
}

TEST(ConfidenceError, DeterministicForSeed)
{
    const MixtureFit fit = toy_fit();
    EXPECT_EQ(confidence_error(fit, 2, 3, 200, 5), confidence_error(fit, 2, 3, 200, 5));
    EXPECT_NE(confidence_error(fit, 2, 3, 200, 5), confidence_error(fit, 2, 3, 200, 6));
}

TEST(ConfidenceError, RepairsIndefiniteCovariance)
{
    MixtureFit fit = toy_fit();
    fit.covariance(5, 5) = -fit.covariance(5, 5);
    std::vector<std::string> warnings;
    const double se = confidence_error(fit, 1, 2, 200, 1, &warnings);
    EXPECT_TRUE(std::isfinite(se));
    EXPECT_GE(se, 0.0);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings.front().find("clipped"), std::string::npos);
}

TEST(ConfidenceError, Preconditions)
{
    MixtureFit fit = toy_fit();
    EXPECT_PNR_ERROR(confidence_error(fit, 1, 2, 1), Errc::invalid_argument);
    fit.covariance = Eigen::MatrixXd::Zero(6, 6);
    EXPECT_PNR_ERROR(confidence_error(fit, 1, 2), Errc::shape_mismatch);
}

TEST(ConfidenceReportTest, SyntheticReportHasPercentLevelErrors)
{
    const ConfidenceReport report = confidence_report(default_desk_fit(), "synthetic", 1000, 17);
    ASSERT_EQ(report.pairs.size(), 2u);
    EXPECT_EQ(report.pairs[0].label(), "C1->2");
    EXPECT_EQ(report.pairs[1].label(), "C2->3+");
    for (const auto& p : report.pairs) {
        EXPECT_GE(p.confidence, 0.0);
        EXPECT_LE(p.confidence, 1.0);
        EXPECT_GT(p.std_error, 0.001);
        EXPECT_LT(p.std_error, 0.05);
    }
    EXPECT_EQ(report.n_bootstrap, 1000u);

    const ConfidenceReport back = nlohmann::json(report).get<ConfidenceReport>();
    EXPECT_EQ(back.system, "synthetic");
    EXPECT_EQ(back.grid, report.grid);
    ASSERT_EQ(back.pairs.size(), 2u);
    EXPECT_EQ(back.pairs[1].confidence, report.pairs[1].confidence);
    EXPECT_TRUE(back.pairs[1].to_plus);
}

TEST(ConfidenceReportTest, SkipsAbsentClass)
{
    MixtureFit fit = toy_fit();
    fit.p = {0.8, 0.2, 0.0};
    const ConfidenceReport report = confidence_report(fit, "two-class", 20, 1);
    ASSERT_EQ(report.pairs.size(), 1u);
    EXPECT_EQ(report.pairs[0].label(), "C1->2");
    EXPECT_EQ(report.warnings.size(), 1u);
}

TEST(CompareSystems, SingleReport)
{
    ConfidenceReport r;
    r.system = "ours";
    r.pairs = {ConfidencePair{1, 2, false, 0.85, 0.01}};
    const ComparisonTable t = compare_systems({r});
    EXPECT_EQ(t.systems.size(), 1u);
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_TRUE(t.cells[0][0].has_value());
    EXPECT_PNR_ERROR(compare_systems({}), Errc::invalid_argument);
}

TEST(CompareSystems, AlignsRowsAndMarksAbsentPairs)
{
    ConfidenceReport ours;
    ours.system = "ours";
    ours.pairs = {ConfidencePair{1, 2, false, 0.85, 0.01}, ConfidencePair{2, 3, true, 0.85, 0.01}};
    ConfidenceReport theirs;
    theirs.system = "theirs";
    theirs.pairs = {ConfidencePair{1, 2, false, 0.99, 0.01}, ConfidencePair{2, 3, false, 0.94, 0.01},
                    ConfidencePair{3, 4, false, 0.89, 0.01}, ConfidencePair{4, 5, true, 0.86, 0.01}};
    const ComparisonTable t = compare_systems({ours, theirs});
    EXPECT_EQ(t.rows, (std::vector<std::string>{"C1->2", "C2->3", "C2->3+", "C3->4", "C4->5+"}));
    EXPECT_FALSE(t.cells[1][0].has_value());
    EXPECT_FALSE(t.cells[3][0].has_value());

    const ComparisonTable four = compare_systems({theirs});
    EXPECT_EQ(four.rows.size(), 4u);

    const std::string text = render_table(t);
    EXPECT_NE(text.find("0.850 +- 0.010"), std::string::npos);
    EXPECT_NE(text.find("-"), std::string::npos);
    const std::string csv = render_csv(t);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "metric,ours,ours_err,theirs,theirs_err");
    EXPECT_NE(csv.find("C3->4,-,-,"), std::string::npos);
}

TEST(CompareSystems, LowerJitterResolvesBetter)
{
    SynthConfig sharp;
    sharp.jitter_emg.sigma *= 30.0 / 45.0;
    sharp.jitter_emg.tau *= 30.0 / 45.0;
    ConfidenceReport a = confidence_report(desk_fit(sharp, 20'000), "sharp", 50, 1);
    ConfidenceReport b = confidence_report(default_desk_fit(), "default", 50, 1);
    const ComparisonTable t = compare_systems({a, b});
    ASSERT_TRUE(t.cells[0][0] && t.cells[0][1]);
    EXPECT_GT(t.cells[0][0]->confidence, t.cells[0][1]->confidence);
}
