#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "pnr/error.hpp"
#include "pnr/trace.hpp"

namespace pnr {

struct PcaModel {
    Trace mean;
    std::vector<std::vector<double>> components;
    std::vector<double> explained_variance;
    std::size_t n_fitted = 0;
    /// Trace of the sample covariance, i.e. the total variance of the fitted data.
    double total_variance = 0.0;
};

struct Scree {
    std::vector<double> ratios;
    std::vector<double> cumulative;
};

/// Largest number of components fit_pca can return for n traces of length d.
/// Mean-centering removes one degree of freedom when n <= d.
constexpr std::size_t pca_rank_bound(std::size_t n, std::size_t d) noexcept
{
    return n > d ? d : (n > 0 ? n - 1 : 0);
}

namespace detail {

// Flip so the entry of largest magnitude is positive (first one on ties).
inline void canonical_sign(Eigen::Ref<Eigen::VectorXd> v)
{
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) {
        v = -v;
    }
}

} // namespace detail

/// Top-k principal components of the mean-centered traces. Uses the d x d
/// covariance when there are at least as many traces as samples, otherwise
/// the n x n Gram matrix.
inline PcaModel fit_pca(const TraceSet& set, std::size_t k)
{
    validate(set);
    require(set.size() >= 2, Errc::invalid_argument, "PCA needs at least 2 traces");
    require(k >= 1, Errc::invalid_argument, "PCA needs k >= 1");
    const std::size_t n = set.size();
    const std::size_t d = set.samples_per_trace();
    require(k <= pca_rank_bound(n, d), Errc::out_of_range,
            "k = " + std::to_string(k) + " exceeds rank bound " + std::to_string(pca_rank_bound(n, d)));

    PcaModel model;
    model.mean = mean_trace(set);
    model.n_fitted = n;

    Eigen::MatrixXd x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            x(i, j) = set.traces[i].samples[j] - model.mean.samples[j];
        }
    }
    const double norm = 1.0 / static_cast<double>(n - 1);
    model.total_variance = x.squaredNorm() * norm;
    require(model.total_variance > 0.0, Errc::degenerate, "all traces identical");

    Eigen::MatrixXd vectors(d, k);
    Eigen::VectorXd values(k);
    if (n >= d) {
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
        cov.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), norm);
        cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        require(eig.info() == Eigen::Success, Errc::degenerate, "eigendecomposition failed");
        for (std::size_t c = 0; c < k; ++c) {
            const auto src = static_cast<Eigen::Index>(d - 1 - c);
            values(c) = std::max(0.0, eig.eigenvalues()(src));
            vectors.col(c) = eig.eigenvectors().col(src);
        }
    } else {
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(x, norm);
        gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        require(eig.info() == Eigen::Success, Errc::degenerate, "eigendecomposition failed");
        for (std::size_t c = 0; c < k; ++c) {
            const auto src = static_cast<Eigen::Index>(n - 1 - c);
            const double lambda = eig.eigenvalues()(src);
            require(lambda > 1e-12 * model.total_variance, Errc::out_of_range,
                    "component " + std::to_string(c) + " has zero variance");
            values(c) = lambda;
            Eigen::VectorXd u = x.transpose() * eig.eigenvectors().col(src);
            vectors.col(c) = u / u.norm();
        }
    }

    model.components.resize(k);
    model.explained_variance.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        Eigen::VectorXd v = vectors.col(c);
        detail::canonical_sign(v);
        model.components[c].assign(v.data(), v.data() + d);
        model.explained_variance[c] = values(c);
    }
    return model;
}

inline std::vector<double> pca_scores(const PcaModel& model, const Trace& trace, std::size_t k)
{
    require(trace.size() == model.mean.size(), Errc::length_mismatch, "trace length differs from PCA model");
    require(k <= model.components.size(), Errc::out_of_range, "more scores requested than components");
    std::vector<double> centered(trace.size());
    for (std::size_t j = 0; j < trace.size(); ++j) {
        centered[j] = trace.samples[j] - model.mean.samples[j];
    }
    std::vector<double> scores(k);
    for (std::size_t c = 0; c < k; ++c) {
        scores[c] = dot(centered, model.components[c]);
    }
    return scores;
}

inline Scree scree(const PcaModel& model)
{
    Scree out;
    double running = 0.0;
    for (double v : model.explained_variance) {
        const double r = model.total_variance > 0.0 ? v / model.total_variance : 0.0;
        running += r;
        out.ratios.push_back(r);
        out.cumulative.push_back(running);
    }
    return out;
}

} // namespace pnr
