#pragma once

#include <cmath>
#include <functional>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "pnr/error.hpp"

namespace pnr {

/// Residual callback: fill r (size m) for parameters x.
using ResidualFn = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r)>;

struct LsqResult {
    Eigen::VectorXd x;
    Eigen::MatrixXd jacobian; ///< central-difference Jacobian at x
    double chi2 = 0.0;
    int evaluations = 0;
    int status = 0;
};

namespace detail {

struct LsqFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const ResidualFn* fn;
    int n;
    int m;

    int inputs() const { return n; }
    int values() const { return m; }
    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const
    {
        r.resize(m);
        (*fn)(x, r);
        return 0;
    }
};

} // namespace detail

inline Eigen::MatrixXd central_jacobian(const ResidualFn& fn, const Eigen::VectorXd& x, int m)
{
    Eigen::MatrixXd jac(m, x.size());
    Eigen::VectorXd plus(m), minus(m);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
        Eigen::VectorXd xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        fn(xp, plus);
        fn(xm, minus);
        jac.col(j) = (plus - minus) / (2.0 * h);
    }
    return jac;
}

/// Levenberg-Marquardt (MINPACK lmdif via Eigen) on already-weighted residuals.
/// Parameters should be scaled to order one by the caller.
inline LsqResult minimize_lm(const ResidualFn& fn, Eigen::VectorXd x0, int m, int max_evaluations = 4000)
{
    require(m >= x0.size(), Errc::invalid_argument,
            "fewer residuals (" + std::to_string(m) + ") than parameters");
    detail::LsqFunctor functor{&fn, static_cast<int>(x0.size()), m};
    Eigen::NumericalDiff<detail::LsqFunctor> diff(functor);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<detail::LsqFunctor>> lm(diff);
    lm.parameters.maxfev = max_evaluations;
    lm.parameters.xtol = 1e-12;
    lm.parameters.ftol = 1e-12;
    const auto status = lm.minimize(x0);
    using Status = Eigen::LevenbergMarquardtSpace::Status;
    require(status != Status::TooManyFunctionEvaluation, Errc::non_convergence,
            "Levenberg-Marquardt hit " + std::to_string(max_evaluations) + " evaluations");
    require(status != Status::ImproperInputParameters, Errc::invalid_argument, "improper LM input");

    LsqResult out;
    out.x = x0;
    out.status = static_cast<int>(status);
    out.evaluations = static_cast<int>(lm.nfev);
    Eigen::VectorXd r(m);
    fn(out.x, r);
    out.chi2 = r.squaredNorm();
    require(std::isfinite(out.chi2), Errc::non_convergence, "non-finite residuals at solution");
    out.jacobian = central_jacobian(fn, out.x, m);
    return out;
}

/// (J^T J)^-1 via a pseudo-inverse; throws rank_deficient when any of the
/// `required` leading parameters is not determined by the data.
inline Eigen::MatrixXd covariance_from_jacobian(const Eigen::MatrixXd& jac, Eigen::Index required)
{
    const Eigen::MatrixXd info = jac.transpose() * jac;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double top = lambda.cwiseAbs().maxCoeff();
    require(top > 0.0, Errc::rank_deficient, "Jacobian is identically zero");
    const double cutoff = 1e-12 * top;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (lambda(i) > cutoff) {
            inv(i) = 1.0 / lambda(i);
        } else {
            // A null direction that touches a required parameter means that
            // parameter cannot be estimated.
            const double weight = eig.eigenvectors().col(i).head(required).norm();
            require(weight < 1e-3, Errc::rank_deficient, "fit parameters are not identifiable");
        }
    }
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

} // namespace pnr
