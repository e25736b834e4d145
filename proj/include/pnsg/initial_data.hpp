#pragma once

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "pnsg/basis_stream.hpp"
#include "pnsg/error.hpp"
#include "pnsg/helmholtz.hpp"

namespace pnsg {

/// Initial Galerkin coefficients c_n(0) and how much of v0 the span missed.
struct InitialProjection {
    Eigen::VectorXd coeffs;
    double relative_truncation_error = 0.0; // ||v0 - P v0|| / ||v0|| in L2
    bool trivial = false;                   // v0 == 0: nothing to evolve
};

namespace detail {
inline Eigen::VectorXd solve_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs) {
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw IllConditionedBasis("Gram system is singular; cannot project initial data");
    return llt.solve(rhs);
}
} // namespace detail

/// L2 projection of an analytic divergence-free field onto span(basis), with
/// integrals taken on the given rule.
template <class F>
InitialProjection initial_coefficients(F&& v0, const BasisSet& basis, const QuadratureRule& rule) {
    const BasisTable t = basis.tabulate(rule);
    const auto nq = static_cast<Eigen::Index>(rule.size_2d());
    Eigen::VectorXd fx(nq), fy(nq);
    for (Eigen::Index q = 0; q < nq; ++q) {
        const Eigen::Vector2d v = v0(rule.x(q), rule.y(q));
        if (!v.allFinite()) throw ValidationError("initial data is not finite");
        fx[q] = v[0];
        fy[q] = v[1];
    }
    const auto w = t.weights.asDiagonal();
    const Eigen::VectorXd rhs = t.vx.transpose() * (w * fx) + t.vy.transpose() * (w * fy);
    const double norm2 = fx.dot(w * fx) + fy.dot(w * fy);
    InitialProjection out;
    if (norm2 == 0.0) {
        out.coeffs = Eigen::VectorXd::Zero(t.size());
        out.trivial = true;
        return out;
    }
    out.coeffs = detail::solve_gram(basis.gram_l2(), rhs);
    const Eigen::VectorXd ex = fx - t.vx * out.coeffs, ey = fy - t.vy * out.coeffs;
    out.relative_truncation_error = std::sqrt((ex.dot(w * ex) + ey.dot(w * ey)) / norm2);
    if (out.coeffs.isZero(0.0)) out.trivial = true;
    return out;
}

/// Raw grid data: Leray-project on the grid, then least-squares fit of the basis
/// in the grid inner product. Gradient content is removed by the first step.
inline InitialProjection initial_coefficients(const GridField& v0, const BasisSet& basis,
                                              const PoissonOptions& opt = {}) {
    const LerayResult lr = leray_project(v0, opt);
    const int n = v0.n();
    const auto cells = static_cast<Eigen::Index>(n) * n;
    const auto nb = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd px(cells, nb), py(cells, nb);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < nb; ++k) {
                const FieldValue f = basis.evaluate(static_cast<std::size_t>(k), v0.x(i), v0.y(j));
                px(v0.index(i, j), k) = f.value[0];
                py(v0.index(i, j), k) = f.value[1];
            }
    InitialProjection out;
    const double norm2 = lr.u.u1().squaredNorm() + lr.u.u2().squaredNorm();
    const double raw2 = v0.u1().squaredNorm() + v0.u2().squaredNorm();
    // Below the Poisson tolerance the remainder is solver noise, not data.
    if (norm2 <= 1e-16 * raw2) {
        out.coeffs = Eigen::VectorXd::Zero(nb);
        out.trivial = true;
        out.relative_truncation_error = 0.0;
        return out;
    }
    Eigen::MatrixXd gram = px.transpose() * px + py.transpose() * py;
    gram = 0.5 * (gram + gram.transpose());
    out.coeffs = detail::solve_gram(gram, px.transpose() * lr.u.u1() + py.transpose() * lr.u.u2());
    const Eigen::VectorXd ex = lr.u.u1() - px * out.coeffs, ey = lr.u.u2() - py * out.coeffs;
    out.relative_truncation_error = std::sqrt((ex.squaredNorm() + ey.squaredNorm()) / norm2);
    return out;
}

} // namespace pnsg
