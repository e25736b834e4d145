#pragma once

#include <cmath>
#include <memory>

#include <Eigen/Core>

#include "pnsg/basis_stream.hpp"
#include "pnsg/exponent.hpp"
#include "pnsg/quadrature.hpp"

namespace pnsg {

/// A basis together with a quadrature rule and the basis tabulated at its nodes.
/// Immutable; shared by every state and assembly that uses it.
struct Discretization {
    Discretization(BasisSet b, QuadratureRule r)
        : basis(std::move(b)), rule(std::move(r)), table(basis.tabulate(rule)) {}

    BasisSet basis;
    QuadratureRule rule;
    BasisTable table;

    Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(basis.size()); }
};

/// Time plus Galerkin coefficients X over a fixed basis.
struct GalerkinState {
    double t = 0.0;
    Eigen::VectorXd coeffs;
    std::shared_ptr<const Discretization> disc;

    GalerkinState(double time, Eigen::VectorXd x, std::shared_ptr<const Discretization> d)
        : t(time), coeffs(std::move(x)), disc(std::move(d)) {
        if (!disc) throw ValidationError("state requires a discretization");
        if (coeffs.size() != disc->size()) {
            throw ValidationError("coefficient vector has length " + std::to_string(coeffs.size()) +
                                  ", basis has " + std::to_string(disc->size()));
        }
        if (!coeffs.allFinite()) throw NumericalError("state coefficients are not finite");
    }
};

struct PointSample {
    Eigen::Vector2d v = Eigen::Vector2d::Zero();
    Eigen::Matrix2d grad_v = Eigen::Matrix2d::Zero(); // grad_v(a, b) = d_a v_b
    Eigen::Matrix2d d_sym = Eigen::Matrix2d::Zero();
    double speed = 0.0;
};

inline Eigen::Matrix2d symmetric_part(const Eigen::Matrix2d& g) {
    Eigen::Matrix2d d;
    d(0, 0) = g(0, 0);
    d(1, 1) = g(1, 1);
    d(0, 1) = d(1, 0) = 0.5 * (g(0, 1) + g(1, 0));
    return d;
}

inline PointSample sample(const BasisSet& basis, const Eigen::VectorXd& coeffs, double x, double y) {
    if (static_cast<std::size_t>(coeffs.size()) != basis.size()) throw ValidationError("coefficient length mismatch");
    PointSample s;
    for (std::size_t k = 0; k < basis.size(); ++k) {
        const double c = coeffs[static_cast<Eigen::Index>(k)];
        if (c == 0.0) continue;
        const FieldValue f = basis.evaluate(k, x, y);
        s.v += c * f.value;
        s.grad_v += c * f.grad;
    }
    s.d_sym = symmetric_part(s.grad_v);
    s.speed = s.v.norm();
    return s;
}

inline PointSample sample(const GalerkinState& state, double x, double y) {
    return sample(state.disc->basis, state.coeffs, x, y);
}

/// |v|^{p-2} v, continuous at 0 for p >= 2.
inline Eigen::Vector2d v_p_of(const Eigen::Vector2d& v, const Exponent& p) {
    if (p.is_quadratic()) return v;
    const double s = v.norm();
    if (s == 0.0) return Eigen::Vector2d::Zero();
    return std::pow(s, p.p() - 2.0) * v;
}

/// |d|^{p-2} d with the Frobenius norm.
inline Eigen::Matrix2d stress_of(const Eigen::Matrix2d& d, const Exponent& p) {
    if (p.is_quadratic()) return d;
    const double s = d.norm();
    if (s == 0.0) return Eigen::Matrix2d::Zero();
    return std::pow(s, p.p() - 2.0) * d;
}

/// Velocity and gradient at every quadrature node, as Q-vectors.
struct NodeFields {
    Eigen::VectorXd vx, vy, g00, g01, g10, g11;

    Eigen::Index nodes() const noexcept { return vx.size(); }
    Eigen::Vector2d v(Eigen::Index q) const { return {vx[q], vy[q]}; }
    Eigen::Matrix2d grad(Eigen::Index q) const {
        Eigen::Matrix2d g;
        g << g00[q], g01[q], g10[q], g11[q];
        return g;
    }
};

inline NodeFields evaluate_nodes(const BasisTable& t, const Eigen::VectorXd& x) {
    return {t.vx * x, t.vy * x, t.g00 * x, t.g01 * x, t.g10 * x, t.g11 * x};
}

struct LpNorms {
    double v = 0.0;    // int |v|^p
    double d = 0.0;    // int |D(v)|^p
    double grad = 0.0; // int |grad v|^p
};

inline LpNorms lp_norms(const NodeFields& f, const Eigen::VectorXd& weights, double p) {
    LpNorms n;
    for (Eigen::Index q = 0; q < f.nodes(); ++q) {
        const Eigen::Matrix2d g = f.grad(q);
        const double w = weights[q];
        n.v += w * std::pow(f.v(q).norm(), p);
        n.d += w * std::pow(symmetric_part(g).norm(), p);
        n.grad += w * std::pow(g.norm(), p);
    }
    return n;
}

inline LpNorms lp_norms(const GalerkinState& s, const Exponent& p) {
    return lp_norms(evaluate_nodes(s.disc->table, s.coeffs), s.disc->table.weights, p.p());
}

/// Same quantities with a different rule (used for refinement checks).
inline LpNorms lp_norms(const GalerkinState& s, const Exponent& p, const QuadratureRule& rule) {
    const BasisTable t = s.disc->basis.tabulate(rule);
    return lp_norms(evaluate_nodes(t, s.coeffs), t.weights, p.p());
}

/// Energy H = (1/q) int |v|^p.
inline double energy(const NodeFields& f, const Eigen::VectorXd& weights, const Exponent& p) {
    double e = 0.0;
    for (Eigen::Index q = 0; q < f.nodes(); ++q) e += weights[q] * std::pow(f.v(q).norm(), p.p());
    return e / p.q();
}

} // namespace pnsg
