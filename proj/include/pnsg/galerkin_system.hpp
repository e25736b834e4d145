#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "pnsg/exponent.hpp"
#include "pnsg/field_eval.hpp"

namespace pnsg {

struct AssemblyDiagnostics {
    std::size_t nodes = 0;
    double min_speed = 0.0;
    double max_speed = 0.0;
    std::size_t guard_activations = 0; // nodes where (p-2)|v|^{p-4} v (x) v was zeroed
};

/// A^N(X) and F(X) for the Galerkin system A^N(X) dX/dt = F(X), plus the two
/// pieces of F and the integrals that come out of the same node sweep.
struct AssembledSystem {
    Eigen::MatrixXd a_matrix;
    Eigen::VectorXd f_vector;
    Eigen::VectorXd f_viscous;
    Eigen::VectorXd f_transport;
    double int_v_p = 0.0; // int |v|^p
    double int_d_p = 0.0; // int |D(v)|^p
    AssemblyDiagnostics diagnostics;
};

enum class AssemblyParts : unsigned { matrix = 1u, rhs = 2u, both = 3u };

namespace detail {

struct NodeCoefficients {
    Eigen::VectorXd s;          // w |v|^{p-2}
    Eigen::VectorXd t;          // w (p-2)|v|^{p-4}, zero where guarded
    Eigen::VectorXd sxx, sxy, syx, syy; // w |D|^{p-2} D
    Eigen::VectorXd tx, ty;     // w (v . grad) v_p
    double int_v_p = 0.0, int_d_p = 0.0;
    std::size_t activations = 0;
};

inline NodeCoefficients node_coefficients(const NodeFields& f, const Eigen::VectorXd& w, const Exponent& exponent,
                                          double eps_v) {
    const double p = exponent.p();
    const Eigen::Index nq = f.nodes();
    NodeCoefficients c;
    c.s.resize(nq);
    c.t.resize(nq);
    c.sxx.resize(nq);
    c.sxy.resize(nq);
    c.syx.resize(nq);
    c.syy.resize(nq);
    c.tx.resize(nq);
    c.ty.resize(nq);
    const bool singular_band = p > 2.0 && p < 4.0;
    for (Eigen::Index q = 0; q < nq; ++q) {
        const Eigen::Vector2d v = f.v(q);
        const Eigen::Matrix2d g = f.grad(q);
        const double speed = v.norm();
        const double s = exponent.is_quadratic() ? 1.0 : std::pow(speed, p - 2.0);
        double t = 0.0;
        if (p > 2.0) {
            if (singular_band && speed < eps_v) {
                ++c.activations;
            } else {
                t = (p - 2.0) * std::pow(speed, p - 4.0);
            }
        }
        const Eigen::Matrix2d d = symmetric_part(g);
        const double dn = d.norm();
        const double sd = exponent.is_quadratic() ? 1.0 : std::pow(dn, p - 2.0);
        // (v . grad) v, component k = sum_j v_j d_j v_k.
        const Eigen::Vector2d adv = g.transpose() * v;
        const Eigen::Vector2d transport = s * adv + t * v.dot(adv) * v;

        c.s[q] = w[q] * s;
        c.t[q] = w[q] * t;
        c.sxx[q] = w[q] * sd * d(0, 0);
        c.sxy[q] = w[q] * sd * d(0, 1);
        c.syx[q] = w[q] * sd * d(1, 0);
        c.syy[q] = w[q] * sd * d(1, 1);
        c.tx[q] = w[q] * transport[0];
        c.ty[q] = w[q] * transport[1];
        c.int_v_p += w[q] * s * speed * speed;
        c.int_d_p += w[q] * sd * dn * dn;
    }
    return c;
}

inline void accumulate_block(const BasisTable& tb, const NodeFields& f, const NodeCoefficients& c, Eigen::Index q0,
                             Eigen::Index len, double nu, AssemblyParts parts, Eigen::MatrixXd& a,
                             Eigen::VectorXd& fv, Eigen::VectorXd& ft) {
    const auto px = tb.vx.middleRows(q0, len);
    const auto py = tb.vy.middleRows(q0, len);
    if (static_cast<unsigned>(parts) & static_cast<unsigned>(AssemblyParts::matrix)) {
        // A = M^T M with M = [sqrt(s) phi_x; sqrt(s) phi_y; sqrt(t) (v . phi)], stacked by node.
        Eigen::MatrixXd stacked(3 * len, px.cols());
        const Eigen::ArrayXd rs = c.s.segment(q0, len).array().sqrt();
        const Eigen::ArrayXd rt = c.t.segment(q0, len).array().sqrt();
        stacked.topRows(len) = rs.matrix().asDiagonal() * px;
        stacked.middleRows(len, len) = rs.matrix().asDiagonal() * py;
        stacked.bottomRows(len) = (rt * f.vx.segment(q0, len).array()).matrix().asDiagonal() * px +
                                  (rt * f.vy.segment(q0, len).array()).matrix().asDiagonal() * py;
        a.selfadjointView<Eigen::Lower>().rankUpdate(stacked.transpose());
    }
    if (static_cast<unsigned>(parts) & static_cast<unsigned>(AssemblyParts::rhs)) {
        fv.noalias() -= nu * (tb.g00.middleRows(q0, len).transpose() * c.sxx.segment(q0, len) +
                              tb.g01.middleRows(q0, len).transpose() * c.sxy.segment(q0, len) +
                              tb.g10.middleRows(q0, len).transpose() * c.syx.segment(q0, len) +
                              tb.g11.middleRows(q0, len).transpose() * c.syy.segment(q0, len));
        ft.noalias() -= px.transpose() * c.tx.segment(q0, len) + py.transpose() * c.ty.segment(q0, len);
    }
}

} // namespace detail

/// One sweep over the quadrature nodes producing A^N, F and the diagnostics.
/// Nodes are split into `threads` contiguous blocks whose partial sums are added
/// in block order, so results are reproducible for a fixed thread count.
inline AssembledSystem assemble(const Discretization& disc, const Eigen::VectorXd& x, const Exponent& p, double nu,
                                AssemblyParts parts = AssemblyParts::both, int threads = 1) {
    const BasisTable& tb = disc.table;
    const NodeFields f = evaluate_nodes(tb, x);
    const Eigen::Index nq = f.nodes();
    const Eigen::Index n = disc.size();

    double max_speed = 0.0, min_speed = std::numeric_limits<double>::infinity();
    for (Eigen::Index q = 0; q < nq; ++q) {
        const double s = f.v(q).norm();
        max_speed = std::max(max_speed, s);
        min_speed = std::min(min_speed, s);
    }
    const double eps_v = 1e-13 * (max_speed + 1e-300);
    const detail::NodeCoefficients c = detail::node_coefficients(f, tb.weights, p, eps_v);

    const int nt = std::max(1, std::min<int>(threads, static_cast<int>(nq)));
    std::vector<Eigen::MatrixXd> a_part(nt, Eigen::MatrixXd::Zero(n, n));
    std::vector<Eigen::VectorXd> fv_part(nt, Eigen::VectorXd::Zero(n)), ft_part(nt, Eigen::VectorXd::Zero(n));
    auto work = [&](int k) {
        const Eigen::Index q0 = nq * k / nt, q1 = nq * (k + 1) / nt;
        detail::accumulate_block(tb, f, c, q0, q1 - q0, nu, parts, a_part[k], fv_part[k], ft_part[k]);
    };
    if (nt == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < nt; ++k) pool.emplace_back(work, k);
        for (auto& th : pool) th.join();
    }

    AssembledSystem out;
    out.a_matrix = Eigen::MatrixXd::Zero(n, n);
    out.f_viscous = Eigen::VectorXd::Zero(n);
    out.f_transport = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < nt; ++k) {
        out.a_matrix += a_part[k];
        out.f_viscous += fv_part[k];
        out.f_transport += ft_part[k];
    }
    out.a_matrix = out.a_matrix.selfadjointView<Eigen::Lower>();
    out.f_vector = out.f_viscous + out.f_transport;
    out.int_v_p = c.int_v_p;
    out.int_d_p = c.int_d_p;
    out.diagnostics = {static_cast<std::size_t>(nq), min_speed, max_speed, c.activations};
    return out;
}

/// Matrix-free pieces of the midpoint residual at state x: A(x) w, A(x) x and F(x),
/// at O(Q N) cost instead of the O(Q N^2) of forming A.
struct SystemAction {
    Eigen::VectorXd a_w;
    Eigen::VectorXd a_x;
    Eigen::VectorXd f_vector;
    double int_d_p = 0.0;
};

inline SystemAction apply_system(const Discretization& disc, const Eigen::VectorXd& x, const Eigen::VectorXd& w,
                                 const Exponent& p, double nu) {
    const BasisTable& tb = disc.table;
    const NodeFields f = evaluate_nodes(tb, x);
    const Eigen::Index nq = f.nodes();
    double max_speed = 0.0;
    for (Eigen::Index q = 0; q < nq; ++q) max_speed = std::max(max_speed, f.v(q).norm());
    const detail::NodeCoefficients c = detail::node_coefficients(f, tb.weights, p, 1e-13 * (max_speed + 1e-300));

    const Eigen::VectorXd wx = tb.vx * w, wy = tb.vy * w;
    Eigen::VectorXd gx(nq), gy(nq), hx(nq), hy(nq);
    for (Eigen::Index q = 0; q < nq; ++q) {
        const double vw = f.vx[q] * wx[q] + f.vy[q] * wy[q];
        const double vv = f.vx[q] * f.vx[q] + f.vy[q] * f.vy[q];
        gx[q] = c.s[q] * wx[q] + c.t[q] * vw * f.vx[q];
        gy[q] = c.s[q] * wy[q] + c.t[q] * vw * f.vy[q];
        hx[q] = (c.s[q] + c.t[q] * vv) * f.vx[q];
        hy[q] = (c.s[q] + c.t[q] * vv) * f.vy[q];
    }
    SystemAction out;
    out.a_w = tb.vx.transpose() * gx + tb.vy.transpose() * gy;
    out.a_x = tb.vx.transpose() * hx + tb.vy.transpose() * hy;
    out.f_vector = -nu * (tb.g00.transpose() * c.sxx + tb.g01.transpose() * c.sxy + tb.g10.transpose() * c.syx +
                          tb.g11.transpose() * c.syy) -
                   (tb.vx.transpose() * c.tx + tb.vy.transpose() * c.ty);
    out.int_d_p = c.int_d_p;
    return out;
}

inline Eigen::MatrixXd assemble_a(const GalerkinState& s, const Exponent& p, int threads = 1) {
    return assemble(*s.disc, s.coeffs, p, 0.0, AssemblyParts::matrix, threads).a_matrix;
}

inline Eigen::VectorXd assemble_f(const GalerkinState& s, const Exponent& p, double nu, int threads = 1) {
    if (!(nu > 0.0)) throw ValidationError("viscosity nu must be positive");
    return assemble(*s.disc, s.coeffs, p, nu, AssemblyParts::rhs, threads).f_vector;
}

/// p-weighted Gram matrix int |v|^{p-2} phi_i . phi_j, the lower comparison
/// matrix for A^N: A^N >= min(p-1, 1) * this.
inline Eigen::MatrixXd weighted_gram(const Discretization& disc, const Eigen::VectorXd& x, const Exponent& p) {
    const NodeFields f = evaluate_nodes(disc.table, x);
    Eigen::VectorXd s(f.nodes());
    for (Eigen::Index q = 0; q < f.nodes(); ++q)
        s[q] = disc.table.weights[q] * (p.is_quadratic() ? 1.0 : std::pow(f.v(q).norm(), p.p() - 2.0));
    const auto d = s.asDiagonal();
    Eigen::MatrixXd g = disc.table.vx.transpose() * d * disc.table.vx + disc.table.vy.transpose() * d * disc.table.vy;
    return 0.5 * (g + g.transpose());
}

/// Rates for int |v|^p: the model rate q X^T F(X) and the dissipation q nu int |D(v)|^p.
/// Their sum is the instantaneous energy defect. (For H = (1/q) int |v|^p divide by q.)
struct EnergyRate {
    double model = 0.0;
    double dissipation = 0.0;
};

inline EnergyRate energy_rate(const GalerkinState& s, const Exponent& p, double nu, int threads = 1) {
    const AssembledSystem sys = assemble(*s.disc, s.coeffs, p, nu, AssemblyParts::rhs, threads);
    return {p.q() * s.coeffs.dot(sys.f_vector), p.q() * nu * sys.int_d_p};
}

} // namespace pnsg
