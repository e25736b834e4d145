#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pnsg/error.hpp"
#include "pnsg/exponent.hpp"
#include "pnsg/field_eval.hpp"
#include "pnsg/integrator.hpp"

namespace pnsg {

struct InequalityReport {
    std::string name;
    std::size_t samples = 0;
    double worst = 0.0; // inequality-specific: smallest ratio, smallest pairing, largest jump...
    double p = 2.0;
    std::uint64_t seed = 0;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline Eigen::Vector2d power_vector(const Eigen::Vector2d& eta, double p) {
    const double r = eta.norm();
    if (r == 0.0) return Eigen::Vector2d::Zero();
    return std::pow(r, p - 2.0) * eta;
}

inline Eigen::Vector2d on_circle(double angle, double radius) {
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// (|a|^{p-2}a - |b|^{p-2}b).(a - b) / ((|a| + |b|)^{p-2} |a - b|^2); NaN when a == b.
inline double gady_ratio(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double p) {
    const Eigen::Vector2d d = a - b;
    const double d2 = d.squaredNorm();
    if (d2 == 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double lhs = (power_vector(a, p) - power_vector(b, p)).dot(d);
    return lhs / (std::pow(a.norm() + b.norm(), p - 2.0) * d2);
}

inline Eigen::Matrix2d random_symmetric(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Matrix2d m;
    m(0, 0) = u(rng);
    m(1, 1) = u(rng);
    m(0, 1) = m(1, 0) = u(rng);
    return m;
}

inline double pairing(const Eigen::Matrix2d& a, const Eigen::Matrix2d& b) { return (a.array() * b.array()).sum(); }

} // namespace detail

/// Empirical C(p) in
///   (|a|^{p-2}a - |b|^{p-2}b).(a - b) >= C(p) (|a| + |b|)^{p-2} |a - b|^2.
/// Half the samples are uniform in [-1,1]^2, the rest are equal-radius pairs on
/// circles of radius 1e-6, 1 and 1e3; a deterministic grid of unit-circle
/// pairs (which contains the antipodal pairs) is added on top.
inline InequalityReport check_gady(double p, std::size_t n_samples, std::uint64_t seed, int grid = 256) {
    const Exponent ex(p);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> box(-1.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const double radii[] = {1e-6, 1.0, 1e3};

    InequalityReport rep;
    rep.name = "gady";
    rep.p = ex.p();
    rep.seed = seed;
    double inf = std::numeric_limits<double>::infinity();
    double sup = -inf;
    std::size_t used = 0, skipped = 0;
    auto take = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        const double r = detail::gady_ratio(a, b, ex.p());
        if (std::isnan(r)) {
            ++skipped;
            return;
        }
        inf = std::min(inf, r);
        sup = std::max(sup, r);
        ++used;
    };
    for (std::size_t k = 0; k < n_samples; ++k) {
        if (k % 2 == 0) {
            take({box(rng), box(rng)}, {box(rng), box(rng)});
        } else {
            const double r = radii[(k / 2) % 3];
            take(detail::on_circle(angle(rng), r), detail::on_circle(angle(rng), r));
        }
    }
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            const double ai = 2.0 * std::numbers::pi * i / grid, aj = 2.0 * std::numbers::pi * j / grid;
            take(detail::on_circle(ai, 1.0), detail::on_circle(aj, 1.0));
        }
    rep.samples = used;
    rep.worst = inf;
    rep.pass = inf > 0.0;
    if (ex.is_quadratic()) rep.pass = rep.pass && std::abs(inf - 1.0) <= 1e-12 && std::abs(sup - 1.0) <= 1e-12;
    rep.detail = "sup " + std::to_string(sup) + ", skipped " + std::to_string(skipped);
    return rep;
}

/// G(theta) = |theta|^{p-2} theta with the Frobenius norm.
inline Eigen::Matrix2d g_operator(const Eigen::Matrix2d& theta, const Exponent& p) { return stress_of(theta, p); }

/// Smallest <a - b, G(a) - G(b)> over random symmetric pairs, plus the
/// degenerate pairs a == b and b == 0. Passes when it is >= -1e-14.
inline InequalityReport check_monotone_g(double p, std::size_t n_samples, std::uint64_t seed) {
    const Exponent ex(p);
    std::mt19937_64 rng(seed);
    InequalityReport rep;
    rep.name = "monotone_g";
    rep.p = ex.p();
    rep.seed = seed;
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n_samples; ++k) {
        const Eigen::Matrix2d a = detail::random_symmetric(rng);
        Eigen::Matrix2d b = detail::random_symmetric(rng);
        if (k % 97 == 0) b = a;
        if (k % 89 == 0) b.setZero();
        worst = std::min(worst, detail::pairing(a - b, g_operator(a, ex) - g_operator(b, ex)));
    }
    rep.samples = n_samples;
    rep.worst = worst;
    rep.pass = worst >= -1e-14;
    return rep;
}

/// Continuity of lambda -> <b, G(a + lambda b)> on [-1, 1] with spacing 1e-3:
/// the largest jump between neighbours relative to the largest value.
inline InequalityReport check_hemicontinuity(double p, std::size_t n_pairs, std::uint64_t seed) {
    const Exponent ex(p);
    std::mt19937_64 rng(seed);
    InequalityReport rep;
    rep.name = "hemicontinuity";
    rep.p = ex.p();
    rep.seed = seed;
    double worst = 0.0;
    constexpr int steps = 2000;
    for (std::size_t k = 0; k < n_pairs; ++k) {
        const Eigen::Matrix2d a = detail::random_symmetric(rng);
        const Eigen::Matrix2d b = detail::random_symmetric(rng);
        double prev = 0.0, jump = 0.0, scale = 0.0;
        for (int i = 0; i <= steps; ++i) {
            const double lambda = -1.0 + 2.0 * i / steps;
            const double f = detail::pairing(b, g_operator(a + lambda * b, ex));
            if (i > 0) jump = std::max(jump, std::abs(f - prev));
            scale = std::max(scale, std::abs(f));
            prev = f;
        }
        if (scale > 0.0) worst = std::max(worst, jump / scale);
    }
    rep.samples = n_pairs;
    rep.worst = worst;
    rep.pass = worst <= 1e-2;
    return rep;
}

namespace detail {

/// int |v|^p over the trajectory's own nodes for coefficient vector x.
inline double lp_power(const Discretization& disc, const Eigen::VectorXd& x, double p) {
    const Eigen::VectorXd vx = disc.table.vx * x, vy = disc.table.vy * x;
    double s = 0.0;
    for (Eigen::Index q = 0; q < vx.size(); ++q)
        s += disc.table.weights[q] * std::pow(std::hypot(vx[q], vy[q]), p);
    return s;
}

/// Trapezoid on a strictly increasing grid.
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) s += 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
    return s;
}

/// Snapshot times inside [a, b] with both end points added.
inline std::vector<double> grid_between(const std::vector<double>& times, double a, double b) {
    std::vector<double> g{a};
    for (double t : times)
        if (t > a && t < b) g.push_back(t);
    if (b > a) g.push_back(b);
    return g;
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] > 0.0) || !(y[k] > 0.0)) continue;
        const double lx = std::log(x[k]), ly = std::log(y[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

} // namespace detail

struct ShiftModulus {
    std::vector<double> h;
    std::vector<double> modulus; // ||tau_h v - v||^p in L^p(0, T-h; L^p)
    double slope = 0.0;          // least-squares slope of log(modulus) against log(h)
};

/// Time-shift modulus int_0^{T-h} int |v(t+h) - v(t)|^p dx dt for each h, by
/// trapezoid on the snapshot grid with linear interpolation at t + h.
inline ShiftModulus time_shift_modulus(const Trajectory& traj, const std::vector<double>& h_list) {
    if (traj.snapshots() < 10) throw ValidationError("time-shift modulus needs at least 10 snapshots");
    const double t_end = traj.t_final();
    const Discretization& disc = *traj.disc;
    ShiftModulus out;
    for (double h : h_list) {
        if (!(h >= 0.0) || h >= t_end) throw ValidationError("shift h = " + std::to_string(h) + " must lie in [0, T)");
        double m = 0.0;
        if (h > 0.0) {
            const std::vector<double> g = detail::grid_between(traj.times, 0.0, t_end - h);
            std::vector<double> f(g.size());
            for (std::size_t k = 0; k < g.size(); ++k) f[k] = detail::lp_power(disc, traj.at(g[k] + h) - traj.at(g[k]), traj.p);
            m = detail::trapezoid(g, f);
        }
        out.h.push_back(h);
        out.modulus.push_back(m);
    }
    out.slope = detail::loglog_slope(out.h, out.modulus);
    return out;
}

struct ChainRuleResult {
    double h = 0.0;
    double s = 0.0, t = 0.0;
    double energy_change = 0.0; // H(t) - H(s)
    double minus = 0.0;         // int_s^t <v, D_h^- v_p> - (H(t) - H(s))
    double plus = 0.0;          // same with D_h^+
};

/// Difference-quotient form of the chain rule d/dt H = <v, d/dt v_p> on [s, t]
/// (default s = T/4, t = 3T/4), with D_h^- g(r) = (g(r) - g(r-h))/h and
/// D_h^+ g(r) = (g(r+h) - g(r))/h. Returns signed defects; both are O(h).
inline ChainRuleResult chain_rule_check(const Trajectory& traj, double h, double s = -1.0, double t = -1.0) {
    const double t_end = traj.t_final();
    if (s < 0.0) s = 0.25 * t_end;
    if (t < 0.0) t = 0.75 * t_end;
    if (!(h > 0.0) || h > t_end / 4.0) throw ValidationError("chain-rule shift h must lie in (0, T/4]");
    if (!(s >= h) || !(t + h <= t_end) || !(s < t)) throw ValidationError("chain-rule window out of range");
    const Exponent ex(traj.p);
    const Discretization& disc = *traj.disc;
    const BasisTable& tb = disc.table;
    auto vp_nodes = [&](const Eigen::VectorXd& x, Eigen::VectorXd& px, Eigen::VectorXd& py) {
        px = tb.vx * x;
        py = tb.vy * x;
        for (Eigen::Index q = 0; q < px.size(); ++q) {
            const Eigen::Vector2d w = v_p_of({px[q], py[q]}, ex);
            px[q] = w[0];
            py[q] = w[1];
        }
    };
    const std::vector<double> g = detail::grid_between(traj.times, s, t);
    std::vector<double> fm(g.size()), fp(g.size());
    Eigen::VectorXd ax, ay, bx, by, cx, cy;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Eigen::VectorXd x = traj.at(g[k]);
        const Eigen::VectorXd vx = tb.vx * x, vy = tb.vy * x;
        vp_nodes(x, ax, ay);
        vp_nodes(traj.at(g[k] - h), bx, by);
        vp_nodes(traj.at(g[k] + h), cx, cy);
        double m = 0.0, p = 0.0;
        for (Eigen::Index q = 0; q < vx.size(); ++q) {
            const double w = tb.weights[q];
            m += w * (vx[q] * (ax[q] - bx[q]) + vy[q] * (ay[q] - by[q]));
            p += w * (vx[q] * (cx[q] - ax[q]) + vy[q] * (cy[q] - ay[q]));
        }
        fm[k] = m / h;
        fp[k] = p / h;
    }
    ChainRuleResult r;
    r.h = h;
    r.s = s;
    r.t = t;
    r.energy_change = (detail::lp_power(disc, traj.at(t), ex.p()) - detail::lp_power(disc, traj.at(s), ex.p())) / ex.q();
    r.minus = detail::trapezoid(g, fm) - r.energy_change;
    r.plus = detail::trapezoid(g, fp) - r.energy_change;
    return r;
}

struct GnRatio {
    double v = 0.0;  // ||v||_{2p}^{2p} / (||grad v||_p^d ||v||_p^{2p-d})
    double vp = 0.0; // ||v_p||_r^r / (||grad v_p||_q^{d/(2p-3)} ||v_p||_q^{(2p-d)/(2p-3)}), r = 2p/(2p-3)
};

/// Gagliardo-Nirenberg ratios for v and v_p in d = 2, with
/// d_i (v_p)_j = |v|^{p-2} d_i v_j + (p-2)|v|^{p-4} (v . d_i v) v_j.
inline GnRatio gn_ratio(const Discretization& disc, const Eigen::VectorXd& x, const Exponent& ex) {
    if (x.isZero(0.0)) throw ValidationError("Gagliardo-Nirenberg ratio of the zero state is undefined");
    constexpr double d = 2.0;
    const double p = ex.p(), q = ex.q(), r = 2.0 * p / (2.0 * p - 3.0);
    const NodeFields f = evaluate_nodes(disc.table, x);
    double v2p = 0, vp = 0, gp = 0, wr = 0, wq = 0, gwq = 0;
    for (Eigen::Index k = 0; k < f.nodes(); ++k) {
        const double w = disc.table.weights[k];
        const Eigen::Vector2d v = f.v(k);
        const Eigen::Matrix2d g = f.grad(k);
        const double sp = v.norm();
        v2p += w * std::pow(sp, 2.0 * p);
        vp += w * std::pow(sp, p);
        gp += w * std::pow(g.norm(), p);
        const Eigen::Vector2d u = v_p_of(v, ex);
        Eigen::Matrix2d gu = Eigen::Matrix2d::Zero();
        if (sp > 0.0) {
            gu = std::pow(sp, p - 2.0) * g;
            if (p > 2.0) gu += (p - 2.0) * std::pow(sp, p - 4.0) * (g * v) * v.transpose();
        }
        wr += w * std::pow(u.norm(), r);
        wq += w * std::pow(u.norm(), q);
        gwq += w * std::pow(gu.norm(), q);
    }
    GnRatio out;
    out.v = v2p / (std::pow(gp, d / p) * std::pow(vp, (2.0 * p - d) / p));
    out.vp = wr / (std::pow(gwq, d / (2.0 * p - 3.0) / q) * std::pow(wq, (2.0 * p - d) / (2.0 * p - 3.0) / q));
    if (!std::isfinite(out.v) || !std::isfinite(out.vp)) throw NumericalError("Gagliardo-Nirenberg ratio is not finite");
    return out;
}

/// Space part of a test function: value and gradient (grad(a, b) = d_a phi_b).
using TestSpace = std::function<FieldValue(double, double)>;

/// phi(x, t) = q(t) phi(x).
struct TestFunction {
    std::string label;
    std::function<double(double)> q;
    std::function<double(double)> dq;
    TestSpace space;
};

/// q_m(t) phi_k(x) with q_m = (1 - t/T)^m, m = 1..m_max, k = 0..k_max-1.
inline std::vector<TestFunction> standard_test_family(const Trajectory& traj, int m_max = 4, int k_max = -1) {
    const double t_end = traj.t_final();
    const auto n = static_cast<int>(traj.disc->size());
    if (k_max < 0 || k_max > n) k_max = n;
    std::vector<TestFunction> out;
    const std::shared_ptr<const Discretization> disc = traj.disc;
    for (int m = 1; m <= m_max; ++m)
        for (int k = 0; k < k_max; ++k) {
            TestFunction tf;
            tf.label = "m=" + std::to_string(m) + ",k=" + std::to_string(k + 1);
            tf.q = [m, t_end](double t) { return std::pow(1.0 - t / t_end, m); };
            tf.dq = [m, t_end](double t) { return -m / t_end * std::pow(1.0 - t / t_end, m - 1); };
            tf.space = [disc, k](double x, double y) { return disc->basis.evaluate(static_cast<std::size_t>(k), x, y); };
            out.push_back(std::move(tf));
        }
    return out;
}

struct WeakResidualRow {
    std::string label;
    double time_term = 0.0;      // int int v_p . d_t phi
    double transport_term = 0.0; // int int grad phi : (v (x) v_p)
    double viscous_term = 0.0;   // -nu int int grad phi : |D|^{p-2} D
    double initial_term = 0.0;   // int |v0|^{p-2} v0 . phi(., 0)
    double residual = 0.0;
    double scale = 0.0; // largest term magnitude
};

struct WeakResidualReport {
    std::vector<WeakResidualRow> rows;
    double max_abs = 0.0;
    double max_relative = 0.0;
};

/// Residual of the weak formulation for each test function, space integrals on
/// the trajectory's rule, time integrals by trapezoid over snapshots.
/// grad phi : (v (x) v_p) = sum_ab d_a phi_b v_a (v_p)_b.
inline WeakResidualReport weak_residual(const Trajectory& traj, const std::vector<TestFunction>& tests) {
    const Exponent ex(traj.p);
    const Discretization& disc = *traj.disc;
    const QuadratureRule& rule = disc.rule;
    const auto nq = static_cast<Eigen::Index>(rule.size_2d());
    const auto nt = static_cast<Eigen::Index>(tests.size());
    const BasisTable& tb = disc.table;

    // Test fields at the nodes: columns are tests.
    Eigen::MatrixXd px(nq, nt), py(nq, nt), g00(nq, nt), g01(nq, nt), g10(nq, nt), g11(nq, nt);
    for (Eigen::Index i = 0; i < nt; ++i) {
        const TestFunction& tf = tests[static_cast<std::size_t>(i)];
        double div_max = 0.0, grad_max = 0.0;
        for (Eigen::Index q = 0; q < nq; ++q) {
            const FieldValue fv = tf.space(rule.x(q), rule.y(q));
            px(q, i) = fv.value[0];
            py(q, i) = fv.value[1];
            g00(q, i) = fv.grad(0, 0);
            g01(q, i) = fv.grad(0, 1);
            g10(q, i) = fv.grad(1, 0);
            g11(q, i) = fv.grad(1, 1);
            div_max = std::max(div_max, std::abs(fv.grad.trace()));
            grad_max = std::max(grad_max, fv.grad.cwiseAbs().maxCoeff());
        }
        if (div_max > 1e-10 * std::max(1.0, grad_max)) {
            throw ValidationError("test function " + tf.label + " is not divergence-free (|div| = " +
                                  std::to_string(div_max) + ")");
        }
    }

    // Per snapshot: <v_p, phi_i>, <grad phi_i : v (x) v_p>, <grad phi_i : |D|^{p-2} D>.
    const std::size_t ns = traj.snapshots();
    Eigen::MatrixXd mass(nt, static_cast<Eigen::Index>(ns)), adv(nt, static_cast<Eigen::Index>(ns)),
        visc(nt, static_cast<Eigen::Index>(ns));
    Eigen::VectorXd ux(nq), uy(nq), a00(nq), a01(nq), a10(nq), a11(nq), s00(nq), s01(nq), s10(nq), s11(nq);
    for (std::size_t k = 0; k < ns; ++k) {
        const NodeFields f = evaluate_nodes(tb, traj.coeffs[k]);
        for (Eigen::Index q = 0; q < nq; ++q) {
            const double w = tb.weights[q];
            const Eigen::Vector2d v = f.v(q);
            const Eigen::Vector2d u = v_p_of(v, ex);
            const Eigen::Matrix2d sd = stress_of(symmetric_part(f.grad(q)), ex);
            ux[q] = w * u[0];
            uy[q] = w * u[1];
            a00[q] = w * v[0] * u[0];
            a01[q] = w * v[0] * u[1];
            a10[q] = w * v[1] * u[0];
            a11[q] = w * v[1] * u[1];
            s00[q] = w * sd(0, 0);
            s01[q] = w * sd(0, 1);
            s10[q] = w * sd(1, 0);
            s11[q] = w * sd(1, 1);
        }
        const auto c = static_cast<Eigen::Index>(k);
        mass.col(c) = px.transpose() * ux + py.transpose() * uy;
        adv.col(c) = g00.transpose() * a00 + g01.transpose() * a01 + g10.transpose() * a10 + g11.transpose() * a11;
        visc.col(c) = g00.transpose() * s00 + g01.transpose() * s01 + g10.transpose() * s10 + g11.transpose() * s11;
    }

    WeakResidualReport rep;
    std::vector<double> ft(ns), fa(ns), fv(ns);
    for (Eigen::Index i = 0; i < nt; ++i) {
        const TestFunction& tf = tests[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < ns; ++k) {
            const double t = traj.times[k];
            const auto c = static_cast<Eigen::Index>(k);
            ft[k] = tf.dq(t) * mass(i, c);
            fa[k] = tf.q(t) * adv(i, c);
            fv[k] = -traj.nu * tf.q(t) * visc(i, c);
        }
        WeakResidualRow row;
        row.label = tf.label;
        row.time_term = detail::trapezoid(traj.times, ft);
        row.transport_term = detail::trapezoid(traj.times, fa);
        row.viscous_term = detail::trapezoid(traj.times, fv);
        row.initial_term = ns > 0 ? tf.q(traj.times.front()) * mass(i, 0) : 0.0;
        row.residual = row.time_term + row.transport_term + row.viscous_term + row.initial_term;
        row.scale = std::max({std::abs(row.time_term), std::abs(row.transport_term), std::abs(row.viscous_term),
                              std::abs(row.initial_term)});
        rep.max_abs = std::max(rep.max_abs, std::abs(row.residual));
        if (row.scale > 0.0) rep.max_relative = std::max(rep.max_relative, std::abs(row.residual) / row.scale);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

/// Space-time distance (int_0^T int |v_a - v_b|^p)^{1/p} on a uniform grid of
/// `samples` times, with both fields evaluated on a common rule.
inline double spacetime_distance(const Trajectory& a, const Trajectory& b, const QuadratureRule& rule,
                                 std::size_t samples = 201) {
    if (a.p != b.p) throw ValidationError("trajectories have different exponents");
    const double t_end = std::min(a.t_final(), b.t_final());
    const BasisTable ta = a.disc->basis.tabulate(rule), tb = b.disc->basis.tabulate(rule);
    std::vector<double> g(samples), f(samples);
    for (std::size_t k = 0; k < samples; ++k) {
        g[k] = t_end * static_cast<double>(k) / static_cast<double>(samples - 1);
        const Eigen::VectorXd xa = a.at(g[k]), xb = b.at(g[k]);
        const Eigen::VectorXd dx = ta.vx * xa - tb.vx * xb, dy = ta.vy * xa - tb.vy * xb;
        double s = 0.0;
        for (Eigen::Index q = 0; q < dx.size(); ++q) s += ta.weights[q] * std::pow(std::hypot(dx[q], dy[q]), a.p);
        f[k] = s;
    }
    return std::pow(detail::trapezoid(g, f), 1.0 / a.p);
}

struct SweepEntry {
    Eigen::Index n = 0;
    double sup_lp = 0.0;     // max_t ||v^N(t)||_p
    double initial_lp = 0.0; // ||v^N(0)||_p
    bool bounded = false;    // sup_lp <= initial_lp (1 + 1e-9)
};

struct SweepReport {
    std::vector<SweepEntry> runs;
    std::vector<std::vector<double>> distance; // pairwise L^p(0,T;L^p) distances
    std::vector<double> to_finest;             // distance of each run to the last
    bool decreasing = false;                   // to_finest nonincreasing along the list (trend only)
};

/// Empirical Cauchy check across a list of runs, ordered by ascending N.
inline SweepReport convergence_sweep(const std::vector<Trajectory>& runs, const QuadratureRule& rule) {
    SweepReport rep;
    const std::size_t m = runs.size();
    for (std::size_t i = 1; i < m; ++i)
        if (runs[i].disc->size() < runs[i - 1].disc->size()) throw ValidationError("N list must be ascending");
    for (const Trajectory& tr : runs) {
        SweepEntry e;
        e.n = tr.disc->size();
        e.initial_lp = std::pow(detail::lp_power(*tr.disc, tr.coeffs.front(), tr.p), 1.0 / tr.p);
        for (const auto& x : tr.coeffs) e.sup_lp = std::max(e.sup_lp, std::pow(detail::lp_power(*tr.disc, x, tr.p), 1.0 / tr.p));
        e.bounded = e.sup_lp <= e.initial_lp * (1.0 + 1e-9);
        rep.runs.push_back(e);
    }
    rep.distance.assign(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) rep.distance[i][j] = rep.distance[j][i] = spacetime_distance(runs[i], runs[j], rule);
    if (m > 0)
        for (std::size_t i = 0; i < m; ++i) rep.to_finest.push_back(rep.distance[i][m - 1]);
    rep.decreasing = true;
    for (std::size_t i = 1; i + 1 < m; ++i)
        if (rep.to_finest[i] > rep.to_finest[i - 1]) rep.decreasing = false;
    return rep;
}

struct NormReport {
    double lp_v = 0.0;      // int |v|^p
    double lq_vp = 0.0;     // int |v_p|^q
    double korn = 0.0;      // ||grad v||_p / ||D(v)||_p
    double inverse = 0.0;   // max |(v_p)_q - v| / max |v|
    double qn_l2 = 0.0;     // ||Q_N v||_2 from the coefficients
};

/// Norm bookkeeping on one state: int |v_p|^q must equal int |v|^p, (v_p)_q = v
/// pointwise, and the Korn ratio between the full and symmetric gradients.
inline NormReport norm_report(const Discretization& disc, const Eigen::VectorXd& x, const Exponent& ex) {
    const NodeFields f = evaluate_nodes(disc.table, x);
    NormReport r;
    double g = 0.0, d = 0.0, inv = 0.0, vmax = 0.0;
    for (Eigen::Index k = 0; k < f.nodes(); ++k) {
        const double w = disc.table.weights[k];
        const Eigen::Vector2d v = f.v(k);
        const Eigen::Vector2d u = v_p_of(v, ex);
        const double un = u.norm();
        const Eigen::Vector2d back = un > 0.0 ? Eigen::Vector2d(std::pow(un, ex.q() - 2.0) * u) : Eigen::Vector2d::Zero();
        r.lp_v += w * std::pow(v.norm(), ex.p());
        r.lq_vp += w * std::pow(un, ex.q());
        g += w * std::pow(f.grad(k).norm(), ex.p());
        d += w * std::pow(symmetric_part(f.grad(k)).norm(), ex.p());
        inv = std::max(inv, (back - v).norm());
        vmax = std::max(vmax, v.norm());
    }
    r.korn = d > 0.0 ? std::pow(g / d, 1.0 / ex.p()) : 0.0;
    r.inverse = vmax > 0.0 ? inv / vmax : 0.0;
    r.qn_l2 = std::sqrt(std::max(0.0, x.dot(disc.basis.gram_l2() * x)));
    return r;
}

} // namespace pnsg
