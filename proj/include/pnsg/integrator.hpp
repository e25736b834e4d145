#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "pnsg/galerkin_system.hpp"

namespace pnsg {

struct IntegratorOptions {
    double t_final = 1.0;
    double tol_energy = 1e-5;
    double newton_tol = 1e-12;
    int max_newton = 30;
    double dt_initial = 0.0; // 0: t_final / 100
    double dt_min = 1e-9;
    double dt_max = 0.0;     // 0: t_final / 10
    bool adaptive = true;
    int threads = 1;
    std::size_t max_snapshots = 10000;
};

/// One row of the energy trace, written at t = 0 and after every accepted step.
struct TraceRow {
    double t = 0.0;
    double energy = 0.0;            // H = (1/q) int |v|^p
    double dissipation_rate = 0.0;  // nu int |D(v)|^p
    double energy_residual = 0.0;   // H(t) - H(0) + nu int_0^t int |D(v)|^p, cumulative
    double dt = 0.0;
    int newton_iters = 0;
    double min_speed = 0.0;
    bool chol_shift = false;
};

struct Trajectory {
    std::shared_ptr<const Discretization> disc;
    double p = 2.0;
    double nu = 1.0;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> coeffs;
    std::vector<TraceRow> trace;
    double dissipated = 0.0; // nu int_0^T int |D(v)|^p, Simpson per step
    int rejected_steps = 0;

    std::size_t snapshots() const noexcept { return times.size(); }
    double t_final() const { return times.empty() ? 0.0 : times.back(); }

    /// Linear interpolation of the coefficients at time t in [t_0, t_end].
    Eigen::VectorXd at(double t) const {
        if (times.empty()) throw ValidationError("empty trajectory");
        if (t <= times.front()) return coeffs.front();
        if (t >= times.back()) return coeffs.back();
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        const std::size_t k = static_cast<std::size_t>(it - times.begin());
        const double t0 = times[k - 1], t1 = times[k];
        const double s = (t - t0) / (t1 - t0);
        return (1.0 - s) * coeffs[k - 1] + s * coeffs[k];
    }
};

/// Thrown when the step size underflows; carries everything integrated so far.
class IntegrationError : public NumericalError {
public:
    IntegrationError(const std::string& what, Trajectory partial)
        : NumericalError(what), partial_(std::move(partial)) {}
    const Trajectory& partial() const noexcept { return partial_; }

private:
    Trajectory partial_;
};

struct StepResult {
    Eigen::VectorXd x_new;
    bool converged = false;
    int newton_iters = 0;
    bool chol_shift = false;
    double dissipation_mid = 0.0; // nu int |D|^p at the midpoint state
};

namespace detail {

/// Solves a x = b with A symmetric; if Cholesky fails, retries with
/// A + 1e-12 tr(A)/N I and reports the shift.
inline Eigen::VectorXd spd_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, bool& shifted) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) return llt.solve(b);
    shifted = true;
    const double delta = 1e-12 * a.trace() / static_cast<double>(a.rows());
    Eigen::MatrixXd as = a;
    as.diagonal().array() += std::max(delta, std::numeric_limits<double>::min());
    llt.compute(as);
    if (llt.info() != Eigen::Success) throw NumericalError("A^N is not positive definite even after shifting");
    return llt.solve(b);
}

} // namespace detail

/// Implicit midpoint step for A(X) X' = F(X):
///   A(Xm) (Y - X) = dt F(Xm),  Xm = (X + Y) / 2,
/// solved by Newton with a forward-difference Jacobian frozen for the step.
/// Converged when |r| <= newton_tol |A(Xm) Xm|.
inline StepResult step_implicit_midpoint(const Discretization& disc, const Eigen::VectorXd& x, double dt,
                                         const Exponent& p, double nu, double newton_tol, int max_newton,
                                         int threads = 1) {
    if (!(dt > 0.0)) throw ValidationError("time step must be positive");
    if (x.isZero(0.0)) throw ValidationError("implicit midpoint step from the zero state");
    StepResult out;
    const Eigen::Index n = x.size();
    double dissipation_mid = 0.0;
    double scale = 0.0;
    auto residual = [&](const Eigen::VectorXd& y) {
        const SystemAction act = apply_system(disc, 0.5 * (x + y), y - x, p, nu);
        dissipation_mid = nu * act.int_d_p;
        scale = act.a_x.norm();
        return Eigen::VectorXd(act.a_w - dt * act.f_vector);
    };
    auto small = [&](const Eigen::VectorXd& r) {
        return r.allFinite() && r.norm() <= newton_tol * std::max(scale, std::numeric_limits<double>::min());
    };

    const AssembledSystem s0 = assemble(disc, x, p, nu, AssemblyParts::both, threads);
    Eigen::VectorXd y = x + dt * detail::spd_solve(s0.a_matrix, s0.f_vector, out.chol_shift);

    const Eigen::VectorXd r0 = residual(y);
    // Relative step: states decay by many orders of magnitude and the system is
    // homogeneous in X, so an absolute floor would swamp small coefficients.
    const double h = std::sqrt(std::numeric_limits<double>::epsilon()) * y.norm();
    Eigen::MatrixXd jac(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXd yj = y;
        yj[j] += h;
        jac.col(j) = (residual(yj) - r0) / h;
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    Eigen::VectorXd r = residual(y);
    int it = 0;
    for (; it < max_newton; ++it) {
        if (small(r) || !r.allFinite()) break;
        y -= lu.solve(r);
        r = residual(y);
    }
    out.converged = small(r);
    out.newton_iters = it;
    out.x_new = y;
    out.dissipation_mid = dissipation_mid;
    return out;
}

/// Adaptive integration to t_final. Each step is accepted when its energy
/// defect H(Y) - H(X) + (Simpson estimate of nu int |D|^p over the step) is at
/// most tol_energy H(0) dt / T.
inline Trajectory integrate(std::shared_ptr<const Discretization> disc, const Eigen::VectorXd& x0, const Exponent& p,
                            double nu, const IntegratorOptions& opt) {
    if (!(nu > 0.0)) throw ValidationError("viscosity nu must be positive");
    if (!(opt.t_final > 0.0)) throw ValidationError("t_final must be positive");
    if (x0.size() != disc->size()) throw ValidationError("initial coefficients do not match the basis");
    if (!x0.allFinite()) throw ValidationError("initial coefficients are not finite");
    if (x0.isZero(0.0)) throw ValidationError("zero initial data is trivial; nothing to integrate");

    const double t_end = opt.t_final;
    const double dt_max = opt.dt_max > 0.0 ? opt.dt_max : t_end / 10.0;
    double dt = std::min(opt.dt_initial > 0.0 ? opt.dt_initial : t_end / 100.0, dt_max);

    Trajectory traj;
    traj.disc = disc;
    traj.p = p.p();
    traj.nu = nu;

    auto measure = [&](const Eigen::VectorXd& x, double& h, double& diss, double& min_speed) {
        const AssembledSystem s = assemble(*disc, x, p, nu, AssemblyParts::rhs, opt.threads);
        h = s.int_v_p / p.q();
        diss = nu * s.int_d_p;
        min_speed = s.diagnostics.min_speed;
    };

    Eigen::VectorXd x = x0;
    double t = 0.0, h_cur = 0.0, d_cur = 0.0, min_speed = 0.0;
    measure(x, h_cur, d_cur, min_speed);
    const double h0 = h_cur;
    if (!(h0 > 0.0)) throw ValidationError("initial energy is zero; nothing to integrate");
    traj.times.push_back(0.0);
    traj.coeffs.push_back(x);
    traj.trace.push_back({0.0, h0, d_cur, 0.0, 0.0, 0, min_speed, false});

    std::size_t stride = 1, since_snapshot = 0;
    int easy = 0;
    double cumulative = 0.0;
    while (t < t_end) {
        double step = std::min(dt, t_end - t);
        // Avoid a sliver final step.
        if (t_end - (t + step) < 1e-3 * step) step = t_end - t;
        if (step < opt.dt_min && step < t_end - t) {
            throw IntegrationError("time step underflow at t = " + std::to_string(t) + " (the energy defect no longer shrinks with dt; raise quad_order or tol_energy)", traj);
        }
        StepResult sr = step_implicit_midpoint(*disc, x, step, p, nu, opt.newton_tol, opt.max_newton, opt.threads);
        bool accept = sr.converged && sr.x_new.allFinite();
        double h_new = 0.0, d_new = 0.0, ms = 0.0, defect = 0.0;
        const double target = opt.tol_energy * h0 * step / t_end;
        if (accept) {
            measure(sr.x_new, h_new, d_new, ms);
            const double dissipated = step / 6.0 * (d_cur + 4.0 * sr.dissipation_mid + d_new);
            defect = h_new - h_cur + dissipated;
            if (!std::isfinite(h_new) || !(h_new > 0.0)) accept = false;
            if (opt.adaptive && std::abs(defect) > target) accept = false;
            if (accept) {
                traj.dissipated += dissipated;
            }
        }
        if (!accept) {
            ++traj.rejected_steps;
            if (!opt.adaptive && sr.converged) {
                throw IntegrationError("non-adaptive step produced invalid state at t = " + std::to_string(t), traj);
            }
            dt = 0.5 * step;
            easy = 0;
            if (dt < opt.dt_min) throw IntegrationError("time step underflow at t = " + std::to_string(t) + " (the energy defect no longer shrinks with dt; raise quad_order or tol_energy)", traj);
            continue;
        }

        t = (step == t_end - t) ? t_end : t + step;
        x = sr.x_new;
        h_cur = h_new;
        d_cur = d_new;
        cumulative += defect;
        traj.trace.push_back({t, h_new, d_new, cumulative, step, sr.newton_iters, ms, sr.chol_shift});

        if (++since_snapshot >= stride || t == t_end) {
            since_snapshot = 0;
            traj.times.push_back(t);
            traj.coeffs.push_back(x);
            if (traj.times.size() > opt.max_snapshots) {
                // Thin uniformly: keep every other snapshot, always keeping the last.
                std::vector<double> tt;
                std::vector<Eigen::VectorXd> cc;
                for (std::size_t k = 0; k < traj.times.size(); k += 2) {
                    tt.push_back(traj.times[k]);
                    cc.push_back(traj.coeffs[k]);
                }
                if (tt.back() != traj.times.back()) {
                    tt.push_back(traj.times.back());
                    cc.push_back(traj.coeffs.back());
                }
                traj.times = std::move(tt);
                traj.coeffs = std::move(cc);
                stride *= 2;
            }
        }

        if (opt.adaptive) {
            // The defect scales like dt^3 against a target linear in dt, so doubling
            // multiplies the ratio by about 4.
            if (std::abs(defect) <= 0.2 * target) {
                if (++easy >= 5) {
                    dt = std::min(2.0 * step, dt_max);
                    easy = 0;
                }
            } else {
                easy = 0;
            }
        }
    }
    return traj;
}

} // namespace pnsg
