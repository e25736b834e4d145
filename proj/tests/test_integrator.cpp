#include <gtest/gtest.h>

#include "pnsg/cli.hpp"

using namespace pnsg;

namespace {

std::shared_ptr<const Discretization> disc(int n, double p, int order = 0) {
    BasisSet b = make_basis("spectral", n, 4);
    const int o = order > 0 ? order : auto_quad_order(p, b);
    return std::make_shared<const Discretization>(std::move(b), build_rule(o));
}

Eigen::VectorXd two_mode(Eigen::Index n) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    x[0] = 1.0;
    x[1] = 0.5;
    return x;
}

IntegratorOptions opts(double t_final, double tol = 1e-5) {
    IntegratorOptions o;
    o.t_final = t_final;
    o.tol_energy = tol;
    return o;
}

// Fixed-step run to T with n steps.
Eigen::VectorXd fixed_run(const std::shared_ptr<const Discretization>& d, const Eigen::VectorXd& x0, double p, double nu,
                          double t_final, int steps) {
    IntegratorOptions o = opts(t_final);
    o.adaptive = false;
    o.dt_initial = o.dt_max = t_final / steps;
    return integrate(d, x0, Exponent(p), nu, o).coeffs.back();
}

} // namespace

TEST(Integrator, MidpointIsSecondOrder) {
    for (double p : {2.0, 3.0}) {
        const auto d = disc(6, p, p == 2.0 ? 0 : 32);
        const Eigen::VectorXd x0 = two_mode(6);
        const Eigen::VectorXd ref = fixed_run(d, x0, p, 0.5, 0.02, 256);
        const double e1 = (fixed_run(d, x0, p, 0.5, 0.02, 8) - ref).norm();
        const double e2 = (fixed_run(d, x0, p, 0.5, 0.02, 16) - ref).norm();
        EXPECT_NEAR(e1 / e2, 4.0, 0.6) << "p=" << p;
    }
}

TEST(Integrator, StepSolvesMidpointEquation) {
    const auto d = disc(6, 3.0, 32);
    const Eigen::VectorXd x = two_mode(6);
    const Exponent ex(3);
    const StepResult s = step_implicit_midpoint(*d, x, 1e-3, ex, 0.3, 1e-12, 30);
    ASSERT_TRUE(s.converged);
    const Eigen::VectorXd xm = 0.5 * (x + s.x_new);
    const AssembledSystem sys = assemble(*d, xm, ex, 0.3);
    const Eigen::VectorXd r = sys.a_matrix * (s.x_new - x) - 1e-3 * sys.f_vector;
    EXPECT_LE(r.norm(), 1e-11 * (sys.a_matrix * xm).norm());
    EXPECT_NEAR(s.dissipation_mid, 0.3 * sys.int_d_p, 1e-12 * s.dissipation_mid);
}

TEST(Integrator, EnergyLawAndMonotoneDecay) {
    const auto d = disc(9, 4.0);
    const Trajectory tr = integrate(d, two_mode(9), Exponent(4), 0.5, opts(0.1));
    ASSERT_GE(tr.trace.size(), 2u);
    const double h0 = tr.trace.front().energy;
    EXPECT_EQ(tr.trace.front().t, 0.0);
    EXPECT_DOUBLE_EQ(tr.trace.back().t, 0.1);
    EXPECT_LE(std::abs(tr.trace.back().energy_residual), 1e-5 * h0);
    EXPECT_NEAR(h0 - tr.trace.back().energy, tr.dissipated, 1e-5 * h0);
    for (std::size_t k = 1; k < tr.trace.size(); ++k) {
        EXPECT_LT(tr.trace[k].energy, tr.trace[k - 1].energy);
        EXPECT_GT(tr.trace[k].energy, 0.0);
        EXPECT_FALSE(tr.trace[k].chol_shift);
    }
}

TEST(Integrator, AdaptiveStepsMeetTheirTargets) {
    const auto d = disc(6, 3.0, 32);
    const Trajectory tr = integrate(d, two_mode(6), Exponent(3), 0.2, opts(0.2, 1e-6));
    const double h0 = tr.trace.front().energy;
    for (std::size_t k = 1; k < tr.trace.size(); ++k) {
        const double step_defect = tr.trace[k].energy_residual - tr.trace[k - 1].energy_residual;
        EXPECT_LE(std::abs(step_defect), 1e-6 * h0 * tr.trace[k].dt / 0.2 * (1 + 1e-9));
    }
}

TEST(Integrator, Deterministic) {
    const auto d = disc(6, 3.0, 32);
    const Trajectory a = integrate(d, two_mode(6), Exponent(3), 0.2, opts(0.05));
    const Trajectory b = integrate(d, two_mode(6), Exponent(3), 0.2, opts(0.05));
    ASSERT_EQ(a.snapshots(), b.snapshots());
    for (std::size_t k = 0; k < a.snapshots(); ++k) EXPECT_EQ((a.coeffs[k] - b.coeffs[k]).norm(), 0.0);
}

// Reversing the basis order must not change the physics.
TEST(Integrator, PermutationEquivariantEnergyTrace) {
    const BasisSet b = make_basis("spectral", 6, 4);
    const BasisSet r("spectral", b.pool(), b.combination().colwise().reverse().eval(), true);
    const auto d1 = std::make_shared<const Discretization>(b, build_rule(32));
    const auto d2 = std::make_shared<const Discretization>(r, build_rule(32));
    const Eigen::VectorXd x0 = two_mode(6);
    IntegratorOptions o = opts(0.05);
    o.adaptive = false;
    o.dt_initial = o.dt_max = 0.05 / 20;
    const Trajectory a = integrate(d1, x0, Exponent(3), 0.2, o);
    const Trajectory c = integrate(d2, Eigen::VectorXd(x0.reverse()), Exponent(3), 0.2, o);
    ASSERT_EQ(a.trace.size(), c.trace.size());
    for (std::size_t k = 0; k < a.trace.size(); ++k)
        EXPECT_NEAR(a.trace[k].energy, c.trace[k].energy, 1e-10 * a.trace[0].energy);
}

TEST(Integrator, SnapshotThinningKeepsEndpoints) {
    const auto d = disc(4, 2.0);
    IntegratorOptions o = opts(0.1);
    o.adaptive = false;
    o.dt_initial = o.dt_max = 0.1 / 100;
    o.max_snapshots = 16;
    const Trajectory tr = integrate(d, two_mode(4), Exponent(2), 0.5, o);
    EXPECT_LE(tr.snapshots(), 17u);
    EXPECT_EQ(tr.times.front(), 0.0);
    EXPECT_DOUBLE_EQ(tr.times.back(), 0.1);
    EXPECT_EQ(tr.trace.size(), 101u);
    for (std::size_t k = 1; k < tr.snapshots(); ++k) EXPECT_LT(tr.times[k - 1], tr.times[k]);
}

TEST(Integrator, InterpolationAndEndpoints) {
    const auto d = disc(4, 2.0);
    const Trajectory tr = integrate(d, two_mode(4), Exponent(2), 0.5, opts(0.05));
    EXPECT_EQ((tr.at(-1.0) - tr.coeffs.front()).norm(), 0.0);
    EXPECT_EQ((tr.at(1.0) - tr.coeffs.back()).norm(), 0.0);
    EXPECT_EQ((tr.at(tr.times[2]) - tr.coeffs[2]).norm(), 0.0);
    const double tm = 0.5 * (tr.times[1] + tr.times[2]);
    EXPECT_NEAR((tr.at(tm) - 0.5 * (tr.coeffs[1] + tr.coeffs[2])).norm(), 0.0, 1e-15);
}

TEST(Integrator, RejectsInvalidInput) {
    const auto d = disc(4, 2.0);
    const Exponent ex(2);
    EXPECT_THROW(integrate(d, Eigen::VectorXd::Zero(4), ex, 1.0, opts(1)), ValidationError);
    EXPECT_THROW(integrate(d, two_mode(4), ex, 0.0, opts(1)), ValidationError);
    EXPECT_THROW(integrate(d, two_mode(4), ex, 1.0, opts(-1)), ValidationError);
    EXPECT_THROW(integrate(d, two_mode(5), ex, 1.0, opts(1)), ValidationError);
    EXPECT_THROW(step_implicit_midpoint(*d, two_mode(4), 0.0, ex, 1.0, 1e-12, 10), ValidationError);
    EXPECT_THROW(step_implicit_midpoint(*d, Eigen::VectorXd::Zero(4), 0.1, ex, 1.0, 1e-12, 10), ValidationError);
}

// A tolerance below the quadrature floor cannot be met; the run stops with the
// partial trajectory attached.
TEST(Integrator, UnderflowCarriesPartialTrajectory) {
    const auto d = disc(6, 3.0, 8);
    IntegratorOptions o = opts(1.0, 1e-14);
    o.dt_min = 1e-4;
    try {
        integrate(d, two_mode(6), Exponent(3), 1.0, o);
        FAIL() << "expected underflow";
    } catch (const IntegrationError& e) {
        EXPECT_GE(e.partial().trace.size(), 1u);
        EXPECT_EQ(e.exit_code(), ExitCode::numerical);
    }
}

TEST(Integrator, SpdSolveShiftFallback) {
    Eigen::MatrixXd a(2, 2);
    a << 1, 0, 0, 0;
    bool shifted = false;
    const Eigen::VectorXd x = detail::spd_solve(a, Eigen::Vector2d(1, 0), shifted);
    EXPECT_TRUE(shifted);
    EXPECT_NEAR(x[0], 1.0, 1e-10);
    Eigen::MatrixXd neg = -Eigen::MatrixXd::Identity(2, 2);
    EXPECT_THROW(detail::spd_solve(neg, Eigen::Vector2d(1, 0), shifted), NumericalError);
}
