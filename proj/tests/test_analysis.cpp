#include <gtest/gtest.h>

#include "pnsg/cli.hpp"

using namespace pnsg;

namespace {

Trajectory run(int n, double p, double nu, double t_final, int order = 0) {
    SolverConfig c;
    c.p = p;
    c.nu = nu;
    c.n_basis = n;
    c.pool_per_axis = 5;
    c.t_final = t_final;
    c.quad_order = order;
    const auto d = make_discretization(c);
    return integrate(d, initial_state(c, *d).coeffs, Exponent(p), nu, integrator_options(c));
}

} // namespace

TEST(Inequalities, GadyQuadraticIsIdentity) {
    const InequalityReport r = check_gady(2.0, 20000, 1);
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.worst, 1.0, 1e-12);
}

TEST(Inequalities, GadyPositiveAndQuarticWitness) {
    for (double p : {2.5, 3.0, 4.0, 6.0}) {
        const InequalityReport r = check_gady(p, 20000, 2);
        EXPECT_TRUE(r.pass) << p;
        EXPECT_GT(r.worst, 0.0) << p;
    }
    EXPECT_LE(check_gady(4.0, 20000, 3).worst, 0.25 + 1e-9);
    // Pair where the ratio attains 1/4 at p = 4: equal magnitudes, opposite directions.
    const Eigen::Vector2d a(1, 0), b(-1, 0);
    EXPECT_NEAR(detail::gady_ratio(a, b, 4.0), 0.25, 1e-14);
}

TEST(Inequalities, MonotoneAndHemicontinuousG) {
    for (double p : {2.0, 3.0, 4.0}) {
        EXPECT_TRUE(check_monotone_g(p, 20000, 4).pass) << p;
        EXPECT_TRUE(check_hemicontinuity(p, 20, 5).pass) << p;
    }
    Eigen::Matrix2d a;
    a << 1, 2, 2, -1;
    EXPECT_NEAR((g_operator(a, Exponent(3)) - a.norm() * a).norm(), 0.0, 1e-14);
}

TEST(Inequalities, Reproducible) {
    EXPECT_EQ(check_gady(3.0, 5000, 9).worst, check_gady(3.0, 5000, 9).worst);
    EXPECT_EQ(check_monotone_g(3.0, 5000, 9).worst, check_monotone_g(3.0, 5000, 9).worst);
}

TEST(Analysis, TimeShiftModulusGrowsWithShift) {
    const Trajectory tr = run(6, 3.0, 0.2, 0.4, 32);
    const ShiftModulus m = time_shift_modulus(tr, {0.4 / 64, 0.4 / 32, 0.4 / 16, 0.4 / 8});
    for (std::size_t k = 1; k < m.modulus.size(); ++k) EXPECT_GT(m.modulus[k], m.modulus[k - 1]);
    EXPECT_GE(m.slope, 0.9);
    EXPECT_EQ(time_shift_modulus(tr, {0.0}).modulus[0], 0.0);
    EXPECT_THROW(time_shift_modulus(tr, {0.5}), ValidationError);
}

TEST(Analysis, ChainRuleDefectShrinksWithShift) {
    const Trajectory tr = run(6, 3.0, 0.2, 0.4, 32);
    const double a = std::abs(chain_rule_check(tr, 0.4 / 16).minus), b = std::abs(chain_rule_check(tr, 0.4 / 32).minus);
    EXPECT_LT(b, a);
    EXPECT_THROW(chain_rule_check(tr, 0.2), ValidationError);
}

TEST(Analysis, WeakResidualSmallOnComputedRun) {
    const Trajectory tr = run(6, 4.0, 0.2, 0.2);
    const WeakResidualReport r = weak_residual(tr, standard_test_family(tr, 3));
    EXPECT_EQ(r.rows.size(), 18u);
    EXPECT_LE(r.max_relative, 1e-4);
}

// A trajectory that does not solve the equations has a large residual.
TEST(Analysis, WeakResidualDetectsWrongDynamics) {
    Trajectory tr = run(6, 4.0, 0.2, 0.2);
    for (std::size_t k = 0; k < tr.snapshots(); ++k) tr.coeffs[k] *= 1.0 + tr.times[k];
    EXPECT_GT(weak_residual(tr, standard_test_family(tr, 2)).max_relative, 1e-2);
}

TEST(Analysis, SweepDistancesAndBounds) {
    std::vector<Trajectory> runs;
    for (int n : {4, 9}) runs.push_back(run(n, 2.0, 0.5, 0.1));
    const SweepReport rep = convergence_sweep(runs, runs.back().disc->rule);
    ASSERT_EQ(rep.runs.size(), 2u);
    EXPECT_TRUE(rep.runs[0].bounded && rep.runs[1].bounded);
    EXPECT_GT(rep.distance[0][1], 0.0);
    EXPECT_EQ(rep.to_finest[1], 0.0);
    EXPECT_NEAR(spacetime_distance(runs[0], runs[0], runs[0].disc->rule), 0.0, 1e-15);
}

TEST(Analysis, NormIdentitiesAndGnRatios) {
    const BasisSet b = make_basis("spectral", 9, 5);
    const auto d = std::make_shared<const Discretization>(b, build_rule(40));
    const Eigen::VectorXd x = random_states(9, 1, 3)[0];
    for (double p : {2.0, 3.0, 5.0}) {
        const NormReport nr = norm_report(*d, x, Exponent(p));
        EXPECT_NEAR(nr.lq_vp, nr.lp_v, 1e-12 * nr.lp_v);
        EXPECT_LE(nr.inverse, 1e-12);
        EXPECT_GE(nr.korn, 1.0);
        const GnRatio g = gn_ratio(*d, x, Exponent(p));
        EXPECT_TRUE(std::isfinite(g.v) && g.v > 0.0);
        EXPECT_TRUE(std::isfinite(g.vp) && g.vp > 0.0);
    }
    EXPECT_THROW(gn_ratio(*d, Eigen::VectorXd::Zero(9), Exponent(3)), ValidationError);
}
