#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "pnsg/helmholtz.hpp"

using namespace pnsg;

namespace {

constexpr double pi = std::numbers::pi;

GridField gradient_field(int n) {
    return GridField::sample(n, [](double x, double y) {
        return Eigen::Vector2d(2 * x * y + pi * std::cos(pi * x) * std::cos(pi * y), x * x - pi * std::sin(pi * x) * std::sin(pi * y));
    });
}

double psi(double x, double y) { return std::pow(std::sin(pi * x) * std::sin(pi * y), 2) * (1 + x * y); }

GridField discrete_gradient_field(int n) {
    Eigen::VectorXd phi(n * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double x = (i + 0.5) / n, y = (j + 0.5) / n;
            phi[j * n + i] = x * x * y + std::sin(pi * x) * std::cos(pi * y);
        }
    return grid_gradient(phi, n);
}

double inner(const GridField& a, const GridField& b) { return (a.u1().dot(b.u1()) + a.u2().dot(b.u2())) * a.h() * a.h(); }

} // namespace

// The discrete gradient of a grid potential is removed exactly.
TEST(Helmholtz, DiscreteGradientProjectsToZero) {
    const int n = 48;
    Eigen::VectorXd phi(n * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) phi[j * n + i] = std::cos(3 * (i + 0.5) / n) * std::exp((j + 0.5) / n);
    const GridField g = grid_gradient(phi, n);
    const LerayResult r = leray_project(g);
    EXPECT_LE(r.u.l2_norm() / g.l2_norm(), 1e-8);
}

// A sampled continuous gradient differs from a discrete one by at least O(h^2).
TEST(Helmholtz, SampledGradientResidualIsSecondOrder) {
    double prev = 0.0;
    for (int n : {16, 32, 64}) {
        const GridField g = gradient_field(n);
        const double e = leray_project(g).u.l2_norm() / g.l2_norm();
        if (prev > 0.0) {
            EXPECT_GE(prev / e, 3.5) << n;
        }
        prev = e;
    }
}

TEST(Helmholtz, DiscreteCurlIsFixedPoint) {
    const GridField c = discrete_curl(64, psi);
    const LerayResult r = leray_project(c);
    EXPECT_LE((r.u - c).l2_norm() / c.l2_norm(), 1e-8);
    EXPECT_LE(grid_divergence(c).norm() * c.h(), 1e-10);
}

TEST(Helmholtz, DecompositionIsOrthogonalAndIdempotent) {
    const int n = 40;
    const GridField c = discrete_curl(n, psi);
    const GridField w = c + discrete_gradient_field(n);
    const LerayResult r = leray_project(w);
    EXPECT_LE((r.u + r.grad_phi - w).l2_norm(), 1e-14 * w.l2_norm());
    EXPECT_LE(std::abs(inner(r.u, r.grad_phi)), 1e-9 * w.l2_norm() * w.l2_norm());
    EXPECT_LE((r.u - c).l2_norm() / c.l2_norm(), 1e-8);
    const LerayResult again = leray_project(r.u);
    EXPECT_LE((again.u - r.u).l2_norm() / r.u.l2_norm(), 10 * PoissonOptions{}.tolerance);
    EXPECT_NEAR(r.phi.mean(), 0.0, 1e-14);
}

TEST(Helmholtz, ProjectedFieldIsWeaklyDivergenceFree) {
    const GridField w = GridField::sample(32, [](double x, double y) { return Eigen::Vector2d(x * x + y, std::sin(3 * x * y)); });
    const LerayResult r = leray_project(w);
    EXPECT_LE(weak_divergence_test(r.u, 10), 1e-9);
    EXPECT_GT(weak_divergence_test(w, 10), 1e-3);
}

TEST(Helmholtz, ZeroFieldAndNonConvergence) {
    const LerayResult r = leray_project(GridField(16));
    EXPECT_EQ(r.u.max_abs(), 0.0);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_THROW(leray_project(gradient_field(32), {1e-10, 2}), ConvergenceError);
    EXPECT_THROW(GridField(4), ValidationError);
}

TEST(Helmholtz, CsvRoundTripAndErrors) {
    const GridField g = gradient_field(12);
    std::stringstream ss;
    write_grid_csv(ss, g);
    const GridField r = read_grid_csv(ss);
    EXPECT_EQ(r.n(), 12);
    EXPECT_EQ((r - g).max_abs(), 0.0);

    std::stringstream os;
    write_grid_csv(os, g);
    std::string text = os.str();
    std::size_t pos = 0;
    for (int k = 0; k < 4; ++k) pos = text.find('\n', pos) + 1;
    text.replace(pos, text.find('\n', pos) - pos, "1,2,abc");
    std::stringstream bad(text);
    try {
        read_grid_csv(bad, "g.csv");
        FAIL() << "no exception";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 5u);
    }
}
