#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pnsg/quadrature.hpp"

using pnsg::build_rule;
using pnsg::integrate_2d;

// Exact moment of x^a y^b over the unit square.
static double moment(int a, int b) { return 1.0 / ((a + 1.0) * (b + 1.0)); }

TEST(Quadrature, IntegratesMonomialsUpToDegree2nMinus1) {
    for (int n : {1, 2, 3, 5, 8, 13, 20}) {
        const auto rule = build_rule(n);
        for (int a = 0; a <= 2 * n - 1; ++a)
            for (int b = 0; b <= 2 * n - 1; b += 3) {
                const double got = integrate_2d([&](double x, double y) { return std::pow(x, a) * std::pow(y, b); }, rule);
                EXPECT_NEAR(got, moment(a, b), 1e-13 * moment(a, b) + 1e-15) << "n=" << n << " a=" << a << " b=" << b;
            }
    }
}

TEST(Quadrature, DegreeTwoNIsNotExact) {
    for (int n : {2, 4, 7}) {
        const auto rule = build_rule(n);
        const double got = integrate_2d([&](double x, double) { return std::pow(x, 2 * n); }, rule);
        EXPECT_GT(std::abs(got - moment(2 * n, 0)), 1e-10);
    }
}

TEST(Quadrature, NodesAndWeights) {
    for (int n : {1, 2, 9, 64, 128, 256}) {
        const auto rule = build_rule(n);
        ASSERT_EQ(rule.order(), n);
        ASSERT_EQ(rule.size_2d(), static_cast<std::size_t>(n) * n);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            EXPECT_GT(rule.nodes_1d[i], 0.0);
            EXPECT_LT(rule.nodes_1d[i], 1.0);
            EXPECT_GT(rule.weights_1d[i], 0.0);
            if (i > 0) {
                EXPECT_LT(rule.nodes_1d[i - 1], rule.nodes_1d[i]);
            }
            EXPECT_NEAR(rule.nodes_1d[i] + rule.nodes_1d[n - 1 - i], 1.0, 1e-15);
            EXPECT_DOUBLE_EQ(rule.weights_1d[i], rule.weights_1d[n - 1 - i]);
            sum += rule.weights_1d[i];
        }
        EXPECT_NEAR(sum, 1.0, 1e-14);
    }
}

TEST(Quadrature, TensorIndexing) {
    const auto rule = build_rule(5);
    for (std::size_t q = 0; q < rule.size_2d(); ++q) {
        EXPECT_EQ(rule.x(q), rule.nodes_1d[q / 5]);
        EXPECT_EQ(rule.y(q), rule.nodes_1d[q % 5]);
        EXPECT_EQ(rule.weight(q), rule.weights_1d[q / 5] * rule.weights_1d[q % 5]);
    }
}

TEST(Quadrature, SampleAndCallableFormsAgree) {
    const auto rule = build_rule(11);
    auto f = [](double x, double y) { return std::sin(3 * x) * std::exp(y); };
    Eigen::VectorXd s(rule.size_2d());
    for (std::size_t q = 0; q < rule.size_2d(); ++q) s[q] = f(rule.x(q), rule.y(q));
    EXPECT_DOUBLE_EQ(integrate_2d(s, rule), integrate_2d(f, rule));
    EXPECT_NEAR(integrate_2d(f, rule), (1 - std::cos(3.0)) / 3 * (std::exp(1.0) - 1), 1e-14);
}

// Smooth non-polynomial integrands converge quickly as the order rises.
TEST(Quadrature, SmoothIntegrandConverges) {
    auto f = [](double x, double y) { return std::pow(x * x + y * y + 0.1, 1.5); };
    const double ref = integrate_2d(f, build_rule(200));
    double prev = 1.0;
    for (int n : {4, 8, 16}) {
        const double err = std::abs(integrate_2d(f, build_rule(n)) - ref);
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 1e-10);
}

TEST(Quadrature, RejectsBadOrder) {
    EXPECT_THROW(build_rule(0), pnsg::ValidationError);
    EXPECT_THROW(build_rule(-3), pnsg::ValidationError);
}
