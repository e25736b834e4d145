#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "pnsg/error.hpp"

namespace pnsg {

/// Gauss-Legendre rule on (0,1), used as a tensor product on the unit square.
/// Every spatial integral in the solver goes through one of these.
struct QuadratureRule {
    std::vector<double> nodes_1d;
    std::vector<double> weights_1d;

    int order() const noexcept { return static_cast<int>(nodes_1d.size()); }
    std::size_t size_2d() const noexcept { return nodes_1d.size() * nodes_1d.size(); }

    /// Tensor node index q = i * order + j refers to (nodes_1d[i], nodes_1d[j]).
    double x(std::size_t q) const noexcept { return nodes_1d[q / nodes_1d.size()]; }
    double y(std::size_t q) const noexcept { return nodes_1d[q % nodes_1d.size()]; }
    double weight(std::size_t q) const noexcept {
        return weights_1d[q / nodes_1d.size()] * weights_1d[q % nodes_1d.size()];
    }
};

namespace detail {

// Legendre P_n and P_n' on [-1,1] by the three-term recurrence.
inline void legendre_with_derivative(int n, double t, double& pn, double& dpn) {
    double p0 = 1.0, p1 = t;
    if (n == 0) {
        pn = 1.0;
        dpn = 0.0;
        return;
    }
    for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
    }
    pn = p1;
    dpn = n * (t * p1 - p0) / (t * t - 1.0);
}

} // namespace detail

/// Nodes by Newton iteration on P_n from the Chebyshev-like initial guess,
/// converged to 1e-15; no tables, so any order works.
inline QuadratureRule build_rule(int order) {
    if (order < 1) {
        throw ValidationError("quadrature order must be >= 1 (got " + std::to_string(order) + ")");
    }
    QuadratureRule rule;
    rule.nodes_1d.resize(order);
    rule.weights_1d.resize(order);
    const int half = (order + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double t = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        double pn = 0.0, dpn = 0.0;
        for (int it = 0; it < 100; ++it) {
            detail::legendre_with_derivative(order, t, pn, dpn);
            const double dt = pn / dpn;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        detail::legendre_with_derivative(order, t, pn, dpn);
        const double w = 2.0 / ((1.0 - t * t) * dpn * dpn);
        // t is the i-th largest root; map [-1,1] -> (0,1), halve the weight.
        rule.nodes_1d[order - 1 - i] = 0.5 * (1.0 + t);
        rule.nodes_1d[i] = 0.5 * (1.0 - t);
        rule.weights_1d[order - 1 - i] = 0.5 * w;
        rule.weights_1d[i] = 0.5 * w;
    }
    if (order % 2 == 1) rule.nodes_1d[order / 2] = 0.5;
    return rule;
}

/// Sum_{ij} w_i w_j f(x_i, y_j); samples are laid out as QuadratureRule::x/y index them.
inline double integrate_2d(const Eigen::Ref<const Eigen::VectorXd>& samples, const QuadratureRule& rule) {
    if (static_cast<std::size_t>(samples.size()) != rule.size_2d()) {
        throw ValidationError("sample count does not match the tensor rule");
    }
    const std::size_t n = rule.nodes_1d.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double f = samples[i * n + j];
            if (!std::isfinite(f)) {
                std::ostringstream os;
                os << "non-finite sample " << f << " at node (" << rule.nodes_1d[i] << ", "
                   << rule.nodes_1d[j] << ")";
                throw NumericalError(os.str());
            }
            row += rule.weights_1d[j] * f;
        }
        total += rule.weights_1d[i] * row;
    }
    return total;
}

template <class F>
    requires std::is_invocable_r_v<double, F, double, double>
double integrate_2d(F&& f, const QuadratureRule& rule) {
    Eigen::VectorXd samples(rule.size_2d());
    for (std::size_t q = 0; q < rule.size_2d(); ++q) samples[q] = f(rule.x(q), rule.y(q));
    return integrate_2d(samples, rule);
}

} // namespace pnsg
