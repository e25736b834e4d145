#include <gtest/gtest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "pnsg/cli.hpp"

using namespace pnsg;

namespace {

std::shared_ptr<const Discretization> disc(int n, int order, const std::string& kind = "spectral") {
    return std::make_shared<const Discretization>(make_basis(kind, n, 5), build_rule(order));
}

// b_i(X) = int v_p(X) . phi_i; A(X) is its Jacobian.
Eigen::VectorXd pairing_vector(const Discretization& d, const Eigen::VectorXd& x, const Exponent& ex) {
    const NodeFields f = evaluate_nodes(d.table, x);
    Eigen::VectorXd px(f.nodes()), py(f.nodes());
    for (Eigen::Index q = 0; q < f.nodes(); ++q) {
        const Eigen::Vector2d vp = v_p_of(f.v(q), ex);
        px[q] = d.table.weights[q] * vp[0];
        py[q] = d.table.weights[q] * vp[1];
    }
    return d.table.vx.transpose() * px + d.table.vy.transpose() * py;
}

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

} // namespace

// Oracle: at p = 2, A is the L2 Gram matrix and F_visc = -nu K X with
// K_ij = int D(phi_i) : D(phi_j), computed here by point evaluation.
TEST(Galerkin, QuadraticCaseMatchesLinearOperators) {
    const auto d = disc(9, 14);
    const Exponent two(2);
    const Eigen::VectorXd x = random_states(9, 1, 11)[0];
    const AssembledSystem s = assemble(*d, x, two, 0.7);
    EXPECT_LT(rel(s.a_matrix, d->basis.gram_l2()), 1e-12);

    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(9, 9);
    for (std::size_t q = 0; q < d->rule.size_2d(); ++q)
        for (std::size_t i = 0; i < 9; ++i)
            for (std::size_t j = 0; j < 9; ++j) {
                const Eigen::Matrix2d di = symmetric_part(d->basis.evaluate(i, d->rule.x(q), d->rule.y(q)).grad);
                const Eigen::Matrix2d dj = symmetric_part(d->basis.evaluate(j, d->rule.x(q), d->rule.y(q)).grad);
                k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += d->rule.weight(q) * (di.array() * dj.array()).sum();
            }
    EXPECT_LT(rel(s.f_viscous, -0.7 * k * x), 1e-12);
}

TEST(Galerkin, QuadraticTransportMatchesPointwiseAdvection) {
    const auto d = disc(6, 14);
    const Eigen::VectorXd x = random_states(6, 1, 12)[0];
    const AssembledSystem s = assemble(*d, x, Exponent(2), 1.0);
    Eigen::VectorXd ref = Eigen::VectorXd::Zero(6);
    for (std::size_t q = 0; q < d->rule.size_2d(); ++q) {
        const PointSample ps = sample(d->basis, x, d->rule.x(q), d->rule.y(q));
        const Eigen::Vector2d adv = ps.grad_v.transpose() * ps.v;
        for (std::size_t i = 0; i < 6; ++i)
            ref[static_cast<Eigen::Index>(i)] -= d->rule.weight(q) * d->basis.evaluate(i, d->rule.x(q), d->rule.y(q)).value.dot(adv);
    }
    EXPECT_LT(rel(s.f_transport, ref), 1e-12);
}

TEST(Galerkin, MatrixIsJacobianOfPairing) {
    const auto d = disc(9, 24);
    for (double p : {2.5, 3.0, 4.0}) {
        const Exponent ex(p);
        const Eigen::VectorXd x = random_states(9, 1, 13)[0];
        const Eigen::MatrixXd a = assemble(*d, x, ex, 1.0, AssemblyParts::matrix).a_matrix;
        Eigen::MatrixXd jac(9, 9);
        const double h = 1e-6;
        for (Eigen::Index j = 0; j < 9; ++j) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(9);
            e[j] = h;
            jac.col(j) = (pairing_vector(*d, x + e, ex) - pairing_vector(*d, x - e, ex)) / (2 * h);
        }
        EXPECT_LT(rel(a, jac), 1e-7) << "p=" << p;
    }
}

TEST(Galerkin, EulerIdentityAndSymmetry) {
    const auto d = disc(9, 24);
    for (double p : {2.0, 2.5, 3.0, 4.0, 6.0}) {
        const Exponent ex(p);
        const Eigen::VectorXd x = random_states(9, 1, 14)[0];
        const AssembledSystem s = assemble(*d, x, ex, 1.0);
        EXPECT_EQ((s.a_matrix - s.a_matrix.transpose()).cwiseAbs().maxCoeff(), 0.0);
        // v_p is homogeneous of degree p - 1, so A(X) X = (p - 1) b(X) and X^T b = int |v|^p.
        EXPECT_NEAR(x.dot(s.a_matrix * x), (p - 1) * s.int_v_p, 1e-11 * s.int_v_p) << p;
        EXPECT_LT(rel(s.a_matrix * x, (p - 1) * pairing_vector(*d, x, ex)), 1e-12) << p;
    }
}

TEST(Galerkin, Homogeneity) {
    const auto d = disc(9, 24);
    const Eigen::VectorXd x = random_states(9, 1, 15)[0];
    for (double p : {2.0, 3.0, 4.0}) {
        const Exponent ex(p);
        const AssembledSystem a = assemble(*d, x, ex, 0.3), b = assemble(*d, 1.7 * x, ex, 0.3);
        EXPECT_LT(rel(b.f_viscous, std::pow(1.7, p - 1) * a.f_viscous), 1e-12);
        EXPECT_LT(rel(b.f_transport, std::pow(1.7, p) * a.f_transport), 1e-12);
        EXPECT_LT(rel(b.a_matrix, std::pow(1.7, p - 2) * a.a_matrix), 1e-12);
    }
}

TEST(Galerkin, PositiveDefiniteAboveWeightedGram) {
    const auto d = disc(16, 64);
    for (double p : {2.0, 2.5, 3.0, 4.0}) {
        const Exponent ex(p);
        for (const auto& x : random_states(16, 10, 16)) {
            const AssembledSystem s = assemble(*d, x, ex, 1.0, AssemblyParts::matrix);
            ASSERT_EQ(Eigen::LLT<Eigen::MatrixXd>(s.a_matrix).info(), Eigen::Success);
            EXPECT_EQ(s.diagnostics.guard_activations, 0u);
            const double amin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.a_matrix).eigenvalues()[0];
            const double gmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(weighted_gram(*d, x, ex)).eigenvalues()[0];
            EXPECT_GE(amin, std::min(p - 1, 1.0) * gmin * (1 - 1e-10)) << p;
        }
    }
}

// At even p every integrand is polynomial and the identity X^T F = -nu int |D|^p
// holds to rounding at the policy order.
TEST(Galerkin, EnergyIdentityExactForEvenP) {
    for (double p : {2.0, 4.0}) {
        const BasisSet b = make_basis("spectral", 9, 4);
        const auto d = std::make_shared<const Discretization>(b, build_rule(auto_quad_order(p, b)));
        for (const auto& x : random_states(9, 5, 17)) {
            const AssembledSystem s = assemble(*d, x, Exponent(p), 0.4, AssemblyParts::rhs);
            EXPECT_NEAR(x.dot(s.f_transport), 0.0, 1e-12 * x.norm() * s.f_vector.norm()) << p;
            EXPECT_NEAR(x.dot(s.f_vector), -0.4 * s.int_d_p, 1e-11 * 0.4 * s.int_d_p) << p;
            const EnergyRate r = energy_rate(GalerkinState(0, x, d), Exponent(p), 0.4);
            EXPECT_NEAR(r.model, -r.dissipation, 1e-11 * r.dissipation);
        }
    }
}

TEST(Galerkin, MatrixFreeActionMatchesAssembly) {
    const auto d = disc(9, 40);
    const Eigen::VectorXd x = random_states(9, 2, 18)[0], w = random_states(9, 2, 18)[1];
    for (double p : {2.0, 3.0}) {
        const AssembledSystem s = assemble(*d, x, Exponent(p), 0.2);
        const SystemAction a = apply_system(*d, x, w, Exponent(p), 0.2);
        EXPECT_LT(rel(a.a_w, s.a_matrix * w), 1e-12);
        EXPECT_LT(rel(a.a_x, s.a_matrix * x), 1e-12);
        EXPECT_LT(rel(a.f_vector, s.f_vector), 1e-12);
        EXPECT_DOUBLE_EQ(a.int_d_p, s.int_d_p);
    }
}

TEST(Galerkin, ThreadedAssemblyIsReproducible) {
    const auto d = disc(16, 40);
    const Eigen::VectorXd x = random_states(16, 1, 19)[0];
    const AssembledSystem a = assemble(*d, x, Exponent(3), 0.1, AssemblyParts::both, 3);
    const AssembledSystem b = assemble(*d, x, Exponent(3), 0.1, AssemblyParts::both, 3);
    const AssembledSystem c = assemble(*d, x, Exponent(3), 0.1, AssemblyParts::both, 1);
    EXPECT_EQ((a.a_matrix - b.a_matrix).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((a.f_vector - b.f_vector).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LT(rel(a.a_matrix, c.a_matrix), 1e-13);
    EXPECT_LT(rel(a.f_vector, c.f_vector), 1e-13);
}

// Reordering the basis permutes A and F accordingly.
TEST(Galerkin, PermutationEquivariance) {
    const BasisSet b = make_basis("spectral", 9, 5);
    const Eigen::MatrixXd rev = b.combination().colwise().reverse().eval();
    const BasisSet r("spectral", b.pool(), rev, true);
    const auto d1 = std::make_shared<const Discretization>(b, build_rule(30));
    const auto d2 = std::make_shared<const Discretization>(r, build_rule(30));
    const Eigen::VectorXd x = random_states(9, 1, 20)[0];
    const Eigen::VectorXd xr = x.reverse();
    const AssembledSystem s1 = assemble(*d1, x, Exponent(3), 0.5), s2 = assemble(*d2, xr, Exponent(3), 0.5);
    EXPECT_LT(rel(s2.f_vector, s1.f_vector.reverse().eval()), 1e-12);
    EXPECT_LT(rel(s2.a_matrix, s1.a_matrix.reverse().eval()), 1e-12);
}

TEST(Galerkin, ZeroStateAndValidation) {
    const auto d = disc(4, 20);
    const AssembledSystem s = assemble(*d, Eigen::VectorXd::Zero(4), Exponent(3), 1.0);
    EXPECT_EQ(s.f_vector.norm(), 0.0);
    EXPECT_EQ(s.a_matrix.norm(), 0.0);
    EXPECT_THROW(assemble_f(GalerkinState(0, Eigen::VectorXd::Ones(4), d), Exponent(3), 0.0), ValidationError);
}
