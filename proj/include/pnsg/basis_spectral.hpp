#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "pnsg/basis_stream.hpp"
#include "pnsg/error.hpp"

namespace pnsg {

/// Discrete eigenfunctions of the bi-Laplacian restricted to divergence-free,
/// clamped fields: B v = mu M v with B_ij = int lap(phi_i) . lap(phi_j) and M the
/// L2 Gram matrix, both over a stream pool of size M >= N.
struct SpectralBasis {
    int m = 2;
    Eigen::VectorXd eigenvalues;  // ascending, length N
    Eigen::MatrixXd eigenvectors; // M x N, columns are coefficients over the pool
    Eigen::MatrixXd b_matrix;     // M x M
    Eigen::MatrixXd mass_matrix;  // M x M
    BasisSet basis;               // the N eigenfields as a BasisSet
};

/// B[phi_i, phi_j] = int lap(phi_i) . lap(phi_j) dx. Only m = 2 is implemented.
inline Eigen::MatrixXd assemble_b_matrix(const BasisSet& basis, int m, const QuadratureRule& rule) {
    if (m != 2) throw ValidationError("unsupported operator order m = " + std::to_string(m) + " (only m = 2)");
    const BasisTable t = basis.tabulate(rule);
    const auto w = t.weights.asDiagonal();
    Eigen::MatrixXd b = t.lap_x.transpose() * w * t.lap_x + t.lap_y.transpose() * w * t.lap_y;
    return 0.5 * (b + b.transpose());
}

inline Eigen::MatrixXd assemble_b_matrix(const BasisSet& basis, int m = 2) {
    return assemble_b_matrix(basis, m, build_rule(basis.exact_order()));
}

/// Generalized symmetric eigensolve through the Cholesky factor of the mass matrix.
/// Returns the n_keep smallest pairs with L2-orthonormal eigenvectors.
inline SpectralBasis solve_eigenbasis(const Eigen::MatrixXd& b_matrix, const Eigen::MatrixXd& mass_matrix,
                                      Eigen::Index n_keep) {
    const Eigen::Index m = mass_matrix.rows();
    if (b_matrix.rows() != m || b_matrix.cols() != m || mass_matrix.cols() != m) {
        throw ValidationError("B and mass matrices must be square and of equal size");
    }
    if (n_keep < 0 || n_keep > m) {
        throw ValidationError("n_keep = " + std::to_string(n_keep) + " exceeds the pool size " + std::to_string(m));
    }
    const double mass_min = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(mass_matrix, Eigen::EigenvaluesOnly)
                                .eigenvalues()
                                .minCoeff();
    if (!(mass_min > 0.0)) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "mass matrix is not positive definite (smallest eigenvalue %.3e)", mass_min);
        throw IllConditionedBasis(buf);
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(b_matrix, mass_matrix,
                                                                       Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (solver.info() != Eigen::Success) throw IllConditionedBasis("generalized eigensolve failed");
    Eigen::VectorXd mu = solver.eigenvalues();
    Eigen::MatrixXd vecs = solver.eigenvectors();
    const Eigen::MatrixXd mv = mass_matrix * vecs;
    // Symmetries of the square make some eigenvalues repeated; the solver then returns an
    // arbitrary basis of the eigenspace. Pick a canonical one by Gram-Schmidt on pool directions.
    const double scale = std::max(1.0, mu.cwiseAbs().maxCoeff());
    for (Eigen::Index a = 0; a < m && a < n_keep;) {
        Eigen::Index b = a + 1;
        while (b < m && mu[b] - mu[b - 1] <= 1e-8 * scale) ++b;
        const Eigen::Index k = b - a;
        if (k > 1) {
            const Eigen::MatrixXd w = mv.middleCols(a, k); // row r: coordinates of e_r in the cluster
            const double wmax = w.rowwise().norm().maxCoeff();
            Eigen::MatrixXd r(k, k);
            Eigen::Index found = 0;
            for (Eigen::Index row = 0; row < m && found < k; ++row) {
                Eigen::VectorXd c = w.row(row).transpose();
                for (Eigen::Index j = 0; j < found; ++j) c -= r.row(j).dot(c) * r.row(j).transpose();
                const double nc = c.norm();
                if (nc > 1e-3 * wmax) r.row(found++) = c.transpose() / nc;
            }
            if (found < k) throw IllConditionedBasis("could not canonicalize a repeated eigenspace");
            vecs.middleCols(a, k) = (vecs.middleCols(a, k) * r.transpose()).eval();
            mu.segment(a, k).setConstant(mu.segment(a, k).mean());
        }
        a = b;
    }
    SpectralBasis out;
    out.eigenvalues = mu.head(n_keep);
    out.eigenvectors = vecs.leftCols(n_keep);
    // Sign: the first clearly nonzero coefficient is positive.
    for (Eigen::Index k = 0; k < n_keep; ++k) {
        const double big = out.eigenvectors.col(k).cwiseAbs().maxCoeff();
        for (Eigen::Index r = 0; r < m; ++r) {
            const double c = out.eigenvectors(r, k);
            if (std::abs(c) > 1e-6 * big) {
                if (c < 0.0) out.eigenvectors.col(k) *= -1.0;
                break;
            }
        }
    }
    out.b_matrix = b_matrix;
    out.mass_matrix = mass_matrix;
    return out;
}

/// Spectral basis of size n_keep over the raw stream pool with pool_per_axis^2 members.
inline SpectralBasis build_spectral_basis(int pool_per_axis, Eigen::Index n_keep) {
    auto pool = stream_pool(pool_per_axis);
    const auto m = static_cast<Eigen::Index>(pool.size());
    BasisSet raw("stream", pool, Eigen::MatrixXd::Identity(m, m), false);
    SpectralBasis sb = solve_eigenbasis(assemble_b_matrix(raw), raw.gram_l2(), n_keep);
    sb.basis = BasisSet("spectral", std::move(pool), sb.eigenvectors.transpose(), true);
    return sb;
}

/// Q_n: keep the first n coefficients of an expansion in the spectral basis.
inline Eigen::VectorXd project_qn(const Eigen::VectorXd& coeffs, Eigen::Index n) {
    if (n < 0 || n > coeffs.size()) throw ValidationError("projection size out of range");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(coeffs.size());
    out.head(n) = coeffs.head(n);
    return out;
}

/// One eigenvalue per line, 15 significant digits.
inline void write_eigenvalues(std::ostream& os, const Eigen::VectorXd& mu) {
    char buf[40];
    for (Eigen::Index k = 0; k < mu.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.15g\n", mu[k]);
        os << buf;
    }
}

} // namespace pnsg
