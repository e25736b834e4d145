#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pnsg/error.hpp"

namespace pnsg {

/// Vector field sampled at the cell centers of a uniform n x n grid on the unit
/// square. Cell (i, j) is centered at ((i + 1/2) h, (j + 1/2) h), stored at j * n + i.
class GridField {
public:
    GridField() = default;
    explicit GridField(int n) : n_(n), u1_(Eigen::VectorXd::Zero(cells(n))), u2_(Eigen::VectorXd::Zero(cells(n))) {
        if (n < 8) throw ValidationError("grid resolution must be >= 8 (got " + std::to_string(n) + ")");
    }
    GridField(int n, Eigen::VectorXd u1, Eigen::VectorXd u2) : GridField(n) {
        if (u1.size() != u1_.size() || u2.size() != u2_.size()) throw ValidationError("grid field size mismatch");
        if (!u1.allFinite() || !u2.allFinite()) throw ValidationError("grid field contains non-finite values");
        u1_ = std::move(u1);
        u2_ = std::move(u2);
    }

    template <class F>
    static GridField sample(int n, F&& f) {
        GridField g(n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const Eigen::Vector2d v = f(g.x(i), g.y(j));
                g.u1_[g.index(i, j)] = v[0];
                g.u2_[g.index(i, j)] = v[1];
            }
        if (!g.u1_.allFinite() || !g.u2_.allFinite()) throw ValidationError("grid field contains non-finite values");
        return g;
    }

    int n() const noexcept { return n_; }
    double h() const noexcept { return 1.0 / n_; }
    double x(int i) const noexcept { return (i + 0.5) / n_; }
    double y(int j) const noexcept { return (j + 0.5) / n_; }
    Eigen::Index index(int i, int j) const noexcept { return static_cast<Eigen::Index>(j) * n_ + i; }

    const Eigen::VectorXd& u1() const noexcept { return u1_; }
    const Eigen::VectorXd& u2() const noexcept { return u2_; }
    Eigen::VectorXd& u1() noexcept { return u1_; }
    Eigen::VectorXd& u2() noexcept { return u2_; }
    Eigen::Vector2d at(int i, int j) const { return {u1_[index(i, j)], u2_[index(i, j)]}; }

    /// Discrete L2 norm (midpoint rule).
    double l2_norm() const { return std::sqrt((u1_.squaredNorm() + u2_.squaredNorm()) * h() * h()); }
    double max_abs() const { return std::max(u1_.cwiseAbs().maxCoeff(), u2_.cwiseAbs().maxCoeff()); }

    friend GridField operator-(const GridField& a, const GridField& b) {
        return GridField(a.n_, a.u1_ - b.u1_, a.u2_ - b.u2_);
    }
    friend GridField operator+(const GridField& a, const GridField& b) {
        return GridField(a.n_, a.u1_ + b.u1_, a.u2_ + b.u2_);
    }

private:
    static Eigen::Index cells(int n) { return static_cast<Eigen::Index>(n) * n; }

    int n_ = 0;
    Eigen::VectorXd u1_, u2_;
};

namespace grid_ops {

// 1D derivative on cell centers: centered in the interior, second-order one-sided
// in the first and last cell, exact on quadratics.
inline void deriv(const double* f, double* out, int n, std::ptrdiff_t stride, double h) {
    const double c = 0.5 / h;
    out[0] = c * (-3.0 * f[0] + 4.0 * f[stride] - f[2 * stride]);
    for (int i = 1; i < n - 1; ++i) out[i * stride] = c * (f[(i + 1) * stride] - f[(i - 1) * stride]);
    out[(n - 1) * stride] = c * (3.0 * f[(n - 1) * stride] - 4.0 * f[(n - 2) * stride] + f[(n - 3) * stride]);
}

// Transpose of deriv.
inline void deriv_t(const double* g, double* out, int n, std::ptrdiff_t stride, double h) {
    const double c = 0.5 / h;
    for (int i = 0; i < n; ++i) out[i * stride] = 0.0;
    out[0] += -3.0 * c * g[0];
    out[stride] += 4.0 * c * g[0];
    out[2 * stride] += -c * g[0];
    for (int i = 1; i < n - 1; ++i) {
        out[(i + 1) * stride] += c * g[i * stride];
        out[(i - 1) * stride] -= c * g[i * stride];
    }
    out[(n - 1) * stride] += 3.0 * c * g[(n - 1) * stride];
    out[(n - 2) * stride] += -4.0 * c * g[(n - 1) * stride];
    out[(n - 3) * stride] += c * g[(n - 1) * stride];
}

/// d/dx of a cell-centered scalar (x varies along i, stride 1).
inline Eigen::VectorXd dx(const Eigen::VectorXd& f, int n) {
    Eigen::VectorXd out(f.size());
    for (int j = 0; j < n; ++j) deriv(f.data() + j * n, out.data() + j * n, n, 1, 1.0 / n);
    return out;
}
inline Eigen::VectorXd dy(const Eigen::VectorXd& f, int n) {
    Eigen::VectorXd out(f.size());
    for (int i = 0; i < n; ++i) deriv(f.data() + i, out.data() + i, n, n, 1.0 / n);
    return out;
}
inline Eigen::VectorXd dx_t(const Eigen::VectorXd& g, int n) {
    Eigen::VectorXd out(g.size());
    for (int j = 0; j < n; ++j) deriv_t(g.data() + j * n, out.data() + j * n, n, 1, 1.0 / n);
    return out;
}
inline Eigen::VectorXd dy_t(const Eigen::VectorXd& g, int n) {
    Eigen::VectorXd out(g.size());
    for (int i = 0; i < n; ++i) deriv_t(g.data() + i, out.data() + i, n, n, 1.0 / n);
    return out;
}

} // namespace grid_ops

/// Discrete gradient G of a cell-centered scalar.
inline GridField grid_gradient(const Eigen::VectorXd& phi, int n) {
    return GridField(n, grid_ops::dx(phi, n), grid_ops::dy(phi, n));
}

/// Discrete divergence D = -G^T. It carries the normal trace: a constant field
/// has nonzero D in the boundary cells.
inline Eigen::VectorXd grid_divergence(const GridField& w) {
    return -(grid_ops::dx_t(w.u1(), w.n()) + grid_ops::dy_t(w.u2(), w.n()));
}

/// Rotated gradient built from the same 1D operators as grid_divergence, so its
/// discrete divergence vanishes identically.
template <class Psi>
GridField discrete_curl(int n, Psi&& psi) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(n) * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) s[static_cast<Eigen::Index>(j) * n + i] = psi((i + 0.5) / n, (j + 0.5) / n);
    return GridField(n, -grid_ops::dy_t(s, n), grid_ops::dx_t(s, n));
}

struct LerayResult {
    GridField u;        // divergence-free part
    GridField grad_phi; // gradient part, u + grad_phi = w
    Eigen::VectorXd phi; // zero-mean potential
    int iterations = 0;
    double relative_residual = 0.0; // |G^T (w - G phi)| / |w|
};

struct PoissonOptions {
    double tolerance = 1e-10;
    int max_iterations = 20000;
};

/// Helmholtz decomposition w = u + G phi with u orthogonal to every discrete
/// gradient, i.e. D u = 0 including the boundary cells (zero normal trace).
/// phi solves the Neumann problem D G phi = D w by conjugate gradients on the
/// normal equations (CGLS); the iteration only visits zero-mean potentials.
/// Stops when |G^T r| <= tolerance |w|. The smallest singular value of G on
/// zero-mean potentials is about pi > 1, so the divergence-free part is then
/// accurate to tolerance |w|.
inline LerayResult leray_project(const GridField& w, const PoissonOptions& opt = {}) {
    const int n = w.n();
    const Eigen::Index m = static_cast<Eigen::Index>(n) * n;
    auto apply = [n](const Eigen::VectorXd& phi, Eigen::VectorXd& gx, Eigen::VectorXd& gy) {
        gx = grid_ops::dx(phi, n);
        gy = grid_ops::dy(phi, n);
    };
    auto apply_t = [n](const Eigen::VectorXd& gx, const Eigen::VectorXd& gy) {
        return Eigen::VectorXd(grid_ops::dx_t(gx, n) + grid_ops::dy_t(gy, n));
    };

    Eigen::VectorXd phi = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd rx = w.u1(), ry = w.u2();
    Eigen::VectorXd s = apply_t(rx, ry);
    const double w_norm = std::sqrt(rx.squaredNorm() + ry.squaredNorm());
    LerayResult out{w, GridField(n), phi, 0, 0.0};
    if (s.norm() <= opt.tolerance * w_norm) {
        out.relative_residual = w_norm > 0.0 ? s.norm() / w_norm : 0.0;
        return out;
    }

    Eigen::VectorXd dir = s, qx, qy;
    double gamma = s.squaredNorm();
    int it = 0;
    double rel = 1.0;
    for (; it < opt.max_iterations; ++it) {
        apply(dir, qx, qy);
        const double qq = qx.squaredNorm() + qy.squaredNorm();
        if (qq == 0.0) break;
        const double alpha = gamma / qq;
        phi += alpha * dir;
        rx -= alpha * qx;
        ry -= alpha * qy;
        s = apply_t(rx, ry);
        const double gamma_new = s.squaredNorm();
        rel = std::sqrt(gamma_new) / w_norm;
        if (rel <= opt.tolerance) {
            ++it;
            break;
        }
        dir = s + (gamma_new / gamma) * dir;
        gamma = gamma_new;
    }
    if (rel > opt.tolerance) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "Neumann Poisson solve did not converge in %d iterations (residual %.3e)", it,
                      rel);
        throw ConvergenceError(buf, rel);
    }
    phi.array() -= phi.mean();
    out.phi = phi;
    out.grad_phi = grid_gradient(phi, n);
    out.u = GridField(n, w.u1() - out.grad_phi.u1(), w.u2() - out.grad_phi.u2());
    out.iterations = it;
    out.relative_residual = rel;
    return out;
}

/// |sum_cells h^2 u . G(phi)| for a sampled test potential phi: the grid
/// estimate of int u . grad(phi).
template <class Phi>
double weak_divergence_residual(const GridField& u, Phi&& phi) {
    const int n = u.n();
    Eigen::VectorXd s(static_cast<Eigen::Index>(n) * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) s[u.index(i, j)] = phi(u.x(i), u.y(j));
    const GridField g = grid_gradient(s, n);
    return std::abs((u.u1().dot(g.u1()) + u.u2().dot(g.u2())) * u.h() * u.h());
}

/// Max residual over tensor cosines cos(a pi x) cos(b pi y), taken in order of
/// a + b then a, first n_test of them.
inline double weak_divergence_test(const GridField& u, int n_test) {
    double worst = 0.0;
    int count = 0;
    for (int deg = 0; count < n_test; ++deg)
        for (int a = 0; a <= deg && count < n_test; ++a, ++count) {
            const int b = deg - a;
            worst = std::max(worst, weak_divergence_residual(u, [a, b](double x, double y) {
                                 return std::cos(a * std::numbers::pi * x) * std::cos(b * std::numbers::pi * y);
                             }));
        }
    return worst;
}

// CSV: header "x,y,u1,u2", rows in storage order (row j of the grid, then i).

inline void write_grid_csv(std::ostream& os, const GridField& g) {
    os << "x,y,u1,u2\n";
    char buf[128];
    for (int j = 0; j < g.n(); ++j)
        for (int i = 0; i < g.n(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", g.x(i), g.y(j), g.u1()[g.index(i, j)],
                          g.u2()[g.index(i, j)]);
            os << buf;
        }
}

inline GridField read_grid_csv(std::istream& is, const std::string& name = "<grid>") {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(is, line)) throw ParseError(name, 1, "empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x,y,u1,u2") throw ParseError(name, 1, "expected header 'x,y,u1,u2'");
    std::vector<double> xs, ys, a, b;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        double v[4];
        std::istringstream ls(line);
        for (int k = 0; k < 4; ++k) {
            std::string cell;
            if (!std::getline(ls, cell, ',')) throw ParseError(name, lineno, "expected 4 columns");
            if (!cell.empty() && cell.back() == '\r') cell.pop_back();
            char* end = nullptr;
            v[k] = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size()) throw ParseError(name, lineno, "invalid number '" + cell + "'");
            if (!std::isfinite(v[k])) throw ParseError(name, lineno, "non-finite value");
        }
        xs.push_back(v[0]);
        ys.push_back(v[1]);
        a.push_back(v[2]);
        b.push_back(v[3]);
    }
    const auto rows = static_cast<int>(a.size());
    const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(rows))));
    if (n * n != rows || n < 8) throw ParseError(name, lineno, "row count " + std::to_string(rows) + " is not n^2 with n >= 8");
    GridField g(n);
    for (int r = 0; r < rows; ++r) {
        const int i = r % n, j = r / n;
        if (std::abs(xs[r] - g.x(i)) > 1e-9 || std::abs(ys[r] - g.y(j)) > 1e-9) {
            throw ParseError(name, static_cast<std::size_t>(r) + 2, "coordinates do not match a cell-centered grid");
        }
        g.u1()[r] = a[r];
        g.u2()[r] = b[r];
    }
    return g;
}

} // namespace pnsg
