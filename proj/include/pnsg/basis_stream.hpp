#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "pnsg/error.hpp"
#include "pnsg/polynomial.hpp"
#include "pnsg/quadrature.hpp"

namespace pnsg {

/// Value, gradient and vector Laplacian of a velocity field at a point.
/// Gradient convention: grad(a, b) = d_a phi_b, so the divergence is grad.trace().
struct FieldValue {
    Eigen::Vector2d value = Eigen::Vector2d::Zero();
    Eigen::Matrix2d grad = Eigen::Matrix2d::Zero();
    Eigen::Vector2d laplacian = Eigen::Vector2d::Zero();
};

/// psi(x, y) = fx(x) fy(y) with fx = x^2(1-x)^2 P_i(2x-1), fy likewise in y.
/// The velocity is the rotated gradient (d_y psi, -d_x psi).
class StreamFunction {
public:
    StreamFunction(int i, int j, Polynomial fx, Polynomial fy) : i_(i), j_(j) {
        fx_[0] = std::move(fx);
        fy_[0] = std::move(fy);
        for (int d = 1; d < 4; ++d) {
            fx_[d] = fx_[d - 1].derivative();
            fy_[d] = fy_[d - 1].derivative();
        }
    }

    static StreamFunction clamped_legendre(int i, int j) {
        return StreamFunction(i, j, clamp_factor() * shifted_legendre(i), clamp_factor() * shifted_legendre(j));
    }

    int i() const noexcept { return i_; }
    int j() const noexcept { return j_; }
    const Polynomial& x_factor() const noexcept { return fx_[0]; }
    const Polynomial& y_factor() const noexcept { return fy_[0]; }
    std::size_t max_degree() const noexcept { return std::max(fx_[0].degree(), fy_[0].degree()); }

    double psi(double x, double y) const noexcept { return fx_[0](x) * fy_[0](y); }

    FieldValue evaluate(double x, double y) const noexcept {
        double a[4], b[4];
        for (int d = 0; d < 4; ++d) {
            a[d] = fx_[d](x);
            b[d] = fy_[d](y);
        }
        FieldValue f;
        f.value = {a[0] * b[1], -a[1] * b[0]};
        f.grad(0, 0) = a[1] * b[1];
        f.grad(0, 1) = -a[2] * b[0];
        f.grad(1, 0) = a[0] * b[2];
        f.grad(1, 1) = -a[1] * b[1];
        f.laplacian = {a[2] * b[1] + a[0] * b[3], -(a[3] * b[0] + a[1] * b[2])};
        return f;
    }

private:
    int i_, j_;
    Polynomial fx_[4], fy_[4];
};

/// Basis fields tabulated at the nodes of a tensor rule; every matrix is Q x N.
struct BasisTable {
    Eigen::VectorXd weights;
    Eigen::MatrixXd vx, vy;
    Eigen::MatrixXd g00, g01, g10, g11;
    Eigen::MatrixXd lap_x, lap_y;

    std::size_t nodes() const noexcept { return static_cast<std::size_t>(weights.size()); }
    Eigen::Index size() const noexcept { return vx.cols(); }
};

/// An ordered family of divergence-free fields phi_k = sum_l C(k, l) curl psi_l
/// over a pool of clamped stream functions. Covers the raw stream basis, its
/// L2-orthonormalization, and the spectral eigenbasis.
class BasisSet {
public:
    BasisSet() = default;
    BasisSet(std::string kind, std::vector<StreamFunction> raw, Eigen::MatrixXd combination, bool orthonormalized)
        : kind_(std::move(kind)), raw_(std::move(raw)), combination_(std::move(combination)),
          orthonormalized_(orthonormalized) {
        if (combination_.cols() != static_cast<Eigen::Index>(raw_.size())) {
            throw ValidationError("basis combination matrix does not match the stream pool");
        }
        gram_l2_ = compute_gram();
    }

    const std::string& kind() const noexcept { return kind_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(combination_.rows()); }
    std::size_t pool_size() const noexcept { return raw_.size(); }
    const std::vector<StreamFunction>& pool() const noexcept { return raw_; }
    const Eigen::MatrixXd& combination() const noexcept { return combination_; }
    const Eigen::MatrixXd& gram_l2() const noexcept { return gram_l2_; }
    bool orthonormalized() const noexcept { return orthonormalized_; }

    /// Tensor order that integrates products of two pool fields (or their derivatives) exactly.
    int exact_order() const noexcept {
        std::size_t deg = 0;
        for (const auto& s : raw_) deg = std::max(deg, s.max_degree());
        return static_cast<int>(deg) + 1;
    }

    /// Zero-based index k.
    FieldValue evaluate(std::size_t k, double x, double y) const {
        if (k >= size()) {
            throw ValidationError("basis index " + std::to_string(k) + " out of range [0, " +
                                  std::to_string(size()) + ")");
        }
        FieldValue out;
        for (std::size_t l = 0; l < raw_.size(); ++l) {
            const double c = combination_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
            if (c == 0.0) continue;
            const FieldValue r = raw_[l].evaluate(x, y);
            out.value += c * r.value;
            out.grad += c * r.grad;
            out.laplacian += c * r.laplacian;
        }
        return out;
    }

    /// Basis tabulated at every node of the rule. Pool fields are evaluated
    /// once per node and mapped through the combination matrix.
    BasisTable tabulate(const QuadratureRule& rule) const {
        const auto q_count = static_cast<Eigen::Index>(rule.size_2d());
        const auto m = static_cast<Eigen::Index>(raw_.size());
        Eigen::MatrixXd r[8];
        for (auto& mat : r) mat.resize(q_count, m);
        for (Eigen::Index q = 0; q < q_count; ++q) {
            const double x = rule.x(q), y = rule.y(q);
            for (Eigen::Index l = 0; l < m; ++l) {
                const FieldValue f = raw_[l].evaluate(x, y);
                r[0](q, l) = f.value[0];
                r[1](q, l) = f.value[1];
                r[2](q, l) = f.grad(0, 0);
                r[3](q, l) = f.grad(0, 1);
                r[4](q, l) = f.grad(1, 0);
                r[5](q, l) = f.grad(1, 1);
                r[6](q, l) = f.laplacian[0];
                r[7](q, l) = f.laplacian[1];
            }
        }
        BasisTable t;
        t.weights.resize(q_count);
        for (Eigen::Index q = 0; q < q_count; ++q) t.weights[q] = rule.weight(q);
        const Eigen::MatrixXd ct = combination_.transpose();
        t.vx = r[0] * ct;
        t.vy = r[1] * ct;
        t.g00 = r[2] * ct;
        t.g01 = r[3] * ct;
        t.g10 = r[4] * ct;
        t.g11 = r[5] * ct;
        t.lap_x = r[6] * ct;
        t.lap_y = r[7] * ct;
        return t;
    }

    /// Self-describing id stored in snapshot headers.
    std::string id() const {
        std::ostringstream os;
        os << kind_ << ":n=" << size() << ":pool=" << raw_.size() << ":orthonormal=" << (orthonormalized_ ? 1 : 0);
        return os.str();
    }

private:
    Eigen::MatrixXd compute_gram() const {
        const BasisTable t = tabulate(build_rule(exact_order()));
        const auto w = t.weights.asDiagonal();
        Eigen::MatrixXd g = t.vx.transpose() * w * t.vx + t.vy.transpose() * w * t.vy;
        return 0.5 * (g + g.transpose());
    }

    std::string kind_;
    std::vector<StreamFunction> raw_;
    Eigen::MatrixXd combination_;
    Eigen::MatrixXd gram_l2_;
    bool orthonormalized_ = false;
};

/// Clamped stream functions psi_ij, 0 <= i, j < n_per_axis, ordered by i + j then i.
inline std::vector<StreamFunction> stream_pool(int n_per_axis) {
    if (n_per_axis < 1) throw ValidationError("n_per_axis must be >= 1");
    std::vector<StreamFunction> pool;
    pool.reserve(static_cast<std::size_t>(n_per_axis * n_per_axis));
    for (int s = 0; s <= 2 * (n_per_axis - 1); ++s)
        for (int i = 0; i < n_per_axis; ++i) {
            const int j = s - i;
            if (j >= 0 && j < n_per_axis) pool.push_back(StreamFunction::clamped_legendre(i, j));
        }
    return pool;
}

/// Cholesky-based Gram-Schmidt: returns C with C G C^T = I, C lower triangular,
/// so the k-th output only mixes the first k inputs.
inline Eigen::MatrixXd orthonormalizing_factor(const Eigen::MatrixXd& gram) {
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw IllConditionedBasis("Gram matrix is not positive definite; basis is linearly dependent");
    }
    const Eigen::MatrixXd l = llt.matrixL();
    return l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(gram.rows(), gram.cols()));
}

inline BasisSet build_stream_basis(int n_per_axis, bool orthonormalize = true) {
    auto pool = stream_pool(n_per_axis);
    const auto m = static_cast<Eigen::Index>(pool.size());
    BasisSet raw("stream", pool, Eigen::MatrixXd::Identity(m, m), false);
    if (!orthonormalize) return raw;
    // Two passes: the second removes the round-off left by the first.
    Eigen::MatrixXd c = orthonormalizing_factor(raw.gram_l2());
    const Eigen::MatrixXd g1 = c * raw.gram_l2() * c.transpose();
    c = orthonormalizing_factor(0.5 * (g1 + g1.transpose())) * c;
    return BasisSet("stream", std::move(pool), std::move(c), true);
}

// ---------------------------------------------------------------------------
// Text serialization. One "psi" record per pool stream function with its index
// pair and monomial coefficient tables, then one "field" record per basis field
// with its combination row. Doubles are written with 17 significant digits.

namespace detail {
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
} // namespace detail

inline void write_basis(std::ostream& os, const BasisSet& b) {
    os << "pnsg-basis 1\n";
    os << "kind " << b.kind() << "\n";
    os << "orthonormal " << (b.orthonormalized() ? 1 : 0) << "\n";
    os << "pool " << b.pool_size() << "\n";
    for (const auto& s : b.pool()) {
        os << "psi " << s.i() << " " << s.j() << " x " << s.x_factor().coefficients().size();
        for (double c : s.x_factor().coefficients()) os << " " << detail::fmt17(c);
        os << " y " << s.y_factor().coefficients().size();
        for (double c : s.y_factor().coefficients()) os << " " << detail::fmt17(c);
        os << "\n";
    }
    os << "fields " << b.size() << "\n";
    for (Eigen::Index k = 0; k < b.combination().rows(); ++k) {
        os << "field " << k;
        for (Eigen::Index l = 0; l < b.combination().cols(); ++l) os << " " << detail::fmt17(b.combination()(k, l));
        os << "\n";
    }
    os << "end\n";
}

inline BasisSet read_basis(std::istream& is, const std::string& name = "<basis>") {
    std::string line;
    std::size_t lineno = 0;
    auto next = [&](const char* expect) -> std::istringstream {
        if (!std::getline(is, line)) throw ParseError(name, lineno + 1, std::string("unexpected end of file, expected ") + expect);
        ++lineno;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key != expect) throw ParseError(name, lineno, std::string("expected '") + expect + "', found '" + key + "'");
        return ls;
    };
    auto fail = [&](const std::string& msg) { throw ParseError(name, lineno, msg); };

    {
        auto ls = next("pnsg-basis");
        int version = 0;
        if (!(ls >> version) || version != 1) fail("unsupported basis format version");
    }
    std::string kind;
    if (!(next("kind") >> kind)) fail("missing kind");
    int ortho = 0;
    if (!(next("orthonormal") >> ortho)) fail("missing orthonormal flag");
    std::size_t m = 0;
    if (!(next("pool") >> m)) fail("missing pool size");

    auto read_table = [&](std::istringstream& ls, const char* tag) {
        std::string t;
        std::size_t n = 0;
        if (!(ls >> t >> n) || t != tag) fail(std::string("expected coefficient table '") + tag + "'");
        std::vector<double> c(n);
        for (auto& v : c)
            if (!(ls >> v)) fail("truncated coefficient table");
        return Polynomial(std::move(c));
    };
    std::vector<StreamFunction> pool;
    for (std::size_t l = 0; l < m; ++l) {
        auto ls = next("psi");
        int i = 0, j = 0;
        if (!(ls >> i >> j)) fail("missing index pair");
        Polynomial fx = read_table(ls, "x");
        Polynomial fy = read_table(ls, "y");
        pool.emplace_back(i, j, std::move(fx), std::move(fy));
    }
    std::size_t n = 0;
    if (!(next("fields") >> n)) fail("missing field count");
    Eigen::MatrixXd c(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < n; ++k) {
        auto ls = next("field");
        std::size_t idx = 0;
        if (!(ls >> idx) || idx != k) fail("field records out of order");
        for (std::size_t l = 0; l < m; ++l)
            if (!(ls >> c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)))) fail("truncated field record");
    }
    next("end");
    return BasisSet(kind, std::move(pool), std::move(c), ortho != 0);
}

} // namespace pnsg
