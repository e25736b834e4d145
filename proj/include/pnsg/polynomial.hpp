#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace pnsg {

/// Dense univariate polynomial in the monomial basis, c[k] multiplies x^k.
class Polynomial {
public:
    Polynomial() : c_{0.0} {}
    explicit Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) {
        if (c_.empty()) c_.push_back(0.0);
    }

    const std::vector<double>& coefficients() const noexcept { return c_; }
    std::size_t degree() const noexcept { return c_.size() - 1; }

    double operator()(double x) const noexcept {
        double r = 0.0;
        for (std::size_t k = c_.size(); k-- > 0;) r = r * x + c_[k];
        return r;
    }

    Polynomial derivative() const {
        if (c_.size() == 1) return Polynomial{};
        std::vector<double> d(c_.size() - 1);
        for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = static_cast<double>(k) * c_[k];
        return Polynomial(std::move(d));
    }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        std::vector<double> r(a.c_.size() + b.c_.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.c_.size(); ++i)
            for (std::size_t j = 0; j < b.c_.size(); ++j) r[i + j] += a.c_[i] * b.c_[j];
        return Polynomial(std::move(r));
    }

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
        std::vector<double> r(std::max(a.c_.size(), b.c_.size()), 0.0);
        for (std::size_t i = 0; i < a.c_.size(); ++i) r[i] += a.c_[i];
        for (std::size_t i = 0; i < b.c_.size(); ++i) r[i] += b.c_[i];
        return Polynomial(std::move(r));
    }

    friend Polynomial operator*(double s, const Polynomial& a) {
        std::vector<double> r = a.c_;
        for (double& v : r) v *= s;
        return Polynomial(std::move(r));
    }

    friend bool operator==(const Polynomial&, const Polynomial&) = default;

private:
    std::vector<double> c_;
};

/// Shifted Legendre polynomial P_n(2x - 1) in monomial form.
inline Polynomial shifted_legendre(int n) {
    Polynomial p0({1.0});
    if (n == 0) return p0;
    const Polynomial t({-1.0, 2.0});
    Polynomial p1 = t;
    for (int k = 2; k <= n; ++k) {
        Polynomial pk = ((2.0 * k - 1.0) / k) * (t * p1) + (-(k - 1.0) / k) * p0;
        p0 = std::move(p1);
        p1 = std::move(pk);
    }
    return p1;
}

/// x^2 (1 - x)^2: the clamping factor that makes psi and grad psi vanish at 0 and 1.
inline Polynomial clamp_factor() { return Polynomial({0.0, 0.0, 1.0, -2.0, 1.0}); }

} // namespace pnsg
