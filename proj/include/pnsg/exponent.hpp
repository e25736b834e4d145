#pragma once

#include <cmath>
#include <sstream>

#include "pnsg/error.hpp"

namespace pnsg {

/// Growth exponent of the p-Laplacian, p >= 2. The conjugate exponent q with
/// 1/p + 1/q = 1 is always derived here and never taken as input.
class Exponent {
public:
    explicit Exponent(double p) : p_(p) {
        if (!(p >= 2.0) || !std::isfinite(p)) {
            std::ostringstream os;
            os << "exponent p must satisfy p >= 2 (got " << p << ")";
            throw ValidationError(os.str());
        }
    }

    double p() const noexcept { return p_; }
    double q() const noexcept { return p_ / (p_ - 1.0); }
    bool is_quadratic() const noexcept { return p_ == 2.0; }

private:
    double p_;
};

} // namespace pnsg
