#pragma once

#include <cmath>

namespace qachain {

// sech(beta*x) and tanh(beta*x) that stay finite for beta -> inf (including
// beta == inf with x == 0, where the product itself would be NaN).

inline double sech_scaled(double beta, double x) {
    if (x == 0.0 || beta == 0.0) return 1.0;
    const double e = std::exp(-beta * std::abs(x));
    return 2.0 * e / (1.0 + e * e);
}

inline double tanh_scaled(double beta, double x) {
    if (x == 0.0 || beta == 0.0) return 0.0;
    const double e = std::exp(-2.0 * beta * std::abs(x));
    return std::copysign((1.0 - e) / (1.0 + e), x);
}

}  // namespace qachain
