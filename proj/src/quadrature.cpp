#include "dnpvi/quadrature.hpp"

#include "dnpvi/error.hpp"

#include <cmath>
#include <numbers>

namespace dnpvi {

SimplexRule<2> gauss_legendre(int n) {
    if (n < 1) throw InvalidArgument("gauss_legendre: need at least one node");
    SimplexRule<2> rule;
    rule.points.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    // Newton iteration on P_n from the Chebyshev-like initial guesses; roots are symmetric.
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            if (n == 1) {
                p1 = z;
                p0 = 1.0;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        // Map [-1,1] -> [0,1]; weights halve.
        const auto lo = static_cast<std::size_t>(i);
        const auto hi = static_cast<std::size_t>(n - 1 - i);
        rule.points[lo] = {0.5 * (1.0 + z), 0.5 * (1.0 - z)};
        rule.points[hi] = {0.5 * (1.0 - z), 0.5 * (1.0 + z)};
        rule.weights[lo] = 0.5 * w;
        rule.weights[hi] = 0.5 * w;
    }
    return rule;
}

const SimplexRule<2>& segment_rule3() {
    static const SimplexRule<2> rule = gauss_legendre(3);
    return rule;
}

const SimplexRule<3>& triangle_rule3() {
    static const SimplexRule<3> rule{
        {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0}, {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0}, {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}},
        {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
    return rule;
}

const SimplexRule<3>& triangle_rule7() {
    static const SimplexRule<3> rule = [] {
        const double s15 = std::sqrt(15.0);
        const double a = (6.0 - s15) / 21.0;
        const double b = (6.0 + s15) / 21.0;
        const double wa = (155.0 - s15) / 1200.0;
        const double wb = (155.0 + s15) / 1200.0;
        SimplexRule<3> r;
        r.points = {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
                    {a, a, 1.0 - 2.0 * a}, {a, 1.0 - 2.0 * a, a}, {1.0 - 2.0 * a, a, a},
                    {b, b, 1.0 - 2.0 * b}, {b, 1.0 - 2.0 * b, b}, {1.0 - 2.0 * b, b, b}};
        r.weights = {9.0 / 40.0, wa, wa, wa, wb, wb, wb};
        return r;
    }();
    return rule;
}

}  // namespace dnpvi
