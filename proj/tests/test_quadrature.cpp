#include "dnpvi/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dnpvi;

namespace {

// int_0^1 s^k ds
double monomial_1d(int k) { return 1.0 / (k + 1); }

// int over the reference triangle of l1^a l2^b l3^c, normalized by its area:
// 2 a! b! c! / (a+b+c+2)!
double monomial_tri(int a, int b, int c) {
    return 2.0 * std::tgamma(a + 1) * std::tgamma(b + 1) * std::tgamma(c + 1) / std::tgamma(a + b + c + 3);
}

}  // namespace

TEST(Quadrature, GaussLegendreExactness) {
    for (int n : {1, 2, 3, 5, 8, 16}) {
        const auto rule = gauss_legendre(n);
        ASSERT_EQ(rule.weights.size(), static_cast<std::size_t>(n));
        for (int k = 0; k <= 2 * n - 1; ++k) {
            double s = 0.0;
            for (std::size_t q = 0; q < rule.weights.size(); ++q) s += rule.weights[q] * std::pow(rule.points[q][1], k);
            EXPECT_NEAR(s, monomial_1d(k), 1e-14) << "n=" << n << " k=" << k;
        }
    }
}

TEST(Quadrature, BarycentricPointsSumToOne) {
    for (const auto& p : segment_rule3().points) EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
    for (const auto& p : triangle_rule7().points) EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-15);
}

TEST(Quadrature, TriangleRules) {
    const auto check = [](const SimplexRule<3>& rule, int degree) {
        for (int a = 0; a <= degree; ++a) {
            for (int b = 0; a + b <= degree; ++b) {
                const int c = 0;
                double s = 0.0;
                for (std::size_t q = 0; q < rule.weights.size(); ++q) {
                    s += rule.weights[q] * std::pow(rule.points[q][0], a) * std::pow(rule.points[q][1], b) *
                         std::pow(rule.points[q][2], c);
                }
                EXPECT_NEAR(s, monomial_tri(a, b, c), 1e-14) << a << " " << b;
            }
        }
    };
    check(triangle_rule3(), 2);
    check(triangle_rule7(), 5);
}

TEST(Quadrature, SegmentRuleDegreeFive) {
    const auto& rule = segment_rule3();
    for (int k = 0; k <= 5; ++k) {
        double s = 0.0;
        for (std::size_t q = 0; q < 3; ++q) s += rule.weights[q] * std::pow(rule.points[q][0], k);
        EXPECT_NEAR(s, monomial_1d(k), 1e-15);
    }
}
