#pragma once

#include <array>
#include <vector>

namespace dnpvi {

/// Quadrature rule on a reference simplex. Points are barycentric
/// coordinates; weights sum to 1 (multiply by the simplex measure).
template <int Vertices>
struct SimplexRule {
    std::vector<std::array<double, Vertices>> points;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [0,1]; exact for degree 2n-1.
[[nodiscard]] SimplexRule<2> gauss_legendre(int n);

/// 3-point Gauss on a segment (degree 5).
[[nodiscard]] const SimplexRule<2>& segment_rule3();

/// 3-point interior rule on a triangle (degree 2).
[[nodiscard]] const SimplexRule<3>& triangle_rule3();

/// 7-point rule on a triangle (degree 5), used for error norms.
[[nodiscard]] const SimplexRule<3>& triangle_rule7();

}  // namespace dnpvi
