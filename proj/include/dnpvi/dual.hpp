#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace dnpvi {

inline constexpr int kMaxComponents = 8;

/// Forward-mode dual number carrying the gradient with respect to the
/// solution components u1..um (m <= kMaxComponents).
struct Dual {
    double v = 0.0;
    std::array<double, kMaxComponents> d{};

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)

    static Dual variable(double value, int component) {
        Dual r(value);
        r.d[static_cast<std::size_t>(component)] = 1.0;
        return r;
    }
};

namespace detail {

inline Dual scaled(const Dual& a, double value, double slope) {
    Dual r(value);
    for (int k = 0; k < kMaxComponents; ++k) r.d[k] = slope * a.d[k];
    return r;
}

}  // namespace detail

inline Dual operator-(const Dual& a) { return detail::scaled(a, -a.v, -1.0); }

inline Dual operator+(const Dual& a, const Dual& b) {
    Dual r(a.v + b.v);
    for (int k = 0; k < kMaxComponents; ++k) r.d[k] = a.d[k] + b.d[k];
    return r;
}

inline Dual operator-(const Dual& a, const Dual& b) {
    Dual r(a.v - b.v);
    for (int k = 0; k < kMaxComponents; ++k) r.d[k] = a.d[k] - b.d[k];
    return r;
}

inline Dual operator*(const Dual& a, const Dual& b) {
    Dual r(a.v * b.v);
    for (int k = 0; k < kMaxComponents; ++k) r.d[k] = a.d[k] * b.v + a.v * b.d[k];
    return r;
}

inline Dual operator/(const Dual& a, const Dual& b) {
    Dual r(a.v / b.v);
    const double inv = 1.0 / b.v;
    for (int k = 0; k < kMaxComponents; ++k) r.d[k] = (a.d[k] - r.v * b.d[k]) * inv;
    return r;
}

inline bool has_gradient(const Dual& a) {
    return std::any_of(a.d.begin(), a.d.end(), [](double x) { return x != 0.0; });
}

inline Dual sin(const Dual& a) { return detail::scaled(a, std::sin(a.v), std::cos(a.v)); }
inline Dual cos(const Dual& a) { return detail::scaled(a, std::cos(a.v), -std::sin(a.v)); }
inline Dual exp(const Dual& a) {
    const double e = std::exp(a.v);
    return detail::scaled(a, e, e);
}
inline Dual log(const Dual& a) { return detail::scaled(a, std::log(a.v), 1.0 / a.v); }
inline Dual tanh(const Dual& a) {
    const double t = std::tanh(a.v);
    return detail::scaled(a, t, 1.0 - t * t);
}
// abs'(0) := 0
inline Dual abs(const Dual& a) {
    return detail::scaled(a, std::abs(a.v), a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0));
}
inline Dual sqrt(const Dual& a) {
    const double s = std::sqrt(a.v);
    if (!has_gradient(a)) return Dual(s);
    return detail::scaled(a, s, 0.5 / s);
}
// Ties pick the first argument.
inline Dual min(const Dual& a, const Dual& b) { return b.v < a.v ? b : a; }
inline Dual max(const Dual& a, const Dual& b) { return b.v > a.v ? b : a; }

inline Dual pow(const Dual& a, const Dual& b) {
    const double value = std::pow(a.v, b.v);
    Dual r(value);
    if (has_gradient(a)) {
        const double slope = b.v == 0.0 ? 0.0 : b.v * std::pow(a.v, b.v - 1.0);
        for (int k = 0; k < kMaxComponents; ++k) r.d[k] += slope * a.d[k];
    }
    if (has_gradient(b)) {
        const double slope = value * std::log(a.v);
        for (int k = 0; k < kMaxComponents; ++k) r.d[k] += slope * b.d[k];
    }
    return r;
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

inline bool all_finite(double x) { return std::isfinite(x); }
inline bool all_finite(const Dual& x) {
    return std::isfinite(x.v) &&
           std::all_of(x.d.begin(), x.d.end(), [](double g) { return std::isfinite(g); });
}

}  // namespace dnpvi
