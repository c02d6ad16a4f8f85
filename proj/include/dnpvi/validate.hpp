#pragma once

#include "dnpvi/mesh.hpp"
#include "dnpvi/problem.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dnpvi {

enum class Verdict { Pass, SampledPass, Fail };

[[nodiscard]] std::string_view verdict_name(Verdict v) noexcept;

/// One concrete point (or pair of points) where a condition was violated.
struct Witness {
    std::vector<double> z1;
    std::vector<double> z2;   // second point of a pair check, or the direction xi
    std::string detail;
};

struct CheckEntry {
    std::string condition;  // "A1", "A2", ...
    std::string description;
    Verdict verdict = Verdict::SampledPass;
    std::vector<Witness> witnesses;  // non-empty when verdict == Fail
    std::map<std::string, double> estimates;  // sampled constants (c, c1, c2, C_L, ...)
};

struct ValidationReport {
    std::vector<CheckEntry> entries;

    [[nodiscard]] bool passed() const;
    [[nodiscard]] const CheckEntry* find(std::string_view condition) const;
    [[nodiscard]] std::string to_text() const;
};

/// Admissible sampling box |z_i| <= half_width and the number of draws.
struct SampleBox {
    int samples = 1000;
    double half_width = 10.0;
    std::uint64_t seed = 42;

    static SampleBox from(const ProblemSpec& spec) {
        return {spec.sampling.samples, spec.sampling.box, spec.sampling.seed};
    }
};

/// Psi(z) = int_0^1 (B(z) - B(s z)) . z ds by quad_n-point Gauss-Legendre.
[[nodiscard]] double legendre_psi(const ProblemSpec& spec, std::span<const double> z, int quad_n = 16);
/// Same with B given directly (one expression per component).
[[nodiscard]] double legendre_psi(std::span<const Expr> B, std::span<const double> z, int quad_n = 16);

/// h^j = int_0^{z} K^{jj}(xi e_j) d xi for a diagonal K with K^j depending on u_j only.
[[nodiscard]] double kirchhoff_transform(const ProblemSpec& spec, int component, double z, int quad_n = 16);
/// Inverse of the increasing map above by safeguarded Newton iteration.
[[nodiscard]] double kirchhoff_inverse(const ProblemSpec& spec, int component, double h);

/// (A1): strict monotonicity of B on sampled pairs and symmetric finite-difference Jacobian.
[[nodiscard]] CheckEntry check_monotone_gradient(const ProblemSpec& spec, const SampleBox& box);
/// (A1) coercivity: Psi(z) >= c1 |z|^(nu+1) - c2, estimated along rays and in the box.
[[nodiscard]] CheckEntry check_psi_coercive(const ProblemSpec& spec, const SampleBox& box);
/// (A2): uniform ellipticity of K and boundedness of K and e.
[[nodiscard]] CheckEntry check_K_pd_bounded(const ProblemSpec& spec, const SampleBox& box);

enum class A4Variant { Literal, NuBound };

struct A4Result {
    bool ok = false;
    std::string reason;
};

/// (A4) predicate. `Literal` uses alpha < (N + alpha + 1)/N in case (ii);
/// `NuBound` uses alpha < (N + nu + 1)/N.
[[nodiscard]] A4Result check_A4(double nu, double p, double alpha, int N, A4Variant variant = A4Variant::Literal);

/// (A3): |F| <= c(|z|^p + 1) and |g| <= c(|z|^alpha + 1), sampled over the box and along rays.
[[nodiscard]] CheckEntry check_growth(const ProblemSpec& spec, const SampleBox& box);

/// Uniqueness hypotheses: diagonal K, K^j = K^j(u_j) with c1 <= K^j <= c2,
/// sampled Lipschitz constants of K^j, e, F, g.
[[nodiscard]] std::vector<CheckEntry> check_uniqueness(const ProblemSpec& spec, const SampleBox& box);

/// (A5): u0 finite at every node, Psi(u0) and u0.B(u0) finite on every element.
[[nodiscard]] CheckEntry check_initial(const ProblemSpec& spec, const Mesh& mesh);

/// Runs every check; uniqueness checks only when spec.uniqueness_mode is set.
/// Evaluation errors become Fail entries.
[[nodiscard]] ValidationReport validate(const ProblemSpec& spec, const Mesh& mesh);

}  // namespace dnpvi
