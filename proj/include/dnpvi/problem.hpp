#pragma once

#include "dnpvi/expr.hpp"
#include "dnpvi/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dnpvi {

struct DomainSpec {
    enum class Kind { Interval, Square, File };
    Kind kind = Kind::Interval;
    int n = 32;   // interval elements
    int nx = 8;   // square subdivisions
    int ny = 8;
    std::string file;  // mesh file, relative to the problem file
};

/// Time stepping, penalty and Newton settings. Defaults are the library defaults;
/// a problem file's [solver] section overrides them.
struct SolverSettings {
    double dt = 0.01;
    double t_end = 0.5;
    double eps = 1e-6;         // single-solve penalty parameter
    double eps0 = 1e-2;        // first stage of the continuation sweep
    int eps_stages = 5;        // eps_k = eps0 * 10^-k
    double newton_rtol = 1e-10;
    double newton_atol = 1e-12;
    int newton_max_iter = 25;
    int max_halvings = 8;
};

/// Sampling parameters of the structure-condition checks.
struct SamplingSettings {
    int samples = 1000;
    std::uint64_t seed = 42;
    double box = 10.0;  // |z_i| <= box
};

/// A parsed problem: coefficient functions, exponents, boundary partition
/// and constraint mask. Immutable after parsing.
struct ProblemSpec {
    std::string name;
    int m = 1;
    int dim = 1;
    double nu = 1.0;
    double p = 1.0;
    double alpha = 1.0;

    std::vector<Expr> B;   // m, functions of u
    std::vector<Expr> K;   // m*m, K[j*m + i] = K^{ji}(u)
    std::vector<Expr> e;   // m*dim, e[j*dim + k] = e^j_k(u)
    std::vector<Expr> F;   // m, functions of (x, t, u)
    std::vector<Expr> g;   // m, functions of (x, t, u) on the Neumann part
    std::vector<Expr> u0;  // m, functions of x
    std::optional<std::vector<Expr>> dirichlet;  // m, functions of (x, t)

    std::vector<bool> constrained;  // per component, sign constraint on the unilateral part
    bool uniqueness_mode = false;

    SideTags boundary;  // side or facet label -> boundary part
    DomainSpec domain;
    SolverSettings solver;
    SamplingSettings sampling;

    std::string text;  // source text of the problem file

    [[nodiscard]] const Expr& K_at(int j, int i) const { return K[static_cast<std::size_t>(j * m + i)]; }
    [[nodiscard]] const Expr& e_at(int j, int k) const { return e[static_cast<std::size_t>(j * dim + k)]; }
    [[nodiscard]] bool any_constrained() const;
    [[nodiscard]] bool has_neumann_data() const;
};

/// Parses the sectioned key/value problem format. Throws ParseError with the
/// offending line (and column for expressions).
[[nodiscard]] ProblemSpec parse_problem(std::string_view text);
[[nodiscard]] ProblemSpec load_problem(const std::filesystem::path& path);

/// Builds the mesh described by [domain]/[boundary] and checks it against the
/// problem: tagged parts have positive measure, Neumann data needs a Neumann
/// part, a constraint mask needs a unilateral part.
[[nodiscard]] Mesh make_mesh(const ProblemSpec& spec, const std::filesystem::path& base_dir = {});

}  // namespace dnpvi
