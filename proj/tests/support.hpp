#pragma once

#include "dnpvi/fem.hpp"
#include "dnpvi/problem.hpp"
#include "dnpvi/random.hpp"

#include <Eigen/Dense>

#include <string>

namespace dnpvi::test {

inline std::string problem_path(const std::string& name) {
    return std::string(DNPVI_PROBLEM_DIR) + "/" + name + ".prb";
}

inline ProblemSpec load(const std::string& name) { return load_problem(problem_path(name)); }

/// Problem on the unit interval (or square) with the given coefficient lines
/// and Dirichlet data on every side unless `boundary` says otherwise.
inline ProblemSpec make_spec(int m, const std::string& coefficients, const std::string& header = "nu = 1\np = 1\nalpha = 1\n",
                             int dim = 1, const std::string& boundary = "", const std::string& rest = "") {
    std::string text = "[problem]\nm = " + std::to_string(m) + "\ndim = " + std::to_string(dim) + "\n" + header;
    text += "[coefficients]\n" + coefficients + "\n";
    text += "[boundary]\n";
    text += boundary.empty() ? (dim == 1 ? "gamma1 = left, right\n" : "gamma1 = left, right, bottom, top\n") : boundary + "\n";
    text += rest;
    return parse_problem(text);
}

/// Central-difference Jacobian of the penalized residual over free dofs.
inline Eigen::MatrixXd fd_jacobian(const Assembler& a, const StateField& u, const StateField& u_old, double dt,
                                   double eps, double t, double step = 1e-7) {
    const auto& free = a.dofs().free_dofs();
    const auto n = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd J(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        StateField up = u, um = u;
        const int dof = free[static_cast<std::size_t>(k)];
        const double h = step * (1.0 + std::abs(u.values[dof]));
        up.values[dof] += h;
        um.values[dof] -= h;
        J.col(k) = (a.residual(up, u_old, dt, eps, t).residual - a.residual(um, u_old, dt, eps, t).residual) / (2 * h);
    }
    return J;
}

/// Random field with values in [lo, hi] and Dirichlet nodes set to the data.
inline StateField random_state(const Assembler& a, Rng& rng, double lo, double hi, double t) {
    StateField u(a.spec().m, a.mesh().num_nodes(), t);
    for (Eigen::Index i = 0; i < u.values.size(); ++i) u.values[i] = rng.uniform(lo, hi);
    a.apply_dirichlet(u, t);
    return u;
}

}  // namespace dnpvi::test
