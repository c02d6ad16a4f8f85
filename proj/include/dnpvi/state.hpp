#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace dnpvi {

/// Nodal values of the m-component solution at one time level, node-major:
/// values[node * m + component].
struct StateField {
    int m = 1;
    Eigen::VectorXd values;
    double t = 0.0;

    StateField() = default;
    StateField(int components, std::size_t num_nodes, double time = 0.0)
        : m(components), values(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_nodes) * components)), t(time) {}

    [[nodiscard]] std::size_t num_nodes() const noexcept { return static_cast<std::size_t>(values.size() / m); }
    [[nodiscard]] double operator()(std::size_t node, int comp) const {
        return values[static_cast<Eigen::Index>(node) * m + comp];
    }
    double& operator()(std::size_t node, int comp) { return values[static_cast<Eigen::Index>(node) * m + comp]; }
};

struct NewtonStats {
    int iterations = 0;
    double initial_residual = 0.0;
    double final_residual = 0.0;
    int halvings = 0;         // total line-search halvings
    int dt_retries = 0;       // times the step was redone with dt/2
};

/// Time levels t_0 = 0 < t_1 < ... < t_N = t_end. `stats[n]` and `pairing[n]`
/// refer to level n; level 0 carries empty stats and the pairing of u0.
struct Trajectory {
    std::vector<StateField> states;
    std::vector<NewtonStats> stats;
    std::vector<double> pairing;  // <beta(u^n), u^n>

    [[nodiscard]] std::size_t size() const noexcept { return states.size(); }
    [[nodiscard]] double time(std::size_t n) const { return states[n].t; }
    [[nodiscard]] const StateField& final_state() const { return states.back(); }
};

}  // namespace dnpvi
