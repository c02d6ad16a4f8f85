#pragma once

// P1 finite elements for the implicit-Euler / penalty discretization.
//
// For every basis function phi_i not on the Dirichlet part the residual is
//
//   R_i = sum_n w_n (B(u_n) - B(u_old,n))/dt . phi_i(x_n)          lumped mass
//       + int_Omega (K(u) grad u + e(u)) . grad phi_i
//       - int_Gamma2 g(x,t,u) . phi_i - int_Omega F(x,t,u) . phi_i
//       + (1/eps) int_Gamma3 u^+ . phi_i                           constrained components
//
// with 3-point rules on elements and facets (point evaluation for 1D facets).

#include "dnpvi/mesh.hpp"
#include "dnpvi/problem.hpp"
#include "dnpvi/state.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <limits>
#include <span>
#include <vector>

namespace dnpvi {

using SparseMatrix = Eigen::SparseMatrix<double>;

inline constexpr double kNoPenalty = std::numeric_limits<double>::infinity();

/// Degrees of freedom: node-major (node * m + comp). Nodes on the Dirichlet
/// part are eliminated for every component; the rest are "free".
class DofMap {
public:
    DofMap(const Mesh& mesh, int m);

    [[nodiscard]] int components() const noexcept { return m_; }
    [[nodiscard]] std::size_t num_dofs() const noexcept { return free_index_.size(); }
    [[nodiscard]] std::size_t num_free() const noexcept { return free_.size(); }
    [[nodiscard]] const std::vector<int>& free_dofs() const noexcept { return free_; }
    /// -1 for Dirichlet dofs.
    [[nodiscard]] int free_index(int dof) const { return free_index_[static_cast<std::size_t>(dof)]; }
    [[nodiscard]] bool is_dirichlet_node(int node) const { return dirichlet_node_[static_cast<std::size_t>(node)]; }

private:
    int m_;
    std::vector<int> free_;
    std::vector<int> free_index_;
    std::vector<bool> dirichlet_node_;
};

/// Residual restricted to free dofs, plus its separate contributions.
struct WeakFormTerms {
    std::vector<int> free_dofs;  // global dof of each entry
    Eigen::VectorXd residual;
    Eigen::VectorXd parabolic;
    Eigen::VectorXd stiffness;   // K grad u . grad phi
    Eigen::VectorXd convection;  // e . grad phi
    Eigen::VectorXd load;        // -F phi
    Eigen::VectorXd boundary;    // -g phi
    Eigen::VectorXd penalty;     // (1/eps) u^+ phi
};

/// Discrete penalty operator on the unilateral part: b_i = int_Gamma3 u^+ phi_i
/// for constrained components (full dof length) and the pairing <beta(u), u>.
struct PenaltyForm {
    Eigen::VectorXd values;
    double pairing = 0.0;
};

/// Assembly context for one (problem, mesh) pair. Stateless between calls.
class Assembler {
public:
    Assembler(const ProblemSpec& spec, const Mesh& mesh);

    [[nodiscard]] const DofMap& dofs() const noexcept { return dofs_; }
    [[nodiscard]] const ProblemSpec& spec() const noexcept { return *spec_; }
    [[nodiscard]] const Mesh& mesh() const noexcept { return *mesh_; }

    /// `t` is the time level of u_new (coefficients F, g are evaluated there).
    /// eps = kNoPenalty drops the penalty term.
    [[nodiscard]] WeakFormTerms residual(const StateField& u_new, const StateField& u_old, double dt, double eps,
                                         double t) const;
    /// Jacobian over free dofs; d(u^+)/du is 1 for u > 0 and 0 otherwise.
    [[nodiscard]] SparseMatrix jacobian(const StateField& u_new, const StateField& u_old, double dt, double eps,
                                        double t) const;
    /// Both at once (one pass with derivative evaluation).
    void residual_and_jacobian(const StateField& u_new, const StateField& u_old, double dt, double eps, double t,
                               Eigen::VectorXd& residual, SparseMatrix& jacobian) const;

    /// Unpenalized residual over all dofs, Dirichlet rows included.
    [[nodiscard]] Eigen::VectorXd full_residual(const StateField& u_new, const StateField& u_old, double dt,
                                                double t) const;

    [[nodiscard]] PenaltyForm penalty_form(const StateField& u) const;

    /// Global dofs subject to the sign constraint (unilateral nodes that are not
    /// Dirichlet nodes, constrained components), ascending.
    [[nodiscard]] const std::vector<int>& constrained_dofs() const noexcept { return constrained_; }

    /// Sets Dirichlet node values to the Dirichlet data at time t (zero by default).
    void apply_dirichlet(StateField& u, double t) const;

private:
    template <class Scalar>
    void assemble(const StateField& u_new, const StateField& u_old, double dt, double eps, double t,
                  WeakFormTerms* terms, Eigen::VectorXd* full, SparseMatrix* jacobian) const;

    const ProblemSpec* spec_;
    const Mesh* mesh_;
    DofMap dofs_;
    std::vector<int> constrained_;
};

[[nodiscard]] PenaltyForm penalty_form(const StateField& u, const Mesh& mesh, const ProblemSpec& spec);

[[nodiscard]] WeakFormTerms assemble_residual(const StateField& u_new, const StateField& u_old, double dt,
                                              double eps, const ProblemSpec& spec, const Mesh& mesh, double t);

[[nodiscard]] SparseMatrix assemble_jacobian(const StateField& u_new, const StateField& u_old, double dt, double eps,
                                             const ProblemSpec& spec, const Mesh& mesh, double t);

/// Discrete flux (K grad u + e).n weighted by phi_i at each constrained dof,
/// recovered as the unpenalized residual; aligned with constrained_dofs().
[[nodiscard]] Eigen::VectorXd recover_flux(const StateField& u_new, const StateField& u_old, double dt,
                                           const ProblemSpec& spec, const Mesh& mesh, double t);

/// A test function for the variational inequality: one field per trajectory level.
using TestTrajectory = std::vector<StateField>;

/// sum_n dt_n <T_h(u^n; u^{n-1}), phi^n - u^n> over free dofs, with T_h the
/// unpenalized implicit-Euler residual. Throws InvalidArgument when phi
/// violates the sign constraint at a constrained dof.
[[nodiscard]] double vi_gap(const Trajectory& traj, const TestTrajectory& phi, const ProblemSpec& spec,
                            const Mesh& mesh);

/// Minimum of vi_gap over the bank; >= 0 certifies the discrete inequality on the bank.
[[nodiscard]] double vi_residual(const Trajectory& traj, const ProblemSpec& spec, const Mesh& mesh,
                                 std::span<const TestTrajectory> bank);

/// Random feasible test functions: phi^n = u^n + amplitude * r, r uniform in
/// [-1, 1] per free dof, then clamped to <= 0 at constrained dofs.
[[nodiscard]] std::vector<TestTrajectory> make_feasible_bank(const Trajectory& traj, const ProblemSpec& spec,
                                                             const Mesh& mesh, int count, double amplitude,
                                                             std::uint64_t seed);

/// Exact L2(Omega) norm of a P1 field, per component summed.
[[nodiscard]] double l2_norm(const Mesh& mesh, const StateField& u);
/// H1 seminorm squared.
[[nodiscard]] double h1_seminorm_squared(const Mesh& mesh, const StateField& u);

}  // namespace dnpvi
