#pragma once

// Primal-dual active set reference solver for the sign constraint on the
// unilateral boundary. Each step pins the active dofs to zero, solves the
// unpenalized equations for the rest and reads the multiplier off the
// residual at the pinned dofs.

#include "dnpvi/fem.hpp"
#include "dnpvi/mesh.hpp"
#include "dnpvi/problem.hpp"
#include "dnpvi/solver.hpp"
#include "dnpvi/state.hpp"

#include <cstddef>
#include <vector>

namespace dnpvi {

inline constexpr std::size_t kOracleMaxDofs = 500;
inline constexpr int kOracleMaxIterations = 50;

/// Active/inactive flag per constrained dof (Assembler::constrained_dofs order).
struct ActiveSet {
    std::vector<int> dofs;
    std::vector<char> active;

    [[nodiscard]] std::size_t num_active() const;
    [[nodiscard]] std::vector<int> active_dofs() const;
    friend bool operator==(const ActiveSet&, const ActiveSet&) = default;
};

struct ActiveSetResult {
    StateField u;
    Eigen::VectorXd multiplier;  // >= 0 on active dofs, exactly 0 on inactive ones
    ActiveSet set;
    int iterations = 0;          // active-set updates
    NewtonStats stats;           // summed over the inner solves
};

/// One implicit Euler step from u_old at time t. `initial` seeds the active
/// set (all inactive when null). Throws InvalidArgument above kOracleMaxDofs
/// free dofs and SolverError when the set has not settled after
/// kOracleMaxIterations updates.
[[nodiscard]] ActiveSetResult active_set_step(const StateField& u_old, double t, double dt, const ProblemSpec& spec,
                                              const Mesh& mesh, const SolverConfig& config,
                                              const ActiveSet* initial = nullptr);

struct OracleTrajectory {
    Trajectory trajectory;
    std::vector<ActiveSet> sets;                 // per level >= 1
    std::vector<Eigen::VectorXd> multipliers;    // per level >= 1
};

/// Active-set transient on the same time grid as solve_transient; each step
/// starts from the previous step's active set.
[[nodiscard]] OracleTrajectory active_set_transient(const ProblemSpec& spec, const Mesh& mesh,
                                                    const SolverConfig& config);

struct OracleComparisonRow {
    double eps = 0.0;
    double distance = 0.0;  // L2(Q_T) to the oracle trajectory
    bool failed = false;
};

struct OracleComparison {
    std::vector<OracleComparisonRow> rows;
    OracleTrajectory oracle;
    std::vector<SweepStage> sweep;
};

[[nodiscard]] OracleComparison oracle_compare(const ProblemSpec& spec, const Mesh& mesh,
                                              const PenaltySchedule& schedule, const SolverConfig& config);

}  // namespace dnpvi
