#include "dnpvi/oracle.hpp"

#include "dnpvi/error.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace dnpvi {

std::size_t ActiveSet::num_active() const {
    return static_cast<std::size_t>(std::count(active.begin(), active.end(), char{1}));
}

std::vector<int> ActiveSet::active_dofs() const {
    std::vector<int> out;
    for (std::size_t k = 0; k < dofs.size(); ++k) {
        if (active[k]) out.push_back(dofs[k]);
    }
    return out;
}

namespace {

ActiveSetResult solve_step(const Assembler& assembler, const StateField& u_old, double t, double dt,
                           const SolverConfig& config, const ActiveSet* initial) {
    if (assembler.dofs().num_free() > kOracleMaxDofs) {
        throw InvalidArgument(fmt::format("active-set oracle is limited to {} dofs (problem has {})", kOracleMaxDofs,
                                          assembler.dofs().num_free()));
    }
    const auto& dofs = assembler.constrained_dofs();
    ActiveSet set;
    if (initial != nullptr && initial->dofs == dofs) {
        set = *initial;
    } else {
        set.dofs = dofs;
        set.active.assign(dofs.size(), 0);
    }
    const double t_new = t + dt;
    ActiveSetResult out;
    StateField guess = u_old;
    for (int it = 1; it <= kOracleMaxIterations; ++it) {
        StepResult res = newton_solve(assembler, u_old, t_new, dt, kNoPenalty, config, guess, set.active_dofs());
        out.stats.iterations += res.stats.iterations;
        out.stats.halvings += res.stats.halvings;
        out.stats.final_residual = res.stats.final_residual;
        if (it == 1) out.stats.initial_residual = res.stats.initial_residual;
        const Eigen::VectorXd full = assembler.full_residual(res.u, u_old, dt, t_new);

        ActiveSet next = set;
        Eigen::VectorXd lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dofs.size()));
        for (std::size_t k = 0; k < dofs.size(); ++k) {
            if (set.active[k]) {
                lambda[static_cast<Eigen::Index>(k)] = -full[dofs[k]];
                if (lambda[static_cast<Eigen::Index>(k)] < 0.0) next.active[k] = 0;
            } else if (res.u.values[dofs[k]] > 0.0) {
                next.active[k] = 1;
            }
        }
        if (next == set) {
            out.u = std::move(res.u);
            out.multiplier = std::move(lambda);
            out.set = std::move(set);
            out.iterations = it;
            return out;
        }
        set = std::move(next);
        guess = std::move(res.u);
    }
    throw SolverError(fmt::format("active set did not settle after {} updates at t = {:.6g}", kOracleMaxIterations,
                                  t_new));
}

}  // namespace

ActiveSetResult active_set_step(const StateField& u_old, double t, double dt, const ProblemSpec& spec,
                                const Mesh& mesh, const SolverConfig& config, const ActiveSet* initial) {
    const Assembler assembler(spec, mesh);
    return solve_step(assembler, u_old, t, dt, config, initial);
}

OracleTrajectory active_set_transient(const ProblemSpec& spec, const Mesh& mesh, const SolverConfig& config) {
    config.check();
    const Assembler assembler(spec, mesh);
    const auto grid = time_grid(config.dt, config.t_end);
    OracleTrajectory out;
    Trajectory& traj = out.trajectory;
    traj.states.push_back(project_initial(spec, mesh).u);
    traj.stats.emplace_back();
    traj.pairing.push_back(assembler.penalty_form(traj.states.back()).pairing);
    for (std::size_t n = 1; n < grid.size(); ++n) {
        const ActiveSet* seed = out.sets.empty() ? nullptr : &out.sets.back();
        ActiveSetResult res = solve_step(assembler, traj.states.back(), grid[n - 1], grid[n] - grid[n - 1], config, seed);
        res.u.t = grid[n];
        traj.pairing.push_back(assembler.penalty_form(res.u).pairing);
        traj.stats.push_back(res.stats);
        traj.states.push_back(std::move(res.u));
        out.sets.push_back(std::move(res.set));
        out.multipliers.push_back(std::move(res.multiplier));
    }
    return out;
}

OracleComparison oracle_compare(const ProblemSpec& spec, const Mesh& mesh, const PenaltySchedule& schedule,
                                const SolverConfig& config) {
    OracleComparison out;
    out.oracle = active_set_transient(spec, mesh, config);
    out.sweep = sweep_eps(spec, mesh, schedule, config);
    for (const auto& stage : out.sweep) {
        OracleComparisonRow row;
        row.eps = stage.eps;
        row.failed = stage.failed;
        if (!stage.failed) row.distance = l2qt_distance(mesh, stage.trajectory, out.oracle.trajectory);
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace dnpvi
