#pragma once

#include "dnpvi/error.hpp"
#include "dnpvi/fem.hpp"
#include "dnpvi/mesh.hpp"
#include "dnpvi/problem.hpp"
#include "dnpvi/state.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dnpvi {

/// Strictly decreasing penalty parameters for the continuation sweep.
struct PenaltySchedule {
    std::vector<double> eps;
    bool warm_start = true;

    /// eps_k = eps0 * 10^-k, k = 0..stages-1.
    [[nodiscard]] static PenaltySchedule geometric(double eps0, int stages, bool warm_start = true);
    [[nodiscard]] static PenaltySchedule from(const SolverSettings& settings);
    void check() const;
};

struct SolverConfig {
    double dt = 0.01;
    double t_end = 0.5;
    double newton_rtol = 1e-10;  // on ||R||_inf relative to the residual at u_old
    double newton_atol = 1e-12;
    int newton_max_iter = 25;
    int max_halvings = 8;
    double armijo_c = 1e-4;

    [[nodiscard]] static SolverConfig from(const SolverSettings& settings);
    void check() const;
};

struct InitialState {
    StateField u;
    double psi_integral = 0.0;     // sum_i w_i Psi(u0_i)
    double energy_pairing = 0.0;   // sum_i w_i u0_i . B(u0_i)
};

/// Nodal interpolation of u0, Dirichlet nodes overwritten by the Dirichlet data at t = 0.
[[nodiscard]] InitialState project_initial(const ProblemSpec& spec, const Mesh& mesh);

/// Lumped Psi-energy sum_i w_i Psi(u_i).
[[nodiscard]] double psi_energy(const ProblemSpec& spec, const Mesh& mesh, const StateField& u);

class StepFailure : public SolverError {
public:
    StepFailure(const std::string& what, StateField last, std::vector<double> history)
        : SolverError(what), last_iterate_(std::move(last)), history_(std::move(history)) {}

    [[nodiscard]] const StateField& last_iterate() const noexcept { return last_iterate_; }
    /// ||R||_inf per Newton iterate, starting with the initial guess.
    [[nodiscard]] const std::vector<double>& residual_history() const noexcept { return history_; }

private:
    StateField last_iterate_;
    std::vector<double> history_;
};

struct StepResult {
    StateField u;
    NewtonStats stats;
    std::vector<double> residual_history;
};

/// Damped semismooth Newton for R(u_new; u_old) = 0 at time t_new.
/// `guess` supplies the first iterate (Dirichlet values are reimposed);
/// `pinned` lists free dofs held at 0. Throws StepFailure.
[[nodiscard]] StepResult newton_solve(const Assembler& assembler, const StateField& u_old, double t_new, double dt,
                                      double eps, const SolverConfig& config, const StateField& guess,
                                      const std::vector<int>& pinned = {});

/// One implicit Euler step from u_old at time t to t + dt, starting Newton from u_old.
[[nodiscard]] StepResult step(const StateField& u_old, double t, double dt, double eps, const ProblemSpec& spec,
                              const Mesh& mesh, const SolverConfig& config);

/// Time grid 0 = t_0 < ... < t_N = t_end with uniform dt, the last step clipped.
[[nodiscard]] std::vector<double> time_grid(double dt, double t_end);

struct TransientOptions {
    /// Initial Newton iterates per level (same time grid), e.g. a previous sweep stage.
    const Trajectory* warm_start = nullptr;
    /// Hook to modify the Newton initial iterate of level n before solving.
    std::function<void(StateField& guess, const StateField& u_old, std::size_t level)> perturb_guess;
};

class TransientFailure : public SolverError {
public:
    TransientFailure(const std::string& what, Trajectory partial)
        : SolverError(what), partial_(std::move(partial)) {}
    [[nodiscard]] const Trajectory& partial() const noexcept { return partial_; }

private:
    Trajectory partial_;
};

/// Implicit Euler from the projected initial state to t_end. A failed step is
/// redone once as two half steps (never below dt/100); a second failure throws
/// TransientFailure carrying the accepted levels.
[[nodiscard]] Trajectory solve_transient(const ProblemSpec& spec, const Mesh& mesh, double eps,
                                         const SolverConfig& config, const TransientOptions& options = {});

/// sqrt(sum_{n>=1} dt_n ||u^n - v^n||^2_L2): space-time L2 distance of two
/// trajectories on the same time grid.
[[nodiscard]] double l2qt_distance(const Mesh& mesh, const Trajectory& a, const Trajectory& b);
/// Same with a zero trajectory.
[[nodiscard]] double l2qt_norm(const Mesh& mesh, const Trajectory& a);

struct SweepStage {
    double eps = 0.0;
    Trajectory trajectory;
    double penalty_residual = 0.0;                 // int_0^T |<beta(u), u>| dt
    std::optional<double> distance_to_previous;    // L2(Q_T) to the previous successful stage
    bool warm_started = false;
    bool failed = false;
    std::string error;
};

/// Solves for every eps of the schedule, warm-starting from the previous stage
/// when requested. A failed stage is retried cold; if that fails too it is
/// recorded and the next stage starts cold.
[[nodiscard]] std::vector<SweepStage> sweep_eps(const ProblemSpec& spec, const Mesh& mesh,
                                                const PenaltySchedule& schedule, const SolverConfig& config);

struct UniquenessResult {
    double max_distance = 0.0;
    std::vector<Trajectory> runs;
};

/// Repeats solve_transient with randomized Newton initial iterates (uniform
/// perturbation of amplitude 0.1 ||u_old||_inf + 0.01 on every free dof) and
/// returns the largest pairwise L2(Q_T) distance.
[[nodiscard]] UniquenessResult uniqueness_probe(const ProblemSpec& spec, const Mesh& mesh, double eps,
                                                const SolverConfig& config, int n_guesses, std::uint64_t seed);

}  // namespace dnpvi
