#include "dnpvi/solver.hpp"

#include "dnpvi/diagnostics.hpp"
#include "dnpvi/random.hpp"
#include "dnpvi/validate.hpp"

#include <Eigen/SparseLU>
#include <fmt/format.h>

#include <algorithm>
#include <cfloat>
#include <cmath>

namespace dnpvi {

PenaltySchedule PenaltySchedule::geometric(double eps0, int stages, bool warm_start) {
    if (!(eps0 > 0.0) || stages < 1) throw InvalidArgument("penalty schedule needs eps0 > 0 and at least one stage");
    PenaltySchedule s;
    s.warm_start = warm_start;
    for (int k = 0; k < stages; ++k) s.eps.push_back(eps0 / std::pow(10.0, k));
    return s;
}

PenaltySchedule PenaltySchedule::from(const SolverSettings& settings) {
    return geometric(settings.eps0, settings.eps_stages);
}

void PenaltySchedule::check() const {
    if (eps.empty()) throw InvalidArgument("penalty schedule is empty");
    for (std::size_t k = 0; k < eps.size(); ++k) {
        if (!(eps[k] > 0.0) || !std::isfinite(eps[k])) {
            throw InvalidArgument(fmt::format("penalty schedule: eps[{}] = {} is not positive", k, eps[k]));
        }
        if (k > 0 && !(eps[k] < eps[k - 1])) throw InvalidArgument("penalty schedule must be strictly decreasing");
    }
}

SolverConfig SolverConfig::from(const SolverSettings& settings) {
    SolverConfig c;
    c.dt = settings.dt;
    c.t_end = settings.t_end;
    c.newton_rtol = settings.newton_rtol;
    c.newton_atol = settings.newton_atol;
    c.newton_max_iter = settings.newton_max_iter;
    c.max_halvings = settings.max_halvings;
    return c;
}

void SolverConfig::check() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument(fmt::format("dt must be positive (got {})", dt));
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        throw InvalidArgument(fmt::format("t_end must be positive (got {})", t_end));
    }
    if (!(newton_rtol >= 0.0) || !(newton_atol >= 0.0)) throw InvalidArgument("Newton tolerances must be nonnegative");
    if (newton_max_iter < 1) throw InvalidArgument("newton_max_iter must be at least 1");
    if (max_halvings < 0) throw InvalidArgument("max_halvings must be nonnegative");
}

double psi_energy(const ProblemSpec& spec, const Mesh& mesh, const StateField& u) {
    const auto& w = mesh.lumped_weights();
    std::vector<double> z(static_cast<std::size_t>(spec.m));
    double total = 0.0;
    for (std::size_t node = 0; node < mesh.num_nodes(); ++node) {
        for (int c = 0; c < spec.m; ++c) z[static_cast<std::size_t>(c)] = u(node, c);
        total += w[node] * legendre_psi(spec, z);
    }
    return total;
}

InitialState project_initial(const ProblemSpec& spec, const Mesh& mesh) {
    InitialState out;
    out.u = StateField(spec.m, mesh.num_nodes(), 0.0);
    for (std::size_t node = 0; node < mesh.num_nodes(); ++node) {
        const Point& x = mesh.node(node);
        for (int c = 0; c < spec.m; ++c) {
            try {
                out.u(node, c) = spec.u0[static_cast<std::size_t>(c)].evaluate(EvalPoint<double>{{}, x[0], x[1], 0.0});
            } catch (const EvalError& err) {
                throw EvalError(fmt::format("initial value u0{} at node {} (x = {:.6g}, y = {:.6g}): {}", c + 1, node,
                                            x[0], x[1], err.what()));
            }
        }
    }
    Assembler(spec, mesh).apply_dirichlet(out.u, 0.0);

    const auto& w = mesh.lumped_weights();
    std::vector<double> z(static_cast<std::size_t>(spec.m));
    for (std::size_t node = 0; node < mesh.num_nodes(); ++node) {
        for (int c = 0; c < spec.m; ++c) z[static_cast<std::size_t>(c)] = out.u(node, c);
        const double psi = legendre_psi(spec, z);
        if (!std::isfinite(psi)) throw EvalError(fmt::format("Psi(u0) is not finite at node {}", node));
        double dot = 0.0;
        for (int c = 0; c < spec.m; ++c) {
            dot += z[static_cast<std::size_t>(c)] * spec.B[static_cast<std::size_t>(c)].evaluate(EvalPoint<double>{z});
        }
        out.psi_integral += w[node] * psi;
        out.energy_pairing += w[node] * dot;
    }
    return out;
}

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

}  // namespace

StepResult newton_solve(const Assembler& assembler, const StateField& u_old, double t_new, double dt, double eps,
                        const SolverConfig& config, const StateField& guess, const std::vector<int>& pinned) {
    const auto& free = assembler.dofs().free_dofs();
    const auto n_free = static_cast<Eigen::Index>(free.size());
    std::vector<char> is_pinned(free.size(), 0);
    StateField u = guess;
    u.t = t_new;
    assembler.apply_dirichlet(u, t_new);
    for (int dof : pinned) {
        const int k = assembler.dofs().free_index(dof);
        if (k < 0) throw InvalidArgument(fmt::format("pinned dof {} is not a free dof", dof));
        is_pinned[static_cast<std::size_t>(k)] = 1;
        u.values[dof] = 0.0;
    }
    const auto mask = [&](Eigen::VectorXd& r) {
        for (Eigen::Index k = 0; k < n_free; ++k) {
            if (is_pinned[static_cast<std::size_t>(k)]) r[k] = 0.0;
        }
    };

    StepResult out;
    Eigen::VectorXd r;
    SparseMatrix jac;
    // The relative tolerance refers to the residual at u_old, so it does not
    // depend on the quality of the supplied first iterate.
    StateField reference = u_old;
    reference.t = t_new;
    assembler.apply_dirichlet(reference, t_new);
    for (int dof : pinned) reference.values[dof] = 0.0;
    Eigen::VectorXd r_ref;
    try {
        r_ref = assembler.residual(reference, u_old, dt, eps, t_new).residual;
    } catch (const EvalError& e) {
        throw StepFailure(fmt::format("coefficient evaluation failed at t = {:.6g}: {}", t_new, e.what()), u, {});
    }
    mask(r_ref);
    const double tol = std::max(config.newton_rtol * inf_norm(r_ref), config.newton_atol);
    for (int it = 0;; ++it) {
        try {
            assembler.residual_and_jacobian(u, u_old, dt, eps, t_new, r, jac);
        } catch (const EvalError& e) {
            throw StepFailure(fmt::format("coefficient evaluation failed at t = {:.6g} (Newton iteration {}): {}",
                                          t_new, it, e.what()),
                              u, out.residual_history);
        }
        mask(r);
        const double rn = inf_norm(r);
        if (!std::isfinite(rn)) {
            throw StepFailure(fmt::format("non-finite residual at t = {:.6g} (Newton iteration {})", t_new, it), u,
                              out.residual_history);
        }
        out.residual_history.push_back(rn);
        if (it == 0) out.stats.initial_residual = rn;
        out.stats.final_residual = rn;
        if (rn <= tol) break;
        if (it == config.newton_max_iter) {
            throw StepFailure(fmt::format("Newton did not converge in {} iterations at t = {:.6g} (|R| = {:.3e}, "
                                          "target {:.3e})",
                                          config.newton_max_iter, t_new, rn, tol),
                              u, out.residual_history);
        }

        if (!pinned.empty()) {
            jac.prune([&](Eigen::Index row, Eigen::Index col, double) {
                return !is_pinned[static_cast<std::size_t>(row)] && !is_pinned[static_cast<std::size_t>(col)];
            });
            for (Eigen::Index k = 0; k < n_free; ++k) {
                if (is_pinned[static_cast<std::size_t>(k)]) jac.coeffRef(k, k) = 1.0;
            }
            jac.makeCompressed();
        }
        Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(jac);
        if (lu.info() != Eigen::Success) {
            throw StepFailure(fmt::format("singular Jacobian at t = {:.6g}: {}", t_new, lu.lastErrorMessage()), u,
                              out.residual_history);
        }
        const Eigen::VectorXd delta = lu.solve(-r);
        if (lu.info() != Eigen::Success || !delta.allFinite()) {
            throw StepFailure(fmt::format("linear solve failed at t = {:.6g}", t_new), u, out.residual_history);
        }

        // Armijo backtracking on ||R||_2; if every halving fails the full step is taken.
        const double merit = r.norm();
        double lambda = 1.0;
        bool accepted = false;
        StateField trial = u;
        for (int h = 0; h <= config.max_halvings; ++h) {
            for (Eigen::Index k = 0; k < n_free; ++k) trial.values[free[static_cast<std::size_t>(k)]] = u.values[free[static_cast<std::size_t>(k)]] + lambda * delta[k];
            try {
                Eigen::VectorXd rt = assembler.residual(trial, u_old, dt, eps, t_new).residual;
                mask(rt);
                const double mt = rt.norm();
                if (std::isfinite(mt) && mt <= (1.0 - config.armijo_c * lambda) * merit) {
                    accepted = true;
                    break;
                }
            } catch (const EvalError&) {
            }
            if (h == config.max_halvings) break;
            lambda *= 0.5;
            ++out.stats.halvings;
        }
        if (!accepted) lambda = 1.0;
        for (Eigen::Index k = 0; k < n_free; ++k) u.values[free[static_cast<std::size_t>(k)]] += lambda * delta[k];
        out.stats.iterations = it + 1;

        // An update at roundoff level cannot reduce the residual further.
        const double scale = 1.0 + inf_norm(u.values);
        if (lambda * inf_norm(delta) <= 4.0 * DBL_EPSILON * scale) {
            assembler.residual_and_jacobian(u, u_old, dt, eps, t_new, r, jac);
            mask(r);
            out.stats.final_residual = inf_norm(r);
            out.residual_history.push_back(out.stats.final_residual);
            break;
        }
    }
    out.u = std::move(u);
    return out;
}

StepResult step(const StateField& u_old, double t, double dt, double eps, const ProblemSpec& spec, const Mesh& mesh,
                const SolverConfig& config) {
    const Assembler assembler(spec, mesh);
    return newton_solve(assembler, u_old, t + dt, dt, eps, config, u_old);
}

std::vector<double> time_grid(double dt, double t_end) {
    if (!(dt > 0.0) || !(t_end > 0.0)) throw InvalidArgument("time grid needs dt > 0 and t_end > 0");
    const auto n = std::max<long long>(1, static_cast<long long>(std::ceil(t_end / dt - 1e-9)));
    std::vector<double> grid(static_cast<std::size_t>(n) + 1);
    for (long long k = 0; k < n; ++k) grid[static_cast<std::size_t>(k)] = static_cast<double>(k) * dt;
    grid.back() = t_end;
    return grid;
}

Trajectory solve_transient(const ProblemSpec& spec, const Mesh& mesh, double eps, const SolverConfig& config,
                           const TransientOptions& options) {
    config.check();
    const Assembler assembler(spec, mesh);
    const auto grid = time_grid(config.dt, config.t_end);
    if (options.warm_start != nullptr && options.warm_start->size() != grid.size()) {
        throw InvalidArgument("warm-start trajectory does not match the time grid");
    }

    Trajectory traj;
    traj.states.push_back(project_initial(spec, mesh).u);
    traj.stats.emplace_back();
    traj.pairing.push_back(assembler.penalty_form(traj.states.back()).pairing);

    for (std::size_t n = 1; n < grid.size(); ++n) {
        const StateField& u_old = traj.states.back();
        const double t_prev = grid[n - 1];
        const double t_new = grid[n];
        const double h = t_new - t_prev;
        StateField guess = options.warm_start != nullptr ? options.warm_start->states[n] : u_old;
        if (options.perturb_guess) options.perturb_guess(guess, u_old, n);

        StepResult res;
        try {
            res = newton_solve(assembler, u_old, t_new, h, eps, config, guess);
        } catch (const SolverError& first) {
            if (h / 2.0 < config.dt / 100.0) {
                throw TransientFailure(fmt::format("step to t = {:.6g} failed: {}", t_new, first.what()), traj);
            }
            try {
                StepResult a = newton_solve(assembler, u_old, t_prev + h / 2.0, h / 2.0, eps, config, u_old);
                StepResult b = newton_solve(assembler, a.u, t_new, h / 2.0, eps, config, a.u);
                res.u = std::move(b.u);
                res.stats = b.stats;
                res.stats.iterations += a.stats.iterations;
                res.stats.halvings += a.stats.halvings;
                res.stats.initial_residual = a.stats.initial_residual;
                res.stats.dt_retries = 1;
            } catch (const SolverError& second) {
                throw TransientFailure(fmt::format("step to t = {:.6g} failed ({}); retry with dt/2 failed: {}",
                                                   t_new, first.what(), second.what()),
                                       traj);
            }
        }
        res.u.t = t_new;
        traj.pairing.push_back(assembler.penalty_form(res.u).pairing);
        traj.stats.push_back(res.stats);
        traj.states.push_back(std::move(res.u));
    }
    return traj;
}

double l2qt_distance(const Mesh& mesh, const Trajectory& a, const Trajectory& b) {
    if (a.size() != b.size()) throw InvalidArgument("trajectories have different numbers of time levels");
    double total = 0.0;
    for (std::size_t n = 1; n < a.size(); ++n) {
        if (std::abs(a.time(n) - b.time(n)) > 1e-12 * (1.0 + std::abs(a.time(n)))) {
            throw InvalidArgument("trajectories are on different time grids");
        }
        StateField diff = a.states[n];
        diff.values -= b.states[n].values;
        const double e = l2_norm(mesh, diff);
        total += (a.time(n) - a.time(n - 1)) * e * e;
    }
    return std::sqrt(total);
}

double l2qt_norm(const Mesh& mesh, const Trajectory& a) {
    double total = 0.0;
    for (std::size_t n = 1; n < a.size(); ++n) {
        const double e = l2_norm(mesh, a.states[n]);
        total += (a.time(n) - a.time(n - 1)) * e * e;
    }
    return std::sqrt(total);
}

std::vector<SweepStage> sweep_eps(const ProblemSpec& spec, const Mesh& mesh, const PenaltySchedule& schedule,
                                  const SolverConfig& config) {
    schedule.check();
    std::vector<SweepStage> stages;
    stages.reserve(schedule.eps.size());
    std::optional<std::size_t> last_ok;  // index of the last successful stage
    for (double eps : schedule.eps) {
        SweepStage stage;
        stage.eps = eps;
        // after a failed stage the next one starts cold
        const bool warm = schedule.warm_start && last_ok && *last_ok + 1 == stages.size();
        try {
            TransientOptions opts;
            if (warm) opts.warm_start = &stages[*last_ok].trajectory;
            stage.trajectory = solve_transient(spec, mesh, eps, config, opts);
            stage.warm_started = warm;
        } catch (const SolverError& err) {
            stage.error = err.what();
            if (warm) {
                try {
                    stage.trajectory = solve_transient(spec, mesh, eps, config);
                    stage.error.clear();
                } catch (const SolverError& cold) {
                    stage.error = fmt::format("{}; cold restart: {}", stage.error, cold.what());
                }
            }
            stage.failed = !stage.error.empty();
        }
        if (!stage.failed) {
            stage.penalty_residual = penalty_residual(stage.trajectory);
            if (last_ok) stage.distance_to_previous = l2qt_distance(mesh, stage.trajectory, stages[*last_ok].trajectory);
            last_ok = stages.size();
        }
        stages.push_back(std::move(stage));
    }
    return stages;
}

UniquenessResult uniqueness_probe(const ProblemSpec& spec, const Mesh& mesh, double eps, const SolverConfig& config,
                                  int n_guesses, std::uint64_t seed) {
    if (n_guesses < 1) throw InvalidArgument("uniqueness probe needs at least one run");
    const DofMap dofs(mesh, spec.m);
    UniquenessResult out;
    for (int r = 0; r < n_guesses; ++r) {
        Rng rng = Rng::split(seed, static_cast<std::uint64_t>(r));
        TransientOptions opts;
        opts.perturb_guess = [&](StateField& guess, const StateField& u_old, std::size_t) {
            const double amp = 0.1 * u_old.values.lpNorm<Eigen::Infinity>() + 0.01;
            for (int dof : dofs.free_dofs()) guess.values[dof] += amp * rng.uniform(-1.0, 1.0);
        };
        out.runs.push_back(solve_transient(spec, mesh, eps, config, opts));
    }
    for (std::size_t a = 0; a < out.runs.size(); ++a) {
        for (std::size_t b = a + 1; b < out.runs.size(); ++b) {
            out.max_distance = std::max(out.max_distance, l2qt_distance(mesh, out.runs[a], out.runs[b]));
        }
    }
    return out;
}

}  // namespace dnpvi
