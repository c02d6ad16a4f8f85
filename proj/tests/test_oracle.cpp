#include "dnpvi/diagnostics.hpp"
#include "dnpvi/error.hpp"
#include "dnpvi/oracle.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace dnpvi;
using test::make_spec;

namespace {

SolverConfig config_of(const ProblemSpec& s) { return SolverConfig::from(s.solver); }

ProblemSpec inactive_problem() {
    return make_spec(1, "B1 = u1\nK11 = 1\nF1 = -1", "nu = 1\np = 1\nalpha = 1\n", 1,
                     "gamma1 = left\ngamma3 = right\nconstrained = 1",
                     "[initial]\nu01 = -x\n[domain]\nn = 16\n[solver]\ndt = 0.02\nt_end = 0.2\n");
}

}  // namespace

TEST(ActiveSet, HandKkt) {
    // one free dof at x = 1 with energy k/2 (u - a)^2, k = w/dt + 1/h, a = (c/2)/k
    const double c = 3.0, dt = 0.1;
    const ProblemSpec s = make_spec(1, "B1 = u1\nK11 = 1\nF1 = 3", "nu = 1\np = 1\nalpha = 1\n", 1,
                                    "gamma1 = left\ngamma3 = right\nconstrained = 1", "[domain]\nn = 1\n");
    const Mesh mesh = make_mesh(s);
    const StateField zero(1, 2);
    const ActiveSetResult r = active_set_step(zero, 0.0, dt, s, mesh, config_of(s));
    const double k = 0.5 / dt + 1.0, a = 0.5 * c / k;
    ASSERT_GT(a, 0.0);
    EXPECT_EQ(r.u(1, 0), 0.0);
    ASSERT_EQ(r.multiplier.size(), 1);
    EXPECT_NEAR(r.multiplier[0], k * a, 1e-13);
    EXPECT_EQ(r.set.num_active(), 1u);
    EXPECT_EQ(r.set.active_dofs(), std::vector<int>{1});
    EXPECT_EQ(r.iterations, 2);
}

TEST(ActiveSet, InactiveEqualsUnpenalizedStep) {
    const ProblemSpec s = inactive_problem();
    const Mesh mesh = make_mesh(s);
    const StateField u0 = project_initial(s, mesh).u;
    const ActiveSetResult r = active_set_step(u0, 0.0, 0.02, s, mesh, config_of(s));
    const StepResult plain = step(u0, 0.0, 0.02, kNoPenalty, s, mesh, config_of(s));
    EXPECT_EQ(r.set.num_active(), 0u);
    EXPECT_EQ(r.u.values, plain.u.values);
    EXPECT_EQ(r.multiplier.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ActiveSet, StrictlyFeasibleTransientMatchesNaturalBoundary) {
    const ProblemSpec s = inactive_problem();
    const Mesh mesh = make_mesh(s);
    const OracleTrajectory o = active_set_transient(s, mesh, config_of(s));
    const Trajectory plain = solve_transient(s, mesh, kNoPenalty, config_of(s));
    EXPECT_LE(l2qt_distance(mesh, o.trajectory, plain), 1e-12);
    for (const auto& set : o.sets) EXPECT_EQ(set.num_active(), 0u);
}

TEST(ActiveSet, ObstacleStepActivatesEndpoint) {
    const ProblemSpec s = test::load("obstacle1d");
    const Mesh mesh = make_mesh(s);
    const StateField u0 = project_initial(s, mesh).u;
    const ActiveSetResult r = active_set_step(u0, 0.0, 0.01, s, mesh, config_of(s));
    ASSERT_EQ(r.set.num_active(), 1u);
    EXPECT_EQ(r.u(mesh.num_nodes() - 1, 0), 0.0);
    EXPECT_GT(r.multiplier[0], 0.0);
    // seeding with the settled set needs a single pass
    const ActiveSetResult again = active_set_step(u0, 0.0, 0.01, s, mesh, config_of(s), &r.set);
    EXPECT_EQ(again.iterations, 1);
    EXPECT_LT((again.u.values - r.u.values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ActiveSet, ExactComplementarity) {
    for (const char* name : {"obstacle1d", "twocomp2d"}) {
        const ProblemSpec s = test::load(name);
        const Mesh mesh = make_mesh(s);
        const OracleTrajectory o = active_set_transient(s, mesh, config_of(s));
        ASSERT_EQ(o.sets.size() + 1, o.trajectory.size());
        for (std::size_t n = 0; n < o.sets.size(); ++n) {
            const Complementarity c =
                complementarity_report(o.trajectory.states[n + 1], s, mesh, Eigen::VectorXd(-o.multipliers[n]));
            EXPECT_LE(c.max_u, 1e-12) << name << " " << n;
            EXPECT_LE(c.max_flux, 1e-12) << name << " " << n;
            EXPECT_LE(c.max_product, 1e-12) << name << " " << n;
            if (o.multipliers[n].size() > 0) EXPECT_GE(o.multipliers[n].minCoeff(), -1e-12);
        }
    }
}

TEST(ActiveSet, SizeLimit) {
    const ProblemSpec s = make_spec(1, "B1 = u1\nK11 = 1", "nu = 1\np = 1\nalpha = 1\n", 2,
                                    "gamma1 = left\ngamma2 = bottom, top\ngamma3 = right\nconstrained = 1",
                                    "[domain]\nnx = 32\nny = 32\n");
    const Mesh mesh = make_mesh(s);
    const StateField u0(1, mesh.num_nodes());
    EXPECT_THROW((void)active_set_step(u0, 0.0, 0.01, s, mesh, config_of(s)), InvalidArgument);
}

TEST(OracleCompare, ObstacleDistancesDecrease) {
    const ProblemSpec s = test::load("obstacle1d");
    const Mesh mesh = make_mesh(s);
    const OracleComparison cmp = oracle_compare(s, mesh, PenaltySchedule::from(s.solver), config_of(s));
    ASSERT_EQ(cmp.rows.size(), 5u);
    for (std::size_t k = 0; k < cmp.rows.size(); ++k) {
        EXPECT_FALSE(cmp.rows[k].failed);
        if (k > 0) EXPECT_LT(cmp.rows[k].distance, cmp.rows[k - 1].distance);
    }
    EXPECT_EQ(cmp.rows.back().eps, 1e-6);
    EXPECT_LE(cmp.rows.back().distance, 1e-3);
    // regression pin for the 32-element run
    EXPECT_NEAR(cmp.rows.back().distance, 3.604e-7, 0.01 * 3.604e-7);
    EXPECT_NEAR(cmp.rows.front().distance, 3.513e-3, 0.01 * 3.513e-3);
}

TEST(OracleCompare, InactiveProblemAgreesForEveryEps) {
    const ProblemSpec s = inactive_problem();
    const Mesh mesh = make_mesh(s);
    const OracleComparison cmp = oracle_compare(s, mesh, PenaltySchedule::geometric(1e-2, 5), config_of(s));
    for (const auto& row : cmp.rows) EXPECT_LE(row.distance, 1e-9);
}
