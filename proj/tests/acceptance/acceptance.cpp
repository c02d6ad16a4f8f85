// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include "dnpvi/cli.hpp"
#include "dnpvi/diagnostics.hpp"
#include "dnpvi/fem.hpp"
#include "dnpvi/oracle.hpp"
#include "dnpvi/random.hpp"
#include "dnpvi/solver.hpp"
#include "dnpvi/validate.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace dnpvi;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* title;
    double time_limit;  // seconds, 0 = none
    std::function<Outcome()> body;
};

std::string problem_path(const std::string& name) { return std::string(DNPVI_PROBLEM_DIR) + "/" + name + ".prb"; }

struct Obstacle {
    ProblemSpec spec = load_problem(problem_path("obstacle1d"));
    Mesh mesh = make_mesh(spec);
    SolverConfig config = SolverConfig::from(spec.solver);
};

Outcome penalty_scaling() {
    const Obstacle ob;
    const auto stages = sweep_eps(ob.spec, ob.mesh, PenaltySchedule::geometric(1e-2, 5), ob.config);
    double lo = INFINITY, hi = 0.0;
    std::string ratios;
    for (const auto& st : stages) {
        if (st.failed) return {false, fmt::format("stage eps = {} failed: {}", st.eps, st.error)};
        const double r = st.penalty_residual / st.eps;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
        ratios += fmt::format("{}{:.3g}", ratios.empty() ? "" : ", ", r);
    }
    const double spread = hi / lo;
    return {spread <= 10.0, fmt::format("residual/eps = [{}], max/min = {:.3g} (limit 10)", ratios, spread)};
}

Outcome oracle_convergence() {
    const Obstacle ob;
    const OracleComparison cmp = oracle_compare(ob.spec, ob.mesh, PenaltySchedule::geometric(1e-2, 5), ob.config);
    bool decreasing = true;
    std::string dists;
    for (std::size_t k = 0; k < cmp.rows.size(); ++k) {
        if (cmp.rows[k].failed) return {false, fmt::format("stage eps = {} failed", cmp.rows[k].eps)};
        if (k > 0 && !(cmp.rows[k].distance < cmp.rows[k - 1].distance)) decreasing = false;
        dists += fmt::format("{}{:.4g}", dists.empty() ? "" : ", ", cmp.rows[k].distance);
    }
    const double last = cmp.rows.back().distance;
    return {decreasing && last <= 1e-3 && cmp.rows.back().eps == 1e-6,
            fmt::format("L2(Q_T) distances [{}], strictly decreasing: {}, at eps = 1e-6: {:.4g} (limit 1e-3)", dists,
                        decreasing ? "yes" : "no", last)};
}

Outcome complementarity() {
    const Obstacle ob;
    const Trajectory traj = solve_transient(ob.spec, ob.mesh, 1e-6, ob.config);
    const Complementarity pc = complementarity_report(traj, ob.spec, ob.mesh);
    const OracleTrajectory o = active_set_transient(ob.spec, ob.mesh, ob.config);
    Complementarity worst;
    worst.max_u = -INFINITY;
    double min_lambda = INFINITY;
    for (std::size_t n = 0; n < o.multipliers.size(); ++n) {
        const Complementarity c = complementarity_report(o.trajectory.states[n + 1], ob.spec, ob.mesh,
                                                         Eigen::VectorXd(-o.multipliers[n]));
        worst.max_u = std::max(worst.max_u, c.max_u);
        worst.max_flux = std::max(worst.max_flux, c.max_flux);
        worst.max_product = std::max(worst.max_product, c.max_product);
        if (o.multipliers[n].size() > 0) min_lambda = std::min(min_lambda, o.multipliers[n].minCoeff());
    }
    const bool penalty_ok = pc.max_u <= 1e-4 && pc.max_product <= 1e-4;
    const bool oracle_ok = worst.max_u <= 1e-12 && worst.max_flux <= 1e-12 && worst.max_product <= 1e-12;
    return {penalty_ok && oracle_ok,
            fmt::format("penalty eps = 1e-6: max u = {:.3g}, max |u flux| = {:.3g} (limit 1e-4); oracle over all "
                        "levels: max u = {:.3g}, max flux = {:.3g}, max |u lambda| = {:.3g}, min lambda = {:.4g} "
                        "(limit 1e-12)",
                        pc.max_u, pc.max_product, worst.max_u, worst.max_flux, worst.max_product, min_lambda)};
}

Outcome energy_dissipation() {
    const ProblemSpec heat = load_problem(problem_path("heat"));
    const ProblemSpec cubic = parse_problem(
        "[problem]\nname = cubic\nm = 1\ndim = 1\nnu = 3\np = 1\nalpha = 1\n"
        "[coefficients]\nB1 = u1 + u1^3\nK11 = 1\n[initial]\nu01 = sin(pi*x)\n"
        "[boundary]\ngamma1 = left, right\n[domain]\nn = 64\n[solver]\ndt = 0.001\nt_end = 0.1\n");
    std::string detail;
    bool ok = true;
    for (const ProblemSpec* s : {&heat, &cubic}) {
        const Mesh mesh = make_mesh(*s);
        const Trajectory traj = solve_transient(*s, mesh, 1e-6, SolverConfig::from(s->solver));
        const double e0 = psi_energy(*s, mesh, traj.states[0]);
        double worst = -INFINITY, prev = e0;
        for (std::size_t n = 1; n < traj.size(); ++n) {
            const double e = psi_energy(*s, mesh, traj.states[n]);
            worst = std::max(worst, e - prev);
            prev = e;
        }
        const double slack = 1e-10 * (1 + e0);
        ok = ok && worst <= slack;
        detail += fmt::format("{}{}: {} steps, max increase {:.3g} (slack {:.3g})", detail.empty() ? "" : "; ", s->name,
                              traj.size() - 1, worst, slack);
    }
    return {ok, detail};
}

Outcome mms_orders() {
    const ConvergenceTable sp = spatial_study("heat", {8, 16, 32, 64}, 0.1);
    const ConvergenceTable tm = temporal_study("heat", 128, {0.1, 0.05, 0.025}, 0.5);
    const double so = sp.order_final.value_or(0.0), to = tm.order_final.value_or(0.0);
    return {so >= 1.8 && to >= 0.9,
            fmt::format("spatial order {:.3f} (L2(Q_T) {:.3f}, limit 1.8); temporal order {:.3f} (L2(Q_T) {:.3f}, limit "
                        "0.9)",
                        so, sp.order_qt.value_or(0.0), to, tm.order_qt.value_or(0.0))};
}

Outcome validator() {
    std::string detail;
    bool ok = true;
    // Psi of the identity is |z|^2/2
    const ProblemSpec lin = parse_problem("[problem]\nm = 2\ndim = 1\n[coefficients]\nB1 = u1\nB2 = u2\nK11 = 1\nK22 = 1\n"
                                          "[boundary]\ngamma1 = left, right\n");
    Rng rng(42);
    double psi_err = 0.0;
    for (int k = 0; k < 100; ++k) {
        const std::array<double, 2> z{rng.uniform(-10, 10), rng.uniform(-10, 10)};
        psi_err = std::max(psi_err, std::abs(legendre_psi(lin, z) - 0.5 * (z[0] * z[0] + z[1] * z[1])));
    }
    ok = ok && psi_err <= 1e-12;
    detail += fmt::format("max |Psi - |z|^2/2| = {:.3g}", psi_err);

    for (const char* name : {"obstacle1d", "heat", "twocomp2d"}) {
        const ProblemSpec s = load_problem(problem_path(name));
        const ValidationReport r = validate(s, make_mesh(s));
        const bool a1 = r.find("A1") != nullptr && r.find("A1")->verdict != Verdict::Fail;
        ok = ok && a1 && r.passed();
        detail += fmt::format("; {} {}", name, r.passed() ? "accepted" : "rejected");
    }

    const auto entry = [](const char* name, const char* cond) {
        const ProblemSpec s = load_problem(problem_path(name));
        const ValidationReport r = validate(s, make_mesh(s));
        const CheckEntry* e = r.find(cond);
        return std::make_pair(s, e != nullptr ? *e : CheckEntry{});
    };
    {
        const auto [s, e] = entry("bad_nonmonotone", "A1");
        bool witnessed = false;
        for (const Witness& w : e.witnesses) {
            if (w.z1.size() != 1 || w.z2.size() != 1) continue;
            const double b1 = s.B[0].evaluate(EvalPoint<double>{w.z1}), b2 = s.B[0].evaluate(EvalPoint<double>{w.z2});
            witnessed = witnessed || (b1 - b2) * (w.z1[0] - w.z2[0]) <= 0.0;
        }
        ok = ok && e.verdict == Verdict::Fail && witnessed;
        detail += fmt::format("; B = -u1: A1 {}", witnessed ? "rejected, witness verified" : "not rejected");
    }
    {
        const auto [s, e] = entry("bad_nonelliptic", "A2");
        bool witnessed = false;
        for (const Witness& w : e.witnesses) {
            if (w.z2.size() != 2) continue;
            double form = 0.0;
            for (int j = 0; j < 2; ++j) {
                for (int i = 0; i < 2; ++i) form += s.K_at(j, i).evaluate(EvalPoint<double>{w.z1}) * w.z2[i] * w.z2[j];
            }
            witnessed = witnessed || form < 0.0;
        }
        ok = ok && e.verdict == Verdict::Fail && witnessed;
        detail += fmt::format("; K = [[1,3],[0,1]]: A2 {}", witnessed ? "rejected, witness verified" : "not rejected");
    }
    {
        const auto [s, e] = entry("bad_exponents", "A4");
        const bool witnessed = !e.witnesses.empty() && e.witnesses.front().z1.size() >= 2 &&
                               e.witnesses.front().z1[1] > e.witnesses.front().z1[0];
        ok = ok && e.verdict == Verdict::Fail && witnessed && s.p > s.nu;
        detail += fmt::format("; nu = 1, p = 2: A4 {}", witnessed ? "rejected (p > nu)" : "not rejected");
    }
    return {ok, detail};
}

Outcome uniqueness() {
    const Obstacle ob;
    const UniquenessResult u = uniqueness_probe(ob.spec, ob.mesh, 1e-6, ob.config, 5, ob.spec.sampling.seed);
    return {u.max_distance <= 1e-8, fmt::format("5 runs, max pairwise L2(Q_T) distance {:.3g} (limit 1e-8)", u.max_distance)};
}

Outcome vi_residual_check() {
    const Obstacle ob;
    const Trajectory traj = solve_transient(ob.spec, ob.mesh, 1e-6, ob.config);
    const auto bank = make_feasible_bank(traj, ob.spec, ob.mesh, 50, 0.1, ob.spec.sampling.seed);
    const double clean = vi_residual(traj, ob.spec, ob.mesh, bank);
    Trajectory corrupted = traj;
    const int dof = Assembler(ob.spec, ob.mesh).constrained_dofs().front();
    for (std::size_t n = 1; n < corrupted.size(); ++n) corrupted.states[n].values[dof] += 1.0;
    const double bad = vi_residual(corrupted, ob.spec, ob.mesh, bank);
    return {clean >= -1e-6 && bad < 0.0,
            fmt::format("converged: min over 50 = {:.4g} (limit -1e-6); corrupted: {:.4g} (must be < 0)", clean, bad)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "dnpvi_acceptance_determinism";
    fs::remove_all(root);
    std::ostringstream sink;
    const auto run = [&](std::vector<std::string> args) { return cli::run(args, sink, sink); };
    std::string detail;
    bool ok = true;
    for (const char* cmd : {"solve", "sweep"}) {
        const fs::path first = root / (std::string(cmd) + "_first");
        if (run({"--quiet", "--out", first.string(), cmd, problem_path("obstacle1d")}) != 0) {
            return {false, fmt::format("{} failed", cmd)};
        }
        const std::string manifest = (first / "manifest.json").string();
        std::vector<std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(first)) {
            if (e.path().extension() == ".csv") files.push_back(fs::relative(e.path(), first).string());
        }
        std::sort(files.begin(), files.end());
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path again = root / fmt::format("{}_rerun{}", cmd, rep);
            if (run({"--quiet", "--out", again.string(), cmd, "--manifest", manifest}) != 0) {
                return {false, fmt::format("{} re-run failed", cmd)};
            }
            for (const auto& f : files) ok = ok && slurp(first / f) == slurp(again / f);
        }
        detail += fmt::format("{}{}: {} CSV files x 2 re-runs", detail.empty() ? "" : "; ", cmd, files.size());
    }
    fs::remove_all(root);
    return {ok, detail + (ok ? ", byte-identical" : ", MISMATCH")};
}

Outcome jacobian_consistency() {
    std::string detail;
    bool ok = true;
    for (const char* name : {"obstacle1d", "heat", "twocomp2d"}) {
        const ProblemSpec s = load_problem(problem_path(name));
        const Mesh mesh = make_mesh(s);
        const Assembler a(s, mesh);
        const auto& free = a.dofs().free_dofs();
        const auto nf = static_cast<Eigen::Index>(free.size());
        Rng rng(42);
        const double dt = s.solver.dt, eps = 1e-2;
        double worst = 0.0;
        for (int k = 0; k < 20; ++k) {
            StateField u(s.m, mesh.num_nodes(), dt), uo(s.m, mesh.num_nodes(), 0.0);
            for (Eigen::Index i = 0; i < u.values.size(); ++i) u.values[i] = rng.uniform(-1, 1);
            for (Eigen::Index i = 0; i < uo.values.size(); ++i) uo.values[i] = rng.uniform(-1, 1);
            a.apply_dirichlet(u, dt);
            a.apply_dirichlet(uo, 0.0);
            const Eigen::MatrixXd J = Eigen::MatrixXd(a.jacobian(u, uo, dt, eps, dt));
            Eigen::MatrixXd F(nf, nf);
            for (Eigen::Index c = 0; c < nf; ++c) {
                StateField up = u, um = u;
                const int dof = free[static_cast<std::size_t>(c)];
                const double h = 1e-7 * (1 + std::abs(u.values[dof]));
                up.values[dof] += h;
                um.values[dof] -= h;
                F.col(c) = (a.residual(up, uo, dt, eps, dt).residual - a.residual(um, uo, dt, eps, dt).residual) / (2 * h);
            }
            worst = std::max(worst, (J - F).cwiseAbs().maxCoeff() / J.cwiseAbs().maxCoeff());
        }
        ok = ok && worst <= 1e-5;
        detail += fmt::format("{}{}: {:.3g}", detail.empty() ? "max relative error " : ", ", name, worst);
    }
    return {ok, detail + " (limit 1e-5, 20 states each)"};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "penalty residual scaling", 30, penalty_scaling},
        {2, "penalty to active-set convergence", 60, oracle_convergence},
        {3, "complementarity", 0, complementarity},
        {4, "discrete energy dissipation", 10, energy_dissipation},
        {5, "manufactured-solution orders", 60, mms_orders},
        {6, "Legendre transform and validator", 5, validator},
        {7, "uniqueness probe", 60, uniqueness},
        {8, "variational inequality residual", 30, vi_residual_check},
        {9, "determinism", 0, determinism},
        {10, "Jacobian consistency", 0, jacobian_consistency},
    };
    int failed = 0;
    for (const Criterion& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = fmt::format("{:.2f} s", secs);
        if (c.time_limit > 0) {
            timing += fmt::format(" of {:.0f} s", c.time_limit);
            if (secs > c.time_limit) o.pass = false;
        }
        if (!o.pass) ++failed;
        std::cout << fmt::format("criterion {:>2} {:<36} {}  {} [{}]\n", c.id, c.title, o.pass ? "PASS" : "FAIL",
                                 o.detail, timing)
                  << std::flush;
    }
    std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed),
                             criteria.size());
    return failed == 0 ? 0 : 1;
}
