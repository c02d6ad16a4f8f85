#include "dnpvi/diagnostics.hpp"

#include "dnpvi/error.hpp"
#include "dnpvi/quadrature.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numbers>

namespace dnpvi {

std::vector<EnergyRow> energy_trajectory(const Trajectory& traj, const ProblemSpec& spec, const Mesh& mesh) {
    std::vector<EnergyRow> rows;
    rows.reserve(traj.size());
    double prev_h1 = 0.0;
    for (std::size_t n = 0; n < traj.size(); ++n) {
        const StateField& u = traj.states[n];
        const double l2 = l2_norm(mesh, u);
        const double h1 = l2 * l2 + h1_seminorm_squared(mesh, u);
        EnergyRow row;
        row.t = traj.time(n);
        row.psi_energy = psi_energy(spec, mesh, u);
        row.h1_accum = n == 0 ? 0.0 : rows.back().h1_accum + 0.5 * (traj.time(n) - traj.time(n - 1)) * (prev_h1 + h1);
        prev_h1 = h1;
        rows.push_back(row);
    }
    return rows;
}

double penalty_residual(const Trajectory& traj) {
    double total = 0.0;
    for (std::size_t n = 1; n < traj.size(); ++n) {
        total += 0.5 * (traj.time(n) - traj.time(n - 1)) * (std::abs(traj.pairing[n - 1]) + std::abs(traj.pairing[n]));
    }
    return total;
}

Complementarity complementarity_report(const StateField& u, const ProblemSpec& spec, const Mesh& mesh,
                                       const Eigen::VectorXd& flux) {
    const Assembler assembler(spec, mesh);
    const auto& dofs = assembler.constrained_dofs();
    if (static_cast<std::size_t>(flux.size()) != dofs.size()) {
        throw InvalidArgument("complementarity_report: flux is not aligned with the constrained dofs");
    }
    Complementarity out;
    if (dofs.empty()) return out;
    out.max_u = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < dofs.size(); ++k) {
        const double uk = u.values[dofs[k]];
        const double fk = flux[static_cast<Eigen::Index>(k)];
        out.max_u = std::max(out.max_u, uk);
        out.max_flux = std::max(out.max_flux, fk);
        out.max_product = std::max(out.max_product, std::abs(uk * fk));
    }
    return out;
}

Complementarity complementarity_report(const Trajectory& traj, const ProblemSpec& spec, const Mesh& mesh) {
    if (traj.size() < 2) throw InvalidArgument("complementarity_report needs at least one time step");
    const std::size_t n = traj.size() - 1;
    const Eigen::VectorXd flux =
        recover_flux(traj.states[n], traj.states[n - 1], traj.time(n) - traj.time(n - 1), spec, mesh, traj.time(n));
    return complementarity_report(traj.states[n], spec, mesh, flux);
}

namespace {

std::optional<double> ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::nullopt;
        sx += std::log(x[i]);
        sy += std::log(y[i]);
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y[i]) - my);
    }
    if (sxx <= 0.0) return std::nullopt;
    return sxy / sxx;
}

double param_of(const ConvergenceLevel& l, ConvergenceParameter by) { return by == ConvergenceParameter::H ? l.h : l.dt; }

}  // namespace

ConvergenceTable convergence_table(std::vector<ConvergenceLevel> levels, ConvergenceParameter by) {
    ConvergenceTable table;
    table.parameter = by;
    std::sort(levels.begin(), levels.end(), [&](const ConvergenceLevel& a, const ConvergenceLevel& b) {
        return param_of(a, by) > param_of(b, by);
    });
    table.levels = std::move(levels);
    if (table.levels.empty()) return table;
    table.exact = std::all_of(table.levels.begin(), table.levels.end(), [](const ConvergenceLevel& l) {
        return l.error_final <= 1e-12 && l.error_qt <= 1e-12;
    });
    if (table.exact) return table;

    std::vector<double> params;
    for (const auto& l : table.levels) params.push_back(param_of(l, by));
    std::vector<double> distinct = params;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3) return table;
    std::vector<double> ef, eq;
    for (const auto& l : table.levels) {
        ef.push_back(l.error_final);
        eq.push_back(l.error_qt);
    }
    table.order_final = ls_slope(params, ef);
    table.order_qt = ls_slope(params, eq);
    return table;
}

ProblemSpec mms_problem(const std::string& family, int n) {
    std::string text;
    if (family == "heat") {
        text = fmt::format(
            "[problem]\nname = heat\nm = 1\ndim = 1\nnu = 1\np = 1\nalpha = 1\n"
            "[coefficients]\nB1 = u1\nK11 = 1\n"
            "[initial]\nu01 = sin(pi*x)\n"
            "[boundary]\ngamma1 = left, right\n"
            "[domain]\nmesh = interval\nn = {}\n",
            n);
    } else if (family == "affine") {
        text = fmt::format(
            "[problem]\nname = affine\nm = 1\ndim = 1\nnu = 1\np = 1\nalpha = 1\n"
            "[coefficients]\nB1 = u1\nK11 = 1\n"
            "[initial]\nu01 = 1 + x\n"
            "[boundary]\ngamma1 = left, right\ndirichlet1 = 1 + x\n"
            "[domain]\nmesh = interval\nn = {}\n",
            n);
    } else {
        throw InvalidArgument(fmt::format("unknown manufactured-solution family '{}' (expected heat or affine)", family));
    }
    return parse_problem(text);
}

double mms_exact(const std::string& family, double x, double t) {
    if (family == "heat") return std::exp(-std::numbers::pi * std::numbers::pi * t) * std::sin(std::numbers::pi * x);
    if (family == "affine") return 1.0 + x;
    throw InvalidArgument(fmt::format("unknown manufactured-solution family '{}'", family));
}

namespace {

double l2_error_1d(const std::string& family, const Mesh& mesh, const StateField& u, double t) {
    static const SimplexRule<2> rule = gauss_legendre(5);
    double total = 0.0;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& el = mesh.elements()[e];
        const double x0 = mesh.node(static_cast<std::size_t>(el[0]))[0];
        const double x1 = mesh.node(static_cast<std::size_t>(el[1]))[0];
        const double u0 = u(static_cast<std::size_t>(el[0]), 0);
        const double u1 = u(static_cast<std::size_t>(el[1]), 0);
        for (std::size_t q = 0; q < rule.weights.size(); ++q) {
            const double l0 = rule.points[q][0];
            const double l1 = rule.points[q][1];
            const double diff = l0 * u0 + l1 * u1 - mms_exact(family, l0 * x0 + l1 * x1, t);
            total += rule.weights[q] * mesh.element_volume(e) * diff * diff;
        }
    }
    return std::sqrt(total);
}

}  // namespace

ConvergenceLevel run_mms(const std::string& family, int n, double dt, double t_end) {
    ProblemSpec spec = mms_problem(family, n);
    spec.solver.dt = dt;
    spec.solver.t_end = t_end;
    const Mesh mesh = make_mesh(spec);
    const Trajectory traj = solve_transient(spec, mesh, spec.solver.eps, SolverConfig::from(spec.solver));
    ConvergenceLevel level;
    level.h = 1.0 / n;
    level.dt = dt;
    double qt = 0.0;
    for (std::size_t k = 1; k < traj.size(); ++k) {
        const double e = l2_error_1d(family, mesh, traj.states[k], traj.time(k));
        qt += (traj.time(k) - traj.time(k - 1)) * e * e;
        if (k + 1 == traj.size()) level.error_final = e;
    }
    level.error_qt = std::sqrt(qt);
    return level;
}

ConvergenceTable spatial_study(const std::string& family, const std::vector<int>& ns, double t_end) {
    std::vector<ConvergenceLevel> levels;
    for (int n : ns) {
        const double h = 1.0 / n;
        levels.push_back(run_mms(family, n, h * h, t_end));
    }
    return convergence_table(std::move(levels), ConvergenceParameter::H);
}

ConvergenceTable temporal_study(const std::string& family, int n, const std::vector<double>& dts, double t_end) {
    std::vector<ConvergenceLevel> levels;
    for (double dt : dts) levels.push_back(run_mms(family, n, dt, t_end));
    return convergence_table(std::move(levels), ConvergenceParameter::Dt);
}

GronwallFit gronwall_fit(const std::vector<EnergyRow>& energy) {
    GronwallFit fit;
    if (energy.empty()) return fit;
    double emax = 0.0;
    for (const auto& r : energy) emax = std::max(emax, r.psi_energy);
    fit.a = energy.front().psi_energy > 0.0 ? energy.front().psi_energy : std::max(emax, DBL_MIN);
    const auto bound = [&](double c, double t) { return fit.a * (1.0 + c * t * std::exp(c * t)); };
    for (const auto& r : energy) {
        if (r.t <= 0.0 || r.psi_energy <= fit.a) continue;
        const double target = r.psi_energy / fit.a - 1.0;
        double lo = 0.0, hi = 1.0;
        while (hi * r.t * std::exp(hi * r.t) < target && hi < 1e300) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (mid * r.t * std::exp(mid * r.t) < target ? lo : hi) = mid;
        }
        fit.c = std::max(fit.c, hi);
    }
    fit.min_slack = std::numeric_limits<double>::infinity();
    for (const auto& r : energy) fit.min_slack = std::min(fit.min_slack, bound(fit.c, r.t) - r.psi_energy);
    fit.holds = fit.min_slack >= -1e-12 * (1.0 + fit.a);
    return fit;
}

DiagnosticsReport make_report(const Trajectory& traj, const ProblemSpec& spec, const Mesh& mesh, double eps) {
    DiagnosticsReport report;
    report.eps = eps;
    report.energy = energy_trajectory(traj, spec, mesh);
    report.penalty_residual = penalty_residual(traj);
    if (traj.size() >= 2) report.complementarity = complementarity_report(traj, spec, mesh);
    report.gronwall = gronwall_fit(report.energy);
    const Assembler assembler(spec, mesh);
    for (const auto& u : traj.states) {
        double mu = assembler.constrained_dofs().empty() ? 0.0 : -std::numeric_limits<double>::infinity();
        for (int dof : assembler.constrained_dofs()) mu = std::max(mu, u.values[dof]);
        report.max_u_constrained.push_back(mu);
    }
    return report;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const Mesh& mesh) {
    if (traj.size() == 0) return;
    const int m = traj.states.front().m;
    os << "t,node,x,y";
    for (int c = 0; c < m; ++c) os << ",u" << c + 1;
    os << '\n';
    for (const auto& u : traj.states) {
        for (std::size_t node = 0; node < mesh.num_nodes(); ++node) {
            const Point& x = mesh.node(node);
            fmt::print(os, "{},{},{},{}", u.t, node, x[0], x[1]);
            for (int c = 0; c < m; ++c) fmt::print(os, ",{}", u(node, c));
            os << '\n';
        }
    }
}

void write_diagnostics_csv(std::ostream& os, const Trajectory& traj, const DiagnosticsReport& report) {
    os << "t,psi_energy,h1_accum,beta_pairing,max_u_gamma3,newton_iterations,newton_residual,halvings,dt_retries\n";
    for (std::size_t n = 0; n < traj.size(); ++n) {
        const NewtonStats& s = traj.stats[n];
        fmt::print(os, "{},{},{},{},{},{},{},{},{}\n", traj.time(n), report.energy[n].psi_energy,
                   report.energy[n].h1_accum, traj.pairing[n], report.max_u_constrained[n], s.iterations,
                   s.final_residual, s.halvings, s.dt_retries);
    }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepStage>& stages) {
    os << "eps,penalty_residual,residual_over_eps,distance_to_previous,newton_iterations,status\n";
    for (const auto& s : stages) {
        int iters = 0;
        for (const auto& st : s.trajectory.stats) iters += st.iterations;
        const std::string dist = s.distance_to_previous ? fmt::format("{}", *s.distance_to_previous) : "";
        if (s.failed) {
            fmt::print(os, "{},,,,,failed\n", s.eps);
        } else {
            fmt::print(os, "{},{},{},{},{},ok\n", s.eps, s.penalty_residual, s.penalty_residual / s.eps, dist, iters);
        }
    }
}

void write_convergence_csv(std::ostream& os, const ConvergenceTable& table) {
    os << "kind,h,dt,error_final,error_qt,order_final,order_qt\n";
    const auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); };
    for (std::size_t k = 0; k < table.levels.size(); ++k) {
        const auto& l = table.levels[k];
        std::optional<double> of, oq;
        if (k > 0 && !table.exact) {
            const auto& p = table.levels[k - 1];
            const double ratio = table.parameter == ConvergenceParameter::H ? p.h / l.h : p.dt / l.dt;
            if (ratio > 1.0 && l.error_final > 0.0 && l.error_qt > 0.0) {
                of = std::log(p.error_final / l.error_final) / std::log(ratio);
                oq = std::log(p.error_qt / l.error_qt) / std::log(ratio);
            }
        }
        fmt::print(os, "level,{},{},{},{},{},{}\n", l.h, l.dt, l.error_final, l.error_qt, opt(of), opt(oq));
    }
    fmt::print(os, "{},,,,,{},{}\n", table.exact ? "exact" : "fit", opt(table.order_final), opt(table.order_qt));
}

void write_summary(std::ostream& os, const DiagnosticsReport& report) {
    fmt::print(os, "eps                  {}\n", report.eps);
    if (!report.energy.empty()) {
        fmt::print(os, "psi energy           {} -> {}\n", report.energy.front().psi_energy,
                   report.energy.back().psi_energy);
        fmt::print(os, "int ||u||^2_H1       {}\n", report.energy.back().h1_accum);
    }
    fmt::print(os, "penalty residual     {}\n", report.penalty_residual);
    fmt::print(os, "max u on gamma3      {}\n", report.complementarity.max_u);
    fmt::print(os, "max positive flux    {}\n", report.complementarity.max_flux);
    fmt::print(os, "max |u * flux|       {}\n", report.complementarity.max_product);
    if (report.vi_residual) fmt::print(os, "vi residual          {}\n", *report.vi_residual);
    fmt::print(os, "gronwall fit         A = {}, C = {}, min slack = {}\n", report.gronwall.a, report.gronwall.c,
               report.gronwall.min_slack);
}

}  // namespace dnpvi
