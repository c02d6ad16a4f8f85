#pragma once

#include "dnpvi/fem.hpp"
#include "dnpvi/mesh.hpp"
#include "dnpvi/problem.hpp"
#include "dnpvi/solver.hpp"
#include "dnpvi/state.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dnpvi {

struct EnergyRow {
    double t = 0.0;
    double psi_energy = 0.0;  // sum_i w_i Psi(u_i)
    double h1_accum = 0.0;    // int_0^t ||u||^2_H1, trapezoidal
};

[[nodiscard]] std::vector<EnergyRow> energy_trajectory(const Trajectory& traj, const ProblemSpec& spec,
                                                       const Mesh& mesh);

/// Trapezoidal int_0^T |<beta(u), u>| dt over the recorded pairings.
[[nodiscard]] double penalty_residual(const Trajectory& traj);

struct Complementarity {
    double max_u = 0.0;         // max over constrained dofs of u
    double max_flux = 0.0;      // max(0, max flux)
    double max_product = 0.0;   // max |u * flux|
};

/// `flux` is aligned with Assembler::constrained_dofs(), e.g. from recover_flux
/// or the negated active-set multiplier. No constrained dofs gives all zeros.
[[nodiscard]] Complementarity complementarity_report(const StateField& u, const ProblemSpec& spec, const Mesh& mesh,
                                                     const Eigen::VectorXd& flux);

/// Complementarity of the last level of a penalty trajectory, flux from the
/// unpenalized residual.
[[nodiscard]] Complementarity complementarity_report(const Trajectory& traj, const ProblemSpec& spec,
                                                     const Mesh& mesh);

/// One resolution of a convergence study.
struct ConvergenceLevel {
    double h = 0.0;
    double dt = 0.0;
    double error_final = 0.0;  // L2(Omega) at t_end
    double error_qt = 0.0;     // L2(Q_T)
};

enum class ConvergenceParameter { H, Dt };

struct ConvergenceTable {
    std::vector<ConvergenceLevel> levels;
    ConvergenceParameter parameter = ConvergenceParameter::H;
    std::optional<double> order_final;  // least-squares slope of log error vs log parameter
    std::optional<double> order_qt;
    bool exact = false;  // every error at machine precision
};

/// Observed orders need at least three distinct resolutions.
[[nodiscard]] ConvergenceTable convergence_table(std::vector<ConvergenceLevel> levels, ConvergenceParameter by);

/// Manufactured-solution families with a known exact solution.
///   "heat":   B = u, K = 1, u = exp(-pi^2 t) sin(pi x), homogeneous Dirichlet
///   "affine": B = u, K = 1, u = 1 + x steady, Dirichlet data matching
[[nodiscard]] ProblemSpec mms_problem(const std::string& family, int n);
[[nodiscard]] double mms_exact(const std::string& family, double x, double t);
[[nodiscard]] ConvergenceLevel run_mms(const std::string& family, int n, double dt, double t_end);

/// Spatial study with dt = h^2 over n in `ns`, or temporal study at fixed n.
[[nodiscard]] ConvergenceTable spatial_study(const std::string& family, const std::vector<int>& ns, double t_end);
[[nodiscard]] ConvergenceTable temporal_study(const std::string& family, int n, const std::vector<double>& dts,
                                              double t_end);

/// Shape check E(t) <= A (1 + C t e^{C t}) with A = max(E(0), tiny) and the
/// smallest C making it hold at every sample.
struct GronwallFit {
    double a = 0.0;
    double c = 0.0;
    double min_slack = 0.0;  // min over samples of the bound minus E
    bool holds = false;
};
[[nodiscard]] GronwallFit gronwall_fit(const std::vector<EnergyRow>& energy);

struct DiagnosticsReport {
    double eps = 0.0;
    std::vector<EnergyRow> energy;
    double penalty_residual = 0.0;
    Complementarity complementarity;
    std::optional<double> vi_residual;
    GronwallFit gronwall;
    std::vector<double> max_u_constrained;  // per level
};

[[nodiscard]] DiagnosticsReport make_report(const Trajectory& traj, const ProblemSpec& spec, const Mesh& mesh,
                                            double eps);

/// CSV writers: header row, comma separated, LF line endings, values in
/// shortest round-trip form.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const Mesh& mesh);
void write_diagnostics_csv(std::ostream& os, const Trajectory& traj, const DiagnosticsReport& report);
void write_sweep_csv(std::ostream& os, const std::vector<SweepStage>& stages);
void write_convergence_csv(std::ostream& os, const ConvergenceTable& table);
void write_summary(std::ostream& os, const DiagnosticsReport& report);

}  // namespace dnpvi
