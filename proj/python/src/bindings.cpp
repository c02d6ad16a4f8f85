#include "dnpvi/cli.hpp"
#include "dnpvi/diagnostics.hpp"
#include "dnpvi/error.hpp"
#include "dnpvi/oracle.hpp"
#include "dnpvi/problem.hpp"
#include "dnpvi/solver.hpp"
#include "dnpvi/validate.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace dnpvi;

namespace {

SolverConfig config_for(const ProblemSpec& spec, std::optional<double> dt, std::optional<double> t_end) {
    SolverConfig c = SolverConfig::from(spec.solver);
    if (dt) c.dt = *dt;
    if (t_end) c.t_end = *t_end;
    return c;
}

Eigen::MatrixXd states_matrix(const Trajectory& traj) {
    if (traj.size() == 0) return {};
    Eigen::MatrixXd out(static_cast<Eigen::Index>(traj.size()), traj.states.front().values.size());
    for (std::size_t n = 0; n < traj.size(); ++n) out.row(static_cast<Eigen::Index>(n)) = traj.states[n].values.transpose();
    return out;
}

std::vector<double> times(const Trajectory& traj) {
    std::vector<double> t;
    for (std::size_t n = 0; n < traj.size(); ++n) t.push_back(traj.time(n));
    return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Penalty and active-set solvers for doubly nonlinear parabolic systems with a unilateral constraint";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<EvalError>(m, "EvalError", PyExc_ArithmeticError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

    py::class_<ProblemSpec>(m, "ProblemSpec")
        .def_readonly("name", &ProblemSpec::name)
        .def_readonly("m", &ProblemSpec::m)
        .def_readonly("dim", &ProblemSpec::dim)
        .def_readonly("nu", &ProblemSpec::nu)
        .def_readonly("p", &ProblemSpec::p)
        .def_readonly("alpha", &ProblemSpec::alpha)
        .def_readonly("uniqueness_mode", &ProblemSpec::uniqueness_mode)
        .def_readonly("text", &ProblemSpec::text)
        .def_property_readonly("dt", [](const ProblemSpec& s) { return s.solver.dt; })
        .def_property_readonly("t_end", [](const ProblemSpec& s) { return s.solver.t_end; })
        .def("__repr__", [](const ProblemSpec& s) {
            return "<ProblemSpec " + s.name + " m=" + std::to_string(s.m) + " dim=" + std::to_string(s.dim) + ">";
        });

    m.def("parse_problem", [](const std::string& text) { return parse_problem(text); }, py::arg("text"));
    m.def("load_problem", [](const std::filesystem::path& p) { return load_problem(p); }, py::arg("path"));

    py::class_<Mesh>(m, "Mesh")
        .def_property_readonly("dim", &Mesh::dim)
        .def_property_readonly("num_nodes", &Mesh::num_nodes)
        .def_property_readonly("num_elements", &Mesh::num_elements)
        .def_property_readonly("nodes", [](const Mesh& mesh) {
            Eigen::MatrixXd out(static_cast<Eigen::Index>(mesh.num_nodes()), 2);
            for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
                out(static_cast<Eigen::Index>(i), 0) = mesh.node(i)[0];
                out(static_cast<Eigen::Index>(i), 1) = mesh.node(i)[1];
            }
            return out;
        })
        .def_property_readonly("total_volume", &Mesh::total_volume);

    m.def("make_mesh", [](const ProblemSpec& s, const std::filesystem::path& base) { return make_mesh(s, base); },
          py::arg("spec"), py::arg("base_dir") = std::filesystem::path("."));

    py::class_<CheckEntry>(m, "CheckEntry")
        .def_readonly("condition", &CheckEntry::condition)
        .def_readonly("description", &CheckEntry::description)
        .def_property_readonly("verdict", [](const CheckEntry& e) { return std::string(verdict_name(e.verdict)); })
        .def_property_readonly("witnesses",
                               [](const CheckEntry& e) {
                                   py::list out;
                                   for (const Witness& w : e.witnesses) {
                                       out.append(py::make_tuple(w.z1, w.z2, w.detail));
                                   }
                                   return out;
                               })
        .def_readonly("estimates", &CheckEntry::estimates);

    py::class_<ValidationReport>(m, "ValidationReport")
        .def_readonly("entries", &ValidationReport::entries)
        .def_property_readonly("passed", &ValidationReport::passed)
        .def("find", [](const ValidationReport& r, const std::string& c) -> std::optional<CheckEntry> {
            const CheckEntry* e = r.find(c);
            return e ? std::optional<CheckEntry>(*e) : std::nullopt;
        })
        .def("__str__", &ValidationReport::to_text);

    m.def("validate", &validate, py::arg("spec"), py::arg("mesh"));
    m.def("legendre_psi", [](const ProblemSpec& s, const std::vector<double>& z, int n) { return legendre_psi(s, z, n); },
          py::arg("spec"), py::arg("z"), py::arg("quad_n") = 16);
    m.def("check_A4",
          [](double nu, double p, double alpha, int N) {
              const A4Result r = check_A4(nu, p, alpha, N);
              return py::make_tuple(r.ok, r.reason);
          },
          py::arg("nu"), py::arg("p"), py::arg("alpha"), py::arg("N"));

    py::class_<Trajectory>(m, "Trajectory")
        .def_property_readonly("times", &times)
        .def_property_readonly("states", &states_matrix, "one row of nodal values (node-major) per time level")
        .def_readonly("pairing", &Trajectory::pairing)
        .def_property_readonly("newton_iterations",
                               [](const Trajectory& t) {
                                   std::vector<int> it;
                                   for (const auto& s : t.stats) it.push_back(s.iterations);
                                   return it;
                               })
        .def("__len__", &Trajectory::size);

    m.def(
        "solve",
        [](const ProblemSpec& s, const Mesh& mesh, std::optional<double> eps, std::optional<double> dt,
           std::optional<double> t_end) {
            return solve_transient(s, mesh, eps.value_or(s.solver.eps), config_for(s, dt, t_end));
        },
        py::arg("spec"), py::arg("mesh"), py::arg("eps") = py::none(), py::arg("dt") = py::none(),
        py::arg("t_end") = py::none());

    m.def(
        "active_set",
        [](const ProblemSpec& s, const Mesh& mesh, std::optional<double> dt, std::optional<double> t_end) {
            OracleTrajectory o = active_set_transient(s, mesh, config_for(s, dt, t_end));
            return py::make_tuple(o.trajectory, o.multipliers);
        },
        py::arg("spec"), py::arg("mesh"), py::arg("dt") = py::none(), py::arg("t_end") = py::none());

    m.def(
        "sweep",
        [](const ProblemSpec& s, const Mesh& mesh, double eps0, int stages, bool warm) {
            py::list out;
            for (const SweepStage& st : sweep_eps(s, mesh, PenaltySchedule::geometric(eps0, stages, warm),
                                                  SolverConfig::from(s.solver))) {
                py::dict d;
                d["eps"] = st.eps;
                d["penalty_residual"] = st.penalty_residual;
                d["distance_to_previous"] = st.distance_to_previous;
                d["failed"] = st.failed;
                d["trajectory"] = st.trajectory;
                out.append(d);
            }
            return out;
        },
        py::arg("spec"), py::arg("mesh"), py::arg("eps0") = 1e-2, py::arg("stages") = 5, py::arg("warm_start") = true);

    m.def(
        "oracle_compare",
        [](const ProblemSpec& s, const Mesh& mesh, double eps0, int stages) {
            const OracleComparison c =
                oracle_compare(s, mesh, PenaltySchedule::geometric(eps0, stages), SolverConfig::from(s.solver));
            std::vector<std::pair<double, double>> rows;
            for (const auto& r : c.rows) rows.emplace_back(r.eps, r.failed ? std::nan("") : r.distance);
            return rows;
        },
        py::arg("spec"), py::arg("mesh"), py::arg("eps0") = 1e-2, py::arg("stages") = 5);

    m.def("penalty_residual", &penalty_residual, py::arg("trajectory"));
    m.def("l2qt_distance", &l2qt_distance, py::arg("mesh"), py::arg("a"), py::arg("b"));
    m.def(
        "energy",
        [](const Trajectory& t, const ProblemSpec& s, const Mesh& mesh) {
            std::vector<std::tuple<double, double, double>> rows;
            for (const EnergyRow& r : energy_trajectory(t, s, mesh)) rows.emplace_back(r.t, r.psi_energy, r.h1_accum);
            return rows;
        },
        py::arg("trajectory"), py::arg("spec"), py::arg("mesh"));
    m.def(
        "complementarity",
        [](const Trajectory& t, const ProblemSpec& s, const Mesh& mesh) {
            const Complementarity c = complementarity_report(t, s, mesh);
            return py::make_tuple(c.max_u, c.max_flux, c.max_product);
        },
        py::arg("trajectory"), py::arg("spec"), py::arg("mesh"));

    m.def(
        "spatial_study",
        [](const std::string& family, const std::vector<int>& ns, double t_end) {
            const ConvergenceTable t = spatial_study(family, ns, t_end);
            return py::make_tuple(t.order_final, t.order_qt, t.exact);
        },
        py::arg("family"), py::arg("ns"), py::arg("t_end") = 0.1);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line tool in-process; returns (exit code, stdout, stderr).");

    m.attr("__version__") = cli::kToolVersion;
}
