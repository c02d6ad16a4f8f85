#include "dnpvi/cli.hpp"

#include "dnpvi/diagnostics.hpp"
#include "dnpvi/error.hpp"
#include "dnpvi/oracle.hpp"
#include "dnpvi/problem.hpp"
#include "dnpvi/solver.hpp"
#include "dnpvi/validate.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace dnpvi::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    bool quiet = false;
};

/// Problem text plus the mesh file text when the domain is read from a file,
/// so a run can be reproduced from the manifest alone.
struct Inputs {
    std::string problem_text;
    std::string mesh_text;
    ProblemSpec spec;
    std::optional<Mesh> mesh;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

Inputs inputs_from_text(std::string problem_text, std::string mesh_text) {
    Inputs in;
    in.problem_text = std::move(problem_text);
    in.spec = parse_problem(in.problem_text);
    if (in.spec.domain.kind == DomainSpec::Kind::File) {
        in.mesh_text = std::move(mesh_text);
        in.mesh.emplace(read_mesh(in.mesh_text, in.spec.boundary));
        if (in.mesh->dim() != in.spec.dim) throw InvalidArgument("mesh file dimension does not match [problem] dim");
    } else {
        in.mesh.emplace(make_mesh(in.spec));
    }
    return in;
}

Inputs inputs_from_path(const fs::path& path) {
    std::string text = read_file(path);
    ProblemSpec probe = parse_problem(text);
    std::string mesh_text;
    if (probe.domain.kind == DomainSpec::Kind::File) {
        fs::path mp(probe.domain.file);
        if (mp.is_relative()) mp = path.parent_path() / mp;
        mesh_text = read_file(mp);
    }
    Inputs in = inputs_from_text(std::move(text), std::move(mesh_text));
    // make_mesh also checks the tagged parts against the data; run it on file meshes too
    if (in.spec.domain.kind == DomainSpec::Kind::File) (void)make_mesh(in.spec, path.parent_path());
    return in;
}

json config_json(const SolverConfig& c) {
    return json{{"dt", c.dt},
                {"t_end", c.t_end},
                {"newton_rtol", c.newton_rtol},
                {"newton_atol", c.newton_atol},
                {"newton_max_iter", c.newton_max_iter},
                {"max_halvings", c.max_halvings}};
}

SolverConfig config_from_json(const json& j) {
    SolverConfig c;
    c.dt = j.at("dt").get<double>();
    c.t_end = j.at("t_end").get<double>();
    c.newton_rtol = j.at("newton_rtol").get<double>();
    c.newton_atol = j.at("newton_atol").get<double>();
    c.newton_max_iter = j.at("newton_max_iter").get<int>();
    c.max_halvings = j.at("max_halvings").get<int>();
    return c;
}

json mesh_json(const Inputs& in) {
    const auto& d = in.spec.domain;
    json j;
    switch (d.kind) {
        case DomainSpec::Kind::Interval: j = {{"kind", "interval"}, {"n", d.n}}; break;
        case DomainSpec::Kind::Square: j = {{"kind", "square"}, {"nx", d.nx}, {"ny", d.ny}}; break;
        case DomainSpec::Kind::File: j = {{"kind", "file"}, {"file", d.file}, {"text", in.mesh_text}}; break;
    }
    j["nodes"] = in.mesh->num_nodes();
    j["elements"] = in.mesh->num_elements();
    return j;
}

json base_manifest(const std::string& command, const Inputs& in, const Globals& g, std::uint64_t seed) {
    return json{{"tool", "dnpvi"},
                {"version", kToolVersion},
                {"command", command},
                {"problem", in.spec.name},
                {"problem_text", in.problem_text},
                {"mesh", mesh_json(in)},
                {"seed", seed},
                {"output_directory", g.out}};
}

void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw InvalidArgument(fmt::format("cannot write '{}'", tmp.string()));
        f << content;
        if (!f) throw InvalidArgument(fmt::format("write to '{}' failed", tmp.string()));
    }
    fs::rename(tmp, path);
}

template <class Writer>
void write_csv(const fs::path& path, Writer&& writer) {
    std::ostringstream os;
    writer(os);
    write_atomic(path, os.str());
}

void write_manifest(const fs::path& dir, const json& manifest) { write_atomic(dir / "manifest.json", manifest.dump(2) + "\n"); }

/// Either a problem path or --manifest must be given; loads the inputs and,
/// for a manifest, the recorded settings.
struct Source {
    std::string path;
    std::string manifest;
};

std::pair<Inputs, std::optional<json>> load_source(const Source& src, const std::string& command) {
    if (!src.manifest.empty()) {
        json m;
        try {
            m = json::parse(read_file(src.manifest));
        } catch (const json::exception& e) {
            throw ParseError(fmt::format("manifest '{}': {}", src.manifest, e.what()), 0, 0);
        }
        if (m.value("command", "") != command) {
            throw InvalidArgument(fmt::format("manifest '{}' was written by '{}', not '{}'", src.manifest,
                                              m.value("command", ""), command));
        }
        const json& mesh = m.at("mesh");
        return {inputs_from_text(m.at("problem_text").get<std::string>(), mesh.value("text", "")), m};
    }
    if (src.path.empty()) throw CLI::ValidationError("a problem file or --manifest is required");
    return {inputs_from_path(src.path), std::nullopt};
}

int cmd_validate(const std::string& path, const Globals& g, std::ostream& out) {
    Inputs in = inputs_from_path(path);
    if (g.seed) in.spec.sampling.seed = *g.seed;
    const ValidationReport report = validate(in.spec, *in.mesh);
    out << report.to_text();
    return report.passed() ? kOk : kValidationFailed;
}

struct SolveOptions {
    std::optional<double> eps, dt, t_end;
    int bank = 50;
    int probe = 0;
};

int cmd_solve(const Source& src, SolveOptions opt, Globals g, std::ostream& out, std::ostream& err) {
    auto [in, manifest] = load_source(src, "solve");
    SolverConfig config = SolverConfig::from(in.spec.solver);
    double eps = in.spec.solver.eps;
    std::uint64_t seed = in.spec.sampling.seed;
    if (manifest) {
        config = config_from_json(manifest->at("config"));
        eps = manifest->at("eps").get<double>();
        seed = manifest->at("seed").get<std::uint64_t>();
        opt.bank = manifest->value("vi_bank", opt.bank);
        opt.probe = manifest->value("probe", opt.probe);
    }
    if (opt.eps) eps = *opt.eps;
    if (opt.dt) config.dt = *opt.dt;
    if (opt.t_end) config.t_end = *opt.t_end;
    if (g.seed) seed = *g.seed;
    config.check();
    if (!(eps > 0.0)) throw InvalidArgument("--eps must be positive");
    if (config.dt > config.t_end && !g.quiet) {
        fmt::print(err, "warning: dt = {} exceeds t_end = {}; taking a single step\n", config.dt, config.t_end);
    }

    const fs::path dir(g.out);
    fs::create_directories(dir);
    json m = base_manifest("solve", in, g, seed);
    m["eps"] = eps;
    m["config"] = config_json(config);
    m["vi_bank"] = opt.bank;
    m["probe"] = opt.probe;
    write_manifest(dir, m);

    const Mesh& mesh = *in.mesh;
    Trajectory traj;
    int code = kOk;
    try {
        traj = solve_transient(in.spec, mesh, eps, config);
    } catch (const TransientFailure& e) {
        fmt::print(err, "error: {}\n", e.what());
        traj = e.partial();
        code = kSolverFailure;
    }
    DiagnosticsReport report = make_report(traj, in.spec, mesh, eps);
    if (code == kOk && opt.bank > 0 && traj.size() > 1) {
        const auto bank = make_feasible_bank(traj, in.spec, mesh, opt.bank, 0.1, seed);
        report.vi_residual = vi_residual(traj, in.spec, mesh, bank);
    }
    write_csv(dir / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, traj, mesh); });
    write_csv(dir / "diagnostics.csv", [&](std::ostream& os) { write_diagnostics_csv(os, traj, report); });
    if (!g.quiet) write_summary(out, report);

    if (code == kOk && opt.probe > 0) {
        const UniquenessResult u = uniqueness_probe(in.spec, mesh, eps, config, opt.probe, seed);
        if (!g.quiet) fmt::print(out, "uniqueness probe     {} runs, max L2(Q_T) distance {}\n", opt.probe, u.max_distance);
    }
    return code;
}

struct SweepOptions {
    std::optional<int> stages;
    std::optional<double> eps0, dt, t_end;
    bool cold = false;
};

SolverConfig sweep_config(const Inputs& in, const std::optional<json>& manifest, const SweepOptions& opt,
                          PenaltySchedule& schedule) {
    SolverConfig config = SolverConfig::from(in.spec.solver);
    schedule = PenaltySchedule::from(in.spec.solver);
    if (manifest) {
        config = config_from_json(manifest->at("config"));
        schedule.eps = manifest->at("schedule").at("eps").get<std::vector<double>>();
        schedule.warm_start = manifest->at("schedule").at("warm_start").get<bool>();
    }
    if (opt.stages || opt.eps0) {
        const double eps0 = opt.eps0.value_or(schedule.eps.front());
        const int stages = opt.stages.value_or(static_cast<int>(schedule.eps.size()));
        schedule = PenaltySchedule::geometric(eps0, stages, schedule.warm_start);
    }
    if (opt.cold) schedule.warm_start = false;
    if (opt.dt) config.dt = *opt.dt;
    if (opt.t_end) config.t_end = *opt.t_end;
    config.check();
    schedule.check();
    return config;
}

json schedule_json(const PenaltySchedule& s) { return json{{"eps", s.eps}, {"warm_start", s.warm_start}}; }

int cmd_sweep(const Source& src, const SweepOptions& opt, const Globals& g, std::ostream& out, std::ostream& err) {
    auto [in, manifest] = load_source(src, "sweep");
    PenaltySchedule schedule;
    const SolverConfig config = sweep_config(in, manifest, opt, schedule);
    const std::uint64_t seed = g.seed.value_or(manifest ? manifest->at("seed").get<std::uint64_t>() : in.spec.sampling.seed);

    const fs::path dir(g.out);
    fs::create_directories(dir);
    json m = base_manifest("sweep", in, g, seed);
    m["config"] = config_json(config);
    m["schedule"] = schedule_json(schedule);
    write_manifest(dir, m);

    const Mesh& mesh = *in.mesh;
    const auto stages = sweep_eps(in.spec, mesh, schedule, config);
    bool any_failed = false;
    for (std::size_t k = 0; k < stages.size(); ++k) {
        const SweepStage& s = stages[k];
        if (s.failed) {
            any_failed = true;
            fmt::print(err, "error: stage eps = {} failed: {}\n", s.eps, s.error);
            continue;
        }
        const fs::path sub = dir / fmt::format("stage{}", k);
        fs::create_directories(sub);
        const DiagnosticsReport report = make_report(s.trajectory, in.spec, mesh, s.eps);
        write_csv(sub / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, s.trajectory, mesh); });
        write_csv(sub / "diagnostics.csv", [&](std::ostream& os) { write_diagnostics_csv(os, s.trajectory, report); });
    }
    write_csv(dir / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, stages); });
    if (!g.quiet) write_sweep_csv(out, stages);
    return any_failed ? kSolverFailure : kOk;
}

int cmd_oracle_compare(const Source& src, const SweepOptions& opt, const Globals& g, std::ostream& out,
                       std::ostream& err) {
    auto [in, manifest] = load_source(src, "oracle-compare");
    PenaltySchedule schedule;
    const SolverConfig config = sweep_config(in, manifest, opt, schedule);
    const std::uint64_t seed = g.seed.value_or(manifest ? manifest->at("seed").get<std::uint64_t>() : in.spec.sampling.seed);

    const fs::path dir(g.out);
    fs::create_directories(dir);
    json m = base_manifest("oracle-compare", in, g, seed);
    m["config"] = config_json(config);
    m["schedule"] = schedule_json(schedule);
    write_manifest(dir, m);

    const Mesh& mesh = *in.mesh;
    const OracleComparison cmp = oracle_compare(in.spec, mesh, schedule, config);
    const auto& oracle = cmp.oracle;
    const Complementarity oc =
        oracle.multipliers.empty()
            ? Complementarity{}
            : complementarity_report(oracle.trajectory.final_state(), in.spec, mesh, -oracle.multipliers.back());

    std::ostringstream table;
    table << "eps,distance,max_u_gamma3,max_flux,max_product,status\n";
    bool any_failed = false;
    for (std::size_t k = 0; k < cmp.rows.size(); ++k) {
        const auto& row = cmp.rows[k];
        if (row.failed) {
            any_failed = true;
            fmt::print(table, "{},,,,,failed\n", row.eps);
            fmt::print(err, "error: stage eps = {} failed: {}\n", row.eps, cmp.sweep[k].error);
            continue;
        }
        const Complementarity c = complementarity_report(cmp.sweep[k].trajectory, in.spec, mesh);
        fmt::print(table, "{},{},{},{},{},ok\n", row.eps, row.distance, c.max_u, c.max_flux, c.max_product);
    }
    fmt::print(table, "oracle,0,{},{},{},ok\n", oc.max_u, oc.max_flux, oc.max_product);
    write_atomic(dir / "oracle_compare.csv", table.str());
    write_csv(dir / "oracle_trajectory.csv",
              [&](std::ostream& os) { write_trajectory_csv(os, oracle.trajectory, mesh); });
    if (!g.quiet) out << table.str();
    return any_failed ? kSolverFailure : kOk;
}

struct ConvergenceOptions {
    std::string family;
    int levels = 4;
    std::string kind = "spatial";
    std::optional<double> t_end;
};

int cmd_convergence(const ConvergenceOptions& opt, const Globals& g, std::ostream& out) {
    if (opt.levels < 1) throw CLI::ValidationError("--levels must be at least 1");
    const double t_end = opt.t_end.value_or(opt.kind == "spatial" ? 0.1 : 0.5);
    ConvergenceTable table;
    json m{{"tool", "dnpvi"},   {"version", kToolVersion},  {"command", "convergence"}, {"family", opt.family},
           {"kind", opt.kind},  {"levels", opt.levels},     {"t_end", t_end},          {"output_directory", g.out}};
    const fs::path dir(g.out);
    fs::create_directories(dir);
    write_manifest(dir, m);
    if (opt.kind == "spatial") {
        std::vector<int> ns;
        for (int k = 0; k < opt.levels; ++k) ns.push_back(8 << k);
        table = spatial_study(opt.family, ns, t_end);
    } else {
        std::vector<double> dts;
        for (int k = 0; k < opt.levels; ++k) dts.push_back(0.1 / static_cast<double>(1 << k));
        table = temporal_study(opt.family, 128, dts, t_end);
    }
    write_csv(dir / "convergence.csv", [&](std::ostream& os) { write_convergence_csv(os, table); });
    if (!g.quiet) {
        write_convergence_csv(out, table);
        if (table.exact) {
            out << "exact: errors at machine precision\n";
        } else if (table.order_final) {
            fmt::print(out, "observed order (final time) {:.3f}, (space-time) {:.3f}\n", *table.order_final,
                       table.order_qt.value_or(0.0));
        } else {
            out << "fewer than 3 resolutions: no order reported\n";
        }
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Penalty solver for doubly nonlinear parabolic systems with a unilateral boundary constraint",
                 "dnpvi"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "sampling / random seed override");
    app.add_option("--out", g.out, "output directory");
    app.add_flag("--quiet", g.quiet, "suppress reports on stdout");
    app.set_version_flag("--version", kToolVersion);

    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "check the structure conditions of a problem file");
    validate_cmd->add_option("problem", validate_path, "problem file")->required();

    Source solve_src;
    SolveOptions solve_opt;
    auto* solve_cmd = app.add_subcommand("solve", "transient penalty solve");
    solve_cmd->add_option("problem", solve_src.path, "problem file");
    solve_cmd->add_option("--manifest", solve_src.manifest, "re-run from a manifest.json");
    solve_cmd->add_option("--eps", solve_opt.eps, "penalty parameter")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--dt", solve_opt.dt, "time step")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--t-end", solve_opt.t_end, "final time")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--vi-bank", solve_opt.bank, "size of the feasible test bank (0 disables)")
        ->check(CLI::NonNegativeNumber);
    solve_cmd->add_option("--probe", solve_opt.probe, "uniqueness probe runs (0 disables)")
        ->check(CLI::NonNegativeNumber);

    Source sweep_src;
    SweepOptions sweep_opt;
    auto* sweep_cmd = app.add_subcommand("sweep", "penalty continuation sweep");
    sweep_cmd->add_option("problem", sweep_src.path, "problem file");
    sweep_cmd->add_option("--manifest", sweep_src.manifest, "re-run from a manifest.json");
    sweep_cmd->add_option("--eps-stages", sweep_opt.stages, "number of stages")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--eps0", sweep_opt.eps0, "first penalty parameter")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--dt", sweep_opt.dt, "time step")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--t-end", sweep_opt.t_end, "final time")->check(CLI::PositiveNumber);
    sweep_cmd->add_flag("--cold", sweep_opt.cold, "cold-start every stage");

    Source oracle_src;
    SweepOptions oracle_opt;
    auto* oracle_cmd = app.add_subcommand("oracle-compare", "compare the sweep with the active-set oracle");
    oracle_cmd->add_option("problem", oracle_src.path, "problem file");
    oracle_cmd->add_option("--manifest", oracle_src.manifest, "re-run from a manifest.json");
    oracle_cmd->add_option("--eps-stages", oracle_opt.stages, "number of stages")->check(CLI::PositiveNumber);
    oracle_cmd->add_option("--eps0", oracle_opt.eps0, "first penalty parameter")->check(CLI::PositiveNumber);
    oracle_cmd->add_option("--dt", oracle_opt.dt, "time step")->check(CLI::PositiveNumber);
    oracle_cmd->add_option("--t-end", oracle_opt.t_end, "final time")->check(CLI::PositiveNumber);

    ConvergenceOptions conv_opt;
    auto* conv_cmd = app.add_subcommand("convergence", "manufactured-solution convergence study");
    conv_cmd->add_option("family", conv_opt.family, "heat | affine")
        ->required()
        ->check(CLI::IsMember({"heat", "affine"}));
    conv_cmd->add_option("--levels", conv_opt.levels, "number of resolutions")->check(CLI::PositiveNumber);
    conv_cmd->add_option("--kind", conv_opt.kind, "spatial | temporal")->check(CLI::IsMember({"spatial", "temporal"}));
    conv_cmd->add_option("--t-end", conv_opt.t_end, "final time")->check(CLI::PositiveNumber);

    for (auto* sub : {solve_cmd, sweep_cmd, oracle_cmd}) {
        auto* path_opt = sub->get_option("problem");
        auto* manifest_opt = sub->get_option("--manifest");
        path_opt->excludes(manifest_opt);
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        fmt::print(err, "usage error: {}\n", e.what());
        return kUsageError;
    }

    try {
        if (*validate_cmd) return cmd_validate(validate_path, g, out);
        if (*solve_cmd) return cmd_solve(solve_src, solve_opt, g, out, err);
        if (*sweep_cmd) return cmd_sweep(sweep_src, sweep_opt, g, out, err);
        if (*oracle_cmd) return cmd_oracle_compare(oracle_src, oracle_opt, g, out, err);
        if (*conv_cmd) return cmd_convergence(conv_opt, g, out);
    } catch (const CLI::Error& e) {
        fmt::print(err, "usage error: {}\n", e.what());
        return kUsageError;
    } catch (const ParseError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kUsageError;
    } catch (const SolverError& e) {
        fmt::print(err, "solver failure: {}\n", e.what());
        return kSolverFailure;
    } catch (const EvalError& e) {
        fmt::print(err, "solver failure: {}\n", e.what());
        return kSolverFailure;
    } catch (const InvalidArgument& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kUsageError;
    } catch (const fs::filesystem_error& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kUsageError;
    }
    return kUsageError;
}

}  // namespace dnpvi::cli
