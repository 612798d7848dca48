#pragma once

// Command-line surface: argument parsing into typed commands and command
// execution. Exit codes: 0 success, 1 numerical failure, 2 usage error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "rym/explorer.hpp"
#include "rym/io.hpp"

namespace rym::cli {

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Thrown when --help is requested; carries the text to print.
class HelpRequested : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct CommonOpts {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;

    ode::IntegrationConfig config() const {
        ode::IntegrationConfig c;
        c.rel_tol = rel_tol;
        c.abs_tol = abs_tol;
        return c;
    }
};

struct SolveCmd {
    double lambda = 0.0;
    double r_max = 30.0;
    std::string out;
    CommonOpts common;
};

struct SweepCmd {
    std::vector<double> lambdas;
    double r_max = 30.0;
    std::string out_dir;
    CommonOpts common;
};

struct VerifyCmd {
    double lambda = 0.0;
    double r_max = 30.0;
    CommonOpts common;
};

struct ConvergeCmd {
    ConvergenceTarget target = ConvergenceTarget::Cigar;
    std::vector<double> lambdas;
    double R = 5.0;
    CommonOpts common;
};

struct ClassifyCmd {
    double A = 1.0;
    double B = 0.0;
    std::size_t samples = 100;
    std::uint64_t seed = kDefaultSeed;
    double r_span = 200.0;
    CommonOpts common;
};

struct FigureCmd {
    std::string out_dir;
    CommonOpts common;
};

using Command = std::variant<SolveCmd, SweepCmd, VerifyCmd, ConvergeCmd, ClassifyCmd, FigureCmd>;

inline constexpr double kFigureLambdas[] = {-2.0, -1.5, -1.0, -0.5, 0.0, 0.25, 0.5, 1.0, 2.0};
inline constexpr double kFigureRMax = 10.0;
inline constexpr double kFigureStep = 0.01;
inline constexpr double kResidualTolerance = 1e-6;

namespace detail_cli {

inline std::vector<double> parse_lambda_list(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string item = text.substr(pos, comma - pos);
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (item.empty() || end != item.c_str() + item.size())
            throw UsageError("--lambdas: cannot parse '" + item + "' as a real number");
        out.push_back(v);
        pos = comma + 1;
        if (comma == text.size()) break;
    }
    return out;
}

inline void check_lambda_floor(const std::vector<double>& lambdas, const char* flag) {
    for (double l : lambdas)
        if (!(l >= -2.0)) throw UsageError(std::string(flag) + ": lambda below -2");
}

inline std::string join_args(const std::vector<std::string>& args) {
    std::string s = "rym";
    for (const auto& a : args) {
        s += ' ';
        s += a;
    }
    return s;
}

}  // namespace detail_cli

/// Parses argv (without the program name) into a validated Command.
/// Throws UsageError for anything malformed; the message names the flag.
inline Command parse_args(const std::vector<std::string>& args) {
    CLI::App app{"Rotationally symmetric steady gradient Ricci-Yang-Mills solitons on surfaces",
                 "rym"};
    app.require_subcommand(1);

    const CLI::Validator lambda_floor(
        [](std::string& s) -> std::string {
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (end != s.c_str() + s.size()) return "cannot parse '" + s + "'";
            if (!(v >= -2.0)) return "lambda below -2";
            return {};
        },
        "LAMBDA>=-2");

    SolveCmd solve;
    SweepCmd sweep;
    VerifyCmd verify;
    ConvergeCmd converge;
    ClassifyCmd classify;
    FigureCmd figure;
    std::string sweep_lambdas, converge_lambdas, converge_target;

    auto add_common = [](CLI::App* sub, CommonOpts& c) {
        sub->add_option("--rtol", c.rel_tol, "relative tolerance")->check(CLI::PositiveNumber);
        sub->add_option("--atol", c.abs_tol, "absolute tolerance")->check(CLI::PositiveNumber);
        sub->set_config("--config", "", "key=value configuration file");
    };

    auto* s = app.add_subcommand("solve", "integrate one family member and write its trajectory");
    s->add_option("--lambda", solve.lambda, "family parameter, >= -2")
        ->required()
        ->check(lambda_floor);
    s->add_option("--rmax", solve.r_max, "integration range")->check(CLI::PositiveNumber);
    s->add_option("--out", solve.out, "output CSV path")->required();
    add_common(s, solve.common);

    auto* w = app.add_subcommand("sweep", "integrate a list of lambdas into a directory");
    w->add_option("--lambdas", sweep_lambdas, "comma-separated lambdas, each >= -2")->required();
    w->add_option("--rmax", sweep.r_max, "integration range")->check(CLI::PositiveNumber);
    w->add_option("--outdir", sweep.out_dir, "output directory")->required();
    add_common(w, sweep.common);

    auto* v = app.add_subcommand("verify", "run the identity-residual suite for one lambda");
    v->add_option("--lambda", verify.lambda, "family parameter, >= -2")
        ->required()
        ->check(lambda_floor);
    v->add_option("--rmax", verify.r_max, "integration range")->check(CLI::PositiveNumber);
    add_common(v, verify.common);

    auto* c = app.add_subcommand("converge", "sup-norm convergence experiment toward a limit");
    c->add_option("--target", converge_target, "cigar | cusp | sphere")
        ->required()
        ->check(CLI::IsMember({"cigar", "cusp", "sphere"}));
    c->add_option("--lambdas", converge_lambdas, "comma-separated lambda sequence")->required();
    c->add_option("--R", converge.R, "comparison interval endpoint")->check(CLI::PositiveNumber);
    add_common(c, converge.common);

    auto* k = app.add_subcommand("classify", "seeded random critical-point scans");
    k->add_option("--A", classify.A, "coefficient A > 0")->required()->check(CLI::PositiveNumber);
    k->add_option("--B", classify.B, "coefficient B (sign selects the regime)")->required();
    k->add_option("--samples", classify.samples, "number of random problems");
    k->add_option("--seed", classify.seed, "RNG seed");
    k->add_option("--rspan", classify.r_span, "scan range per branch")->check(CLI::PositiveNumber);
    add_common(k, classify.common);

    auto* g = app.add_subcommand("figure", "profile CSVs for the default lambda grid");
    g->add_option("--outdir", figure.out_dir, "output directory")->required();
    add_common(g, figure.common);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        throw HelpRequested(subs.empty() ? app.help() : subs.front()->help());
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    if (s->parsed()) return solve;
    if (w->parsed()) {
        sweep.lambdas = detail_cli::parse_lambda_list(sweep_lambdas);
        detail_cli::check_lambda_floor(sweep.lambdas, "--lambdas");
        return sweep;
    }
    if (v->parsed()) return verify;
    if (c->parsed()) {
        converge.lambdas = detail_cli::parse_lambda_list(converge_lambdas);
        if (converge_target == "cigar") converge.target = ConvergenceTarget::Cigar;
        else if (converge_target == "cusp") converge.target = ConvergenceTarget::Cusp;
        else converge.target = ConvergenceTarget::Sphere;
        return converge;
    }
    if (k->parsed()) return classify;
    if (g->parsed()) return figure;
    throw UsageError("no subcommand given");
}

namespace detail_cli {

inline std::string lambda_tag(double lambda) { return io::format_double(lambda); }

/// Validates the qualitative profile shape of a figure/sweep CSV.
/// Returns an empty string when the shape is as expected.
inline std::string figure_shape_problem(const std::vector<io::TrajectoryRow>& rows,
                                        double lambda, bool closed) {
    constexpr double bump = 1e-9;
    if (lambda > 0.0) {
        if (!closed) return "no closing radius within the figure range";
        if (!(rows.back().phi > 0.0)) return "last row must precede the closing radius";
        return {};
    }
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (!(rows[i].phi > 0.0)) return "phi must stay positive away from the pole";
    if (lambda == 0.0) {
        std::size_t imax = 0;
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].phi > rows[imax].phi) imax = i;
        if (imax == 0 || imax + 1 == rows.size()) return "cusp profile max must be interior";
        for (std::size_t i = imax; i + 1 < rows.size(); ++i)
            if (!(rows[i + 1].phi < rows[i].phi + 1e-12))
                return "cusp profile must decay past its maximum";
        return {};
    }
    // lambda in [-2, 0): monotone rise toward the cylinder radius, allowing the
    // single overshoot hump the profiles develop as lambda approaches 0^-.
    std::size_t maxima = 0;
    for (std::size_t i = 1; i + 1 < rows.size(); ++i)
        if (rows[i].phi > rows[i - 1].phi + bump && rows[i].phi > rows[i + 1].phi + bump)
            ++maxima;
    if (maxima > 1) return "noncompact profile must have at most one interior maximum";
    return {};
}

inline int classify_exit(const std::vector<CriticalPointRecord>& recs) {
    for (const auto& r : recs)
        if (!r.found) return 1;
    return 0;
}

}  // namespace detail_cli

inline int run(const SolveCmd& cmd, const std::string&, std::ostream& out) {
    const auto fs = solve_family(cmd.lambda, cmd.r_max, cmd.common.config());
    const auto rows = io::trajectory_rows(fs.sol, fs.params, kFigureStep);
    io::write_trajectory_csv(rows, cmd.out);
    out << io::report_text(io::to_json(fs.summary));
    return 0;
}

inline int run(const SweepCmd& cmd, const std::string& command_line, std::ostream& out) {
    std::filesystem::create_directories(cmd.out_dir);
    SweepSpec spec{cmd.lambdas, cmd.r_max, cmd.common.config()};
    const auto results = run_sweep(spec, thread_cap_from_env());

    io::RunManifest manifest;
    manifest.command_line = command_line;
    manifest.config = spec.config;
    for (const auto& fs : results) {
        const std::string tag = detail_cli::lambda_tag(fs.summary.lambda);
        const std::string csv = "phi_lambda_" + tag + ".csv";
        const std::string json = "summary_lambda_" + tag + ".json";
        io::write_trajectory_csv(io::trajectory_rows(fs.sol, fs.params, kFigureStep),
                                 std::filesystem::path(cmd.out_dir) / csv);
        io::write_report_json(io::to_json(fs.summary),
                              std::filesystem::path(cmd.out_dir) / json);
        manifest.files.push_back(csv);
        manifest.files.push_back(json);
    }
    io::write_manifest(manifest, std::filesystem::path(cmd.out_dir) / "manifest.json");
    out << "wrote " << manifest.files.size() << " files and manifest.json to " << cmd.out_dir
        << "\n";
    return 0;
}

inline int run(const VerifyCmd& cmd, const std::string&, std::ostream& out) {
    const auto fs = solve_family(cmd.lambda, cmd.r_max, cmd.common.config());
    const auto& m = fs.summary.max_residuals;  // componentwise max |.|, all >= 0
    const bool pass = m.i1 < kResidualTolerance && m.i2_drift < kResidualTolerance &&
                      m.i3 < kResidualTolerance && m.conservation < kResidualTolerance &&
                      m.potent_curv < kResidualTolerance;
    nlohmann::json j = {{"schema_version", io::kSchemaVersion},
                        {"type", "verify_report"},
                        {"lambda", fs.summary.lambda},
                        {"r_max", cmd.r_max},
                        {"max_residuals", io::to_json(m)},
                        {"tolerance", kResidualTolerance},
                        {"pass", pass}};
    out << io::report_text(j);
    return pass ? 0 : 1;
}

inline int run(const ConvergeCmd& cmd, const std::string&, std::ostream& out) {
    const auto config = cmd.common.config();
    ConvergenceReport report;
    switch (cmd.target) {
        case ConvergenceTarget::Cigar:
            report = converge_to_cigar(cmd.lambdas, cmd.R, config);
            break;
        case ConvergenceTarget::Cusp:
            report = converge_to_cusp(cmd.lambdas, cmd.R, config);
            break;
        case ConvergenceTarget::Sphere:
            report = converge_to_sphere(cmd.lambdas, config).report;
            break;
    }
    out << io::report_text(io::to_json(report));
    return 0;
}

inline int run(const ClassifyCmd& cmd, const std::string&, std::ostream& out) {
    const auto problems = random_problems(cmd.A, cmd.B, cmd.samples, cmd.seed);
    const auto records =
        scan_problems(problems, cmd.r_span, cmd.common.config(), thread_cap_from_env());
    std::size_t found = 0;
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : records) {
        recs.push_back(io::to_json(r));
        if (r.found) ++found;
    }
    nlohmann::json j = {{"schema_version", io::kSchemaVersion},
                        {"type", "classification_report"},
                        {"A", cmd.A},
                        {"B", cmd.B},
                        {"samples", cmd.samples},
                        {"seed", cmd.seed},
                        {"r_span", cmd.r_span},
                        {"found_count", found},
                        {"records", recs}};
    out << io::report_text(j);
    return detail_cli::classify_exit(records);
}

inline int run(const FigureCmd& cmd, const std::string& command_line, std::ostream& out) {
    std::filesystem::create_directories(cmd.out_dir);
    const auto config = cmd.common.config();
    io::RunManifest manifest;
    manifest.command_line = command_line;
    manifest.config = config;
    const std::vector<ode::EventSpec> events{phi_zero_event()};
    for (double lambda : kFigureLambdas) {
        const SolitonParams p = SolitonParams::canonical(lambda);
        const auto sol = ode::integrate(coupled_problem(p), config, kFigureRMax, events);
        const auto rows = io::trajectory_rows(sol, p, kFigureStep);
        const bool closed = closing_radius(sol, p).has_value();
        const std::string problem = detail_cli::figure_shape_problem(rows, lambda, closed);
        if (!problem.empty())
            throw std::runtime_error("figure: lambda=" + detail_cli::lambda_tag(lambda) + ": " +
                                     problem);
        const std::string csv = "phi_lambda_" + detail_cli::lambda_tag(lambda) + ".csv";
        io::write_trajectory_csv(rows, std::filesystem::path(cmd.out_dir) / csv);
        manifest.files.push_back(csv);
    }
    io::write_manifest(manifest, std::filesystem::path(cmd.out_dir) / "manifest.json");
    out << "wrote " << manifest.files.size() << " files and manifest.json to " << cmd.out_dir
        << "\n";
    return 0;
}

inline int run(const Command& cmd, const std::string& command_line, std::ostream& out) {
    return std::visit([&](const auto& c) { return run(c, command_line, out); }, cmd);
}

/// Full CLI entry: parse + run with the documented exit codes.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        const Command cmd = parse_args(args);
        return run(cmd, detail_cli::join_args(args), out);
    } catch (const CLI::CallForHelp&) {
        std::vector<std::string> help_args = args;
        out << "rym <solve|sweep|verify|converge|classify|figure> [options]\n"
               "Run 'rym <subcommand> --help' for the option list of a subcommand.\n";
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ode::IntegrationError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

inline int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace rym::cli
