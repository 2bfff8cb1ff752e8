#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "asfem/adaptivity.hpp"
#include "asfem/catalog.hpp"

namespace asfem {

struct RunConfig {
    std::string problem = "cross_diffusion";
    EstimatorKind estimator = EstimatorKind::GoaAdjointResidual;
    int p = 1;
    int delta_p = 0;
    int epsilon = -1;
    double gamma = std::numeric_limits<double>::quiet_NaN(); // NaN = problem default
    double theta = 0.2;
    int levels = 0; // 0 = problem default
    long ndof_cap = 300000;
    std::string out_dir = "out";
    bool emit_mesh = false;
    // adr_generic coefficients (settable through the config file)
    double kappa = 1.0;
    double bx = 0.0;
    double by = 0.0;
    double f_const = 1.0;
};

inline void attach_cli(CLI::App& app, RunConfig& cfg) {
    app.option_defaults()->always_capture_default();
    app.add_option("--problem", cfg.problem, "catalog problem name");
    std::map<std::string, EstimatorKind> kinds{
        {"energy", EstimatorKind::Energy},
        {"goa-dg", EstimatorKind::GoaAdjointDg},
        {"goa-residual", EstimatorKind::GoaAdjointResidual}};
    app.add_option("--estimator", cfg.estimator, "refinement estimator")
        ->transform(CLI::CheckedTransformer(kinds, CLI::ignore_case));
    app.add_option("--p", cfg.p, "trial polynomial degree")->check(CLI::Range(1, 4));
    app.add_option("--dp", cfg.delta_p, "test-space degree increment")
        ->check(CLI::Range(0, 1));
    app.add_option("--epsilon", cfg.epsilon, "penalty symmetry switch (-1 or 1)")
        ->check(CLI::IsMember({-1, 1}));
    app.add_option("--gamma", cfg.gamma, "reaction coefficient");
    app.add_option("--theta", cfg.theta, "bulk-chasing marking fraction in (0,1]")
        ->check(CLI::Validator(
            [](std::string& s) -> std::string {
                double v = 0.0;
                try {
                    v = std::stod(s);
                } catch (...) {
                    return "not a number";
                }
                if (!(v > 0.0 && v <= 1.0)) return "theta must be in (0,1]";
                return {};
            },
            "THETA"));
    app.add_option("--levels", cfg.levels, "adaptive levels (0 = problem default)")
        ->check(CLI::Range(0, 1000));
    app.add_option("--ndof-cap", cfg.ndof_cap, "stop before exceeding this many dofs")
        ->check(CLI::PositiveNumber);
    app.add_option("--out", cfg.out_dir, "output directory");
    app.add_flag("--emit-mesh", cfg.emit_mesh, "write a mesh dump per level");
    app.add_option("--kappa", cfg.kappa, "diffusion coefficient (adr_generic)");
    app.add_option("--bx", cfg.bx, "velocity x component (adr_generic)");
    app.add_option("--by", cfg.by, "velocity y component (adr_generic)");
    app.add_option("--f", cfg.f_const, "constant source (adr_generic)");
    app.set_config("--config", "", "flat key = value configuration file");
}

/// Parses flags (and an optional config file; flags take precedence).
/// Throws CLI::ParseError on malformed input.
inline RunConfig parse_run_config(int argc, const char* const* argv) {
    RunConfig cfg;
    CLI::App app{"adaptive stabilized FEM driver"};
    attach_cli(app, cfg);
    app.parse(argc, argv);
    return cfg;
}

/// Executes one adaptive run and writes history.csv, ratefit.txt and the
/// optional per-level mesh dumps into the output directory.
inline int run(const RunConfig& cfg) {
    const ProblemCatalogEntry* entry = find_problem(cfg.problem);
    if (entry == nullptr) {
        std::cerr << "unknown problem '" << cfg.problem << "'; catalog:\n";
        for (const auto& e : catalog())
            std::cerr << "  " << e.name << " - " << e.summary << "\n";
        return 2;
    }

    ProblemDef prob = cfg.problem == "adr_generic"
                          ? make_generic_problem(cfg.kappa, cfg.bx, cfg.by,
                                                 std::isnan(cfg.gamma) ? 0.0 : cfg.gamma,
                                                 cfg.f_const, cfg.epsilon)
                          : entry->make_problem(cfg.epsilon, cfg.gamma);
    Mesh mesh = entry->make_mesh();
    int levels = cfg.levels > 0 ? cfg.levels : entry->default_levels;

    std::filesystem::create_directories(cfg.out_dir);
    AdaptiveOptions opts;
    opts.ndof_cap = cfg.ndof_cap;
    if (cfg.emit_mesh) {
        opts.level_observer = [&](int level, const Mesh& m, const IndicatorField& ind) {
            std::ofstream os(cfg.out_dir + "/mesh_" + std::to_string(level) + ".txt");
            write_mesh_dump(m, ind.eta, os);
        };
    }

    ConvergenceHistory history = run_adaptive(prob, cfg.estimator, cfg.p, cfg.delta_p,
                                              cfg.theta, levels, mesh, opts);

    {
        std::ofstream os(cfg.out_dir + "/history.csv");
        write_history(history, os);
    }
    {
        std::ofstream os(cfg.out_dir + "/ratefit.txt");
        std::vector<double> xs, ys;
        size_t n = history.records.size();
        size_t first = n > 6 ? n - 6 : 0;
        for (size_t i = first; i < n; ++i) {
            xs.push_back(static_cast<double>(history.records[i].ndofs));
            ys.push_back(history.records[i].rel_err);
        }
        double slope = fit_log_slope(xs, ys);
        double r = entry->regime_r(std::isnan(cfg.gamma) ? 0.0 : cfg.gamma);
        char buf[256];
        os << "problem " << cfg.problem << "\n";
        os << "estimator " << to_string(cfg.estimator) << "\n";
        std::snprintf(buf, sizeof buf, "levels_fit %zu\n", xs.size());
        os << buf;
        std::snprintf(buf, sizeof buf, "slope_log_ndofs %.15g\n", slope);
        os << buf;
        std::snprintf(buf, sizeof buf, "slope_log_sqrt_ndofs %.15g\n", 2.0 * slope);
        os << buf;
        std::snprintf(buf, sizeof buf, "target_log_ndofs %.15g\n", -(cfg.p + r));
        os << buf;
        std::snprintf(buf, sizeof buf, "target_log_sqrt_ndofs %.15g\n", -2.0 * (cfg.p + r));
        os << buf;
    }

    std::cerr << "status: " << history.status << ", levels: " << history.records.size()
              << "\n";
    if (history.status == "completed" &&
        static_cast<int>(history.records.size()) == levels)
        return 0;
    if (history.status.rfind("solver-error", 0) == 0) return 4;
    return 3;
}

} // namespace asfem
