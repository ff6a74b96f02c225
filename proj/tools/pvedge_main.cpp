#include "pvedge/errors.hpp"
#include "pvedge/harness.hpp"
#include "pvedge/path.hpp"
#include "pvedge/rng.hpp"
#include "pvedge/validation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace {

using pvedge::ExperimentConfig;

/// Flags shared by the experiment subcommands; values are kept as text and
/// applied through ExperimentConfig::set so that file and flag parsing agree.
struct CommonFlags {
    std::string config_path;
    std::map<std::string, std::string> values;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "key = value configuration file");
        add(app, "--model", "model", "tanh-vol, bm, bm-drift or custom");
        add(app, "--b1", "b1", "diffusion coefficient expression for custom models");
        add(app, "--b2", "b2", "drift expression for custom models");
        add(app, "--x0", "x0", "initial value for custom models");
        add(app, "--p", "p", "power of the variation");
        add(app, "--n", "n", "comma-separated observation counts (powers of two)");
        add(app, "--refine", "refine", "fine steps per observation block (power of two >= 8)");
        add(app, "--reps", "replications", "Monte Carlo replications");
        add(app, "--seed", "seed", "master seed");
        add(app, "--out", "out_dir", "output directory");
        add(app, "--format", "format", "report format: csv or json");
        add(app, "--workers", "workers", "worker threads (0 = hardware concurrency)");
        add(app, "--gamma-reps", "gamma_replications", "replications for the universal constants");
        add(app, "--bandwidth", "bandwidth", "kernel bandwidth or auto");
        add(app, "--bootstrap", "bootstrap", "bootstrap resamples for CDF distances");
    }

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<std::string>(flag, [this, key](const std::string& v) { values[key] = v; }, help);
    }

    ExperimentConfig build(const std::set<std::string>& analyses) const {
        ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(config_path);
        c.analyses = analyses;
        for (const auto& [k, v] : values) c.set(k, v);
        c.validate();
        return c;
    }
};

void emit_report(const pvedge::EdgeworthReport& report) {
    if (report.config.format == "json")
        std::cout << pvedge::report_json(report);
    else
        std::cout << pvedge::report_csv(report);
}

int run_simulate(const CommonFlags& flags, int stride) {
    ExperimentConfig c = flags.build({"lln"});
    const pvedge::DiffusionModel model = pvedge::make_model(c);
    std::filesystem::create_directories(c.out_dir);
    for (int n : c.n_list) {
        const std::uint64_t seed = pvedge::substream_seed(c.seed, 0);
        const pvedge::SimulatedPath path = pvedge::simulate_path(model, n, c.refine, seed);
        const std::filesystem::path file = std::filesystem::path(c.out_dir) / ("path_n" + std::to_string(n) + ".csv");
        std::ofstream out(file, std::ios::binary);
        if (!out) throw pvedge::ConfigError("cannot write '" + file.string() + "'");
        out << std::setprecision(17) << "seed,k,t,w,x,y\n";
        for (std::size_t k = 0; k < path.x.size(); k += static_cast<std::size_t>(stride))
            out << seed << ',' << k << ',' << static_cast<double>(k) * path.fine_dt << ',' << path.w[k] << ','
                << path.x[k] << ',' << path.y[k] << '\n';
        std::cout << file.string() << '\n';
    }
    return 0;
}

int run_analysis(const CommonFlags& flags, const std::set<std::string>& analyses) {
    const ExperimentConfig c = flags.build(analyses);
    emit_report(pvedge::run_experiment(c));
    return 0;
}

int run_validate(const std::string& budget, std::uint64_t seed, int workers, const std::string& out_dir) {
    pvedge::ValidationOptions o;
    o.budget = pvedge::ValidationBudget::named(budget);
    o.seed = seed;
    o.workers = workers;
    std::vector<pvedge::CriterionResult> results;
    for (auto* f : {pvedge::check_quadratic_constants, pvedge::check_kappa3_identity, pvedge::check_expansion_order,
                    pvedge::check_joint_clt, pvedge::check_constant_b1_degeneracy, pvedge::check_studentized_density,
                    pvedge::check_q_polynomials, pvedge::check_malliavin, pvedge::check_lln_functionals}) {
        results.push_back(f(o));
        std::cout << results.back().line() << std::endl;
    }
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path file = std::filesystem::path(out_dir) / "validation_report.json";
    std::ofstream out(file, std::ios::binary);
    if (!out) throw pvedge::ConfigError("cannot write '" + file.string() + "'");
    out << pvedge::validation_report_json(o, results);
    bool all = true;
    for (const auto& r : results) all = all && r.passed;
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Edgeworth expansions for power variations of diffusions"};
    app.require_subcommand(1);

    CommonFlags simulate_flags, estimate_flags, expansion_flags, symbols_flags, density_flags;
    int stride = 1;
    auto* sim = app.add_subcommand("simulate", "write fine-grid paths (t, W, X, Y) as CSV");
    simulate_flags.attach(sim);
    sim->add_option("--stride", stride, "keep every stride-th fine point")->check(CLI::PositiveNumber);
    auto* est = app.add_subcommand("estimate", "power variation, F_n and M_n per replication");
    estimate_flags.attach(est);
    auto* exp = app.add_subcommand("expansion", "second-order terms and the residual study");
    expansion_flags.attach(exp);
    auto* sym = app.add_subcommand("symbols", "covariance densities, mu3 and symbol coefficients");
    symbols_flags.attach(sym);
    auto* den = app.add_subcommand("density", "fit the density model and write evaluation grids");
    density_flags.attach(den);

    std::string budget = "full", validate_out = "validation";
    std::uint64_t validate_seed = 20240601;
    int validate_workers = 0;
    auto* val = app.add_subcommand("validate", "run the acceptance criteria 1 to 9");
    val->add_option("--budget", budget, "full or quick");
    val->add_option("--seed", validate_seed, "master seed");
    val->add_option("--workers", validate_workers, "worker threads (0 = hardware concurrency)");
    val->add_option("--out", validate_out, "directory for validation_report.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed()) return run_simulate(simulate_flags, stride);
        if (est->parsed()) return run_analysis(estimate_flags, {"lln"});
        if (exp->parsed()) return run_analysis(expansion_flags, {"lln", "expansion"});
        if (sym->parsed()) return run_analysis(symbols_flags, {"symbols", "clt"});
        if (den->parsed()) return run_analysis(density_flags, {"density", "studentized"});
        if (val->parsed()) return run_validate(budget, validate_seed, validate_workers, validate_out);
    } catch (const pvedge::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const pvedge::ContractViolation& e) {
        std::cerr << "invalid request: " << e.what() << '\n';
        return 2;
    } catch (const pvedge::FailureThreshold& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const pvedge::Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
