#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nvcssl/bench.hpp"
#include "nvcssl/data.hpp"
#include "nvcssl/errors.hpp"
#include "nvcssl/model_io.hpp"
#include "nvcssl/parallel.hpp"
#include "nvcssl/pipeline.hpp"
#include "nvcssl/simulate.hpp"

namespace nvcssl {

namespace fs = std::filesystem;

namespace {

struct FitArgs {
    std::string input;
    std::string output_dir = ".";
    std::string method = "nvcssl";
    std::string structure = "ar1";
    std::vector<int> d{8};
    double xi = 0.0;  // 0: tune on the grid
    std::string working = "eb";
    double t_min = kNaN, t_max = kNaN;
    std::size_t grid_points = 101;
};

struct PredictArgs {
    std::string model;
    std::string input;
    std::string output = "predictions.csv";
};

struct SimulateArgs {
    std::string scenario = "s61";
    std::string seed;  // empty: $NVCSSL_SEED, then 1
    std::size_t n = 0, p = 0, n_test = 50;
    double rho = 0.8;
    std::string structure = "ar1";
    std::string output_dir = ".";
};

struct BenchArgs {
    std::string config;
    std::string output;
};

std::uint64_t resolve_seed(const std::string& flag) {
    std::string text = flag;
    if (text.empty()) {
        const char* env = std::getenv("NVCSSL_SEED");
        text = env ? env : "1";
    }
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ArgumentError("invalid seed '" + text + "'");
    }
}

fs::path ensure_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (!fs::is_directory(p)) throw ValidationError("cannot create output directory " + dir);
    return p;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << std::setprecision(17);
    return out;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "NA";
    std::ostringstream os;
    os << std::setprecision(8) << v;
    return os.str();
}

void add_ssgl_options(CLI::App* app, SSGLConfig& c, double& b_override) {
    app->add_option("--lambda1", c.lambda1, "Slab penalty");
    app->add_option("--ladder", c.lambda0_ladder, "Increasing spike penalties (comma separated)")->delimiter(',');
    app->add_option("--atoms", c.rho_atoms, "Support of the discrete prior on rho")->delimiter(',');
    app->add_option("--a", c.a, "Beta prior shape a on theta");
    app->add_option("--b", b_override, "Beta prior shape b on theta (0 means the number of covariates)");
    app->add_option("--c0", c.c0, "Inverse-gamma shape c0 on sigma2");
    app->add_option("--d0", c.d0, "Inverse-gamma scale d0 on sigma2");
    app->add_option("--xi-grid", c.xi_grid, "Fractional powers tried when --xi is not given")->delimiter(',');
    app->add_option("--em-tol", c.em_tol, "EM stopping tolerance on the coefficient change");
    app->add_option("--em-max-iter", c.em_max_iter, "EM iteration limit per ladder rung and atom");
    app->add_option("--bcd-tol", c.bcd_tol, "Block coordinate descent tolerance");
    app->add_option("--bcd-max-iter", c.bcd_max_iter, "Block coordinate descent sweep limit");
}

void write_summary(std::ostream& os, const FitResult& fit) {
    os << "method: " << to_string(fit.method) << '\n';
    if (fit.method == Method::NVCSSL) os << "structure: " << to_string(fit.structure) << '\n';
    os << "d: " << fit.basis.dim << '\n';
    os << "selected (" << fit.selected.size() << "):";
    for (auto k : fit.selected) os << ' ' << fit.variable_names[k];
    os << '\n';
    os << "theta: " << fmt(fit.theta) << '\n';
    os << "sigma2: " << fmt(fit.sigma2) << '\n';
    os << "rho: " << fmt(fit.rho) << '\n';
    if (fit.xi) os << "xi: " << fmt(*fit.xi) << '\n';
    if (fit.working)
        os << "working: " << fit.working->source << " sigma2=" << fmt(fit.working->sigma2)
           << " rho=" << fmt(fit.working->rho) << '\n';
    if (fit.penalty_lambda) os << "lambda: " << fmt(*fit.penalty_lambda) << '\n';
    os << "generalized_dim: " << fit.generalized_dim << '\n';
    os << "aicc: " << fmt(fit.aicc) << '\n';
    os << "converged: " << (fit.converged ? "yes" : "no") << '\n';
}

int cmd_fit(const FitArgs& a, const SSGLConfig& cfg_in, double b_override, unsigned threads, bool verbose,
            std::ostream& out, std::ostream& err) {
    SSGLConfig cfg = cfg_in;
    if (b_override > 0.0) cfg.b = b_override;
    cfg.threads = threads;
    cfg.validate();
    const Method method = parse_method(a.method);
    MethodOptions opt;
    opt.ssgl = cfg;
    opt.structure = parse_structure(a.structure);
    opt.d_grid = a.d;
    for (int d : opt.d_grid)
        if (d < 4) throw ArgumentError("--d values must be at least 4 for cubic splines");
    if (a.xi != 0.0) opt.xi = a.xi;
    opt.working = a.working;
    opt.t_min = a.t_min;
    opt.t_max = a.t_max;
    if (a.grid_points < 2) throw ArgumentError("--grid-points must be at least 2");

    const LongitudinalDataset raw = load_long_csv(a.input);
    const LongitudinalDataset ds = center_response(raw);
    const fs::path dir = ensure_dir(a.output_dir);
    if (verbose)
        err << "fitting " << a.method << " on " << ds.num_subjects() << " subjects, " << ds.num_observations()
            << " rows, " << ds.num_covariates() << " covariates\n";
    const FitResult fit = fit_method(method, ds, opt);

    save_model(fit, dir / "model.json");
    {
        auto os = open_out(dir / "curves.csv");
        os << "variable,t,beta\n";
        const Vector grid = basis_grid(fit.basis, a.grid_points);
        for (auto k : fit.selected) {
            const Vector beta = eval_beta(fit.block(k), fit.basis, grid);
            for (Eigen::Index g = 0; g < grid.size(); ++g)
                os << fit.variable_names[k] << ',' << grid[g] << ',' << beta[g] << '\n';
        }
    }
    {
        const Vector fitted = predict(fit, raw);
        auto os = open_out(dir / "fitted.csv");
        os << "subject,time,y,fitted\n";
        for (std::size_t i = 0; i < raw.num_subjects(); ++i)
            for (auto r = raw.row_begin(i); r < raw.row_end(i); ++r) {
                const auto row = static_cast<Eigen::Index>(r);
                os << raw.subject_ids()[i] << ',' << raw.times()[row] << ',' << raw.responses()[row] << ','
                   << fitted[row] << '\n';
            }
    }
    {
        auto os = open_out(dir / "summary.txt");
        write_summary(os, fit);
    }
    write_summary(out, fit);
    if (!fit.converged) err << "warning: at least one EM run reached the iteration limit\n";
    return 0;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
    const FitResult fit = load_model(a.model);
    const LongitudinalDataset ds = load_long_csv(a.input);
    if (ds.variable_names() != fit.variable_names)
        throw ValidationError("covariate columns of " + a.input + " do not match the model's variables");
    const Vector pred = predict(fit, ds);
    auto os = open_out(a.output);
    os << "subject,time,prediction\n";
    for (std::size_t i = 0; i < ds.num_subjects(); ++i)
        for (auto r = ds.row_begin(i); r < ds.row_end(i); ++r) {
            const auto row = static_cast<Eigen::Index>(r);
            os << ds.subject_ids()[i] << ',' << ds.times()[row] << ',' << pred[row] << '\n';
        }
    out << "wrote " << pred.size() << " predictions to " << a.output << '\n';
    return 0;
}

int cmd_simulate(const SimulateArgs& a, const CLI::App& sub, std::ostream& out) {
    Scenario sc = Scenario::defaults(parse_scenario(a.scenario));
    if (a.n) sc.n = a.n;
    if (a.p) sc.p = a.p;
    sc.n_test = a.n_test;
    if (sub.count("--rho")) sc.rho = a.rho;
    sc.structure = parse_structure(a.structure);
    sc.seed = resolve_seed(a.seed);
    const SimulatedData data = generate(sc);
    const fs::path dir = ensure_dir(a.output_dir);
    write_long_csv(data.train, dir / "train.csv");
    write_long_csv(data.test, dir / "test.csv");
    auto os = open_out(dir / "truth.json");
    os << truth_to_json(data.truth, sc).dump(2) << '\n';
    out << "wrote " << to_string(sc.kind) << " (seed " << sc.seed << ", n=" << sc.n << ", p=" << sc.p
        << ") to " << dir.string() << '\n';
    return 0;
}

int cmd_bench(const BenchArgs& a, const CLI::App& sub, unsigned threads, bool verbose, std::ostream& out,
              std::ostream& err) {
    BenchConfig cfg = load_bench_config(a.config);
    if (!a.output.empty()) cfg.output = a.output;
    if (sub.count("--threads")) cfg.threads = threads;
    if (cfg.output.empty()) throw ArgumentError("no output path: set 'output' in the config or pass --output");
    if (verbose)
        err << "running " << cfg.replications << " replication(s) of " << to_string(cfg.scenario.kind) << " with "
            << cfg.methods.size() << " method(s)\n";
    const BenchResult res = run_benchmark(cfg);
    {
        auto os = open_out(cfg.output);
        write_bench_csv(res, cfg, os);
    }
    for (const auto& agg : res.aggregates)
        out << to_string(agg.method) << ": mse100=" << fmt(agg.mean.mse_scaled) << " mspe=" << fmt(agg.mean.mspe)
            << " f1=" << fmt(agg.mean.f1) << " (" << agg.count << " ok)\n";
    if (res.failures()) err << res.failures() << " replication row(s) failed; see the CSV comments\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparse Bayesian varying coefficient models for longitudinal data", "nvcssl"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    unsigned threads = default_threads();
    bool verbose = false;

    FitArgs fit;
    SSGLConfig cfg;
    double b_override = 0.0;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a long-format CSV");
    fit_cmd->add_option("--input,-i", fit.input, "Input CSV: subject,time,y,<covariates>")->required();
    fit_cmd->add_option("--output-dir,-o", fit.output_dir,
                        "Directory for model.json, curves.csv, fitted.csv and summary.txt");
    fit_cmd->add_option("--method", fit.method, "nvcssl, robustified, unstructured, glasso, gscad or gmcp");
    fit_cmd->add_option("--structure", fit.structure, "Correlation structure for nvcssl: ar1 or cs");
    fit_cmd->add_option("--d", fit.d, "Basis dimension, or a comma-separated grid tuned by AIC_c")->delimiter(',');
    fit_cmd->add_option("--xi", fit.xi, "Fractional power for robustified (0 tunes over --xi-grid)");
    fit_cmd->add_option("--working", fit.working, "Working covariance for robustified: eb or independence");
    fit_cmd->add_option("--t-min", fit.t_min, "Lower end of the basis range (default: smallest time)");
    fit_cmd->add_option("--t-max", fit.t_max, "Upper end of the basis range (default: largest time)");
    fit_cmd->add_option("--grid-points", fit.grid_points, "Points per curve in curves.csv");
    add_ssgl_options(fit_cmd, cfg, b_override);

    PredictArgs pred;
    auto* pred_cmd = app.add_subcommand("predict", "Predict responses for new rows from a saved model");
    pred_cmd->add_option("--model,-m", pred.model, "Model JSON written by fit")->required();
    pred_cmd->add_option("--input,-i", pred.input, "CSV with the model's covariate columns")->required();
    pred_cmd->add_option("--output,-o", pred.output, "Predictions CSV");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a simulation scenario");
    sim_cmd->add_option("--scenario", sim.scenario,
                        "s61, s62_toeplitz, c1_linear_constant, c2_dense_time, c3_correlated_design or "
                        "d2_hetero_mixture");
    sim_cmd->add_option("--seed", sim.seed, "Random seed (default: $NVCSSL_SEED, else 1)");
    sim_cmd->add_option("--n", sim.n, "Training subjects (0: scenario default)");
    sim_cmd->add_option("--p", sim.p, "Covariates (0: scenario default)");
    sim_cmd->add_option("--n-test", sim.n_test, "New subjects in test.csv");
    sim_cmd->add_option("--rho", sim.rho, "Error correlation");
    sim_cmd->add_option("--structure", sim.structure, "Error structure: ar1 or cs");
    sim_cmd->add_option("--output-dir,-o", sim.output_dir, "Directory for train.csv, test.csv and truth.json");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Run a simulation benchmark from a key = value config");
    bench_cmd->add_option("--config,-c", bench.config, "Benchmark config file")->required();
    bench_cmd->add_option("--output,-o", bench.output, "Results CSV (overrides the config's output)");

    for (auto* sub : {fit_cmd, bench_cmd})
        sub->add_option("--threads", threads, "Worker threads (results do not depend on this)");
    for (auto* sub : {fit_cmd, pred_cmd, sim_cmd, bench_cmd})
        sub->add_flag("--verbose,-v", verbose, "Progress messages on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        if (threads == 0) throw ArgumentError("--threads must be at least 1");
        if (*fit_cmd) return cmd_fit(fit, cfg, b_override, threads, verbose, out, err);
        if (*pred_cmd) return cmd_predict(pred, out);
        if (*sim_cmd) return cmd_simulate(sim, *sim_cmd, out);
        if (*bench_cmd) return cmd_bench(bench, *bench_cmd, threads, verbose, out, err);
    } catch (const NumericError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace nvcssl
