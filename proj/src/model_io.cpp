#include "nvcssl/model_io.hpp"

#include <cmath>
#include <fstream>

#include "nvcssl/errors.hpp"

namespace nvcssl {

using nlohmann::json;

namespace {

// JSON has no NaN; missing values are written as null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double get_num(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return kNaN;
    return j.at(key).get<double>();
}

json matrix_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(row);
    }
    return rows;
}

Matrix matrix_from(const json& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Matrix M(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        if (rows[r].size() != rows.size()) throw ParseError("model covariance block is not square");
        for (Eigen::Index c = 0; c < n; ++c) M(r, c) = rows[r][c].get<double>();
    }
    return M;
}

json config_json(const SSGLConfig& c) {
    return json{{"lambda0_ladder", c.lambda0_ladder},
                {"lambda1", c.lambda1},
                {"a", c.a},
                {"b", c.b ? json(*c.b) : json("p")},
                {"c0", c.c0},
                {"d0", c.d0},
                {"rho_atoms", c.rho_atoms},
                {"xi_grid", c.xi_grid},
                {"em_tol", c.em_tol},
                {"em_max_iter", c.em_max_iter},
                {"bcd_tol", c.bcd_tol},
                {"bcd_max_iter", c.bcd_max_iter}};
}

SSGLConfig config_from(const json& j) {
    SSGLConfig c;
    c.lambda0_ladder = j.at("lambda0_ladder").get<std::vector<double>>();
    c.lambda1 = j.at("lambda1").get<double>();
    c.a = j.at("a").get<double>();
    if (j.at("b").is_number()) c.b = j.at("b").get<double>();
    c.c0 = j.at("c0").get<double>();
    c.d0 = j.at("d0").get<double>();
    c.rho_atoms = j.at("rho_atoms").get<std::vector<double>>();
    c.xi_grid = j.at("xi_grid").get<std::vector<double>>();
    c.em_tol = j.at("em_tol").get<double>();
    c.em_max_iter = j.at("em_max_iter").get<int>();
    c.bcd_tol = j.at("bcd_tol").get<double>();
    c.bcd_max_iter = j.at("bcd_max_iter").get<int>();
    return c;
}

}  // namespace

json model_to_json(const FitResult& fit) {
    json j;
    j["format_version"] = kModelFormatVersion;
    j["method"] = to_string(fit.method);
    j["structure"] = to_string(fit.structure);
    j["basis"] = {{"degree", fit.basis.degree},
                  {"dim", fit.basis.dim},
                  {"t_min", fit.basis.t_min},
                  {"t_max", fit.basis.t_max},
                  {"knots", fit.basis.knots}};
    j["variable_names"] = fit.variable_names;
    j["response_offset"] = fit.response_offset;
    json blocks = json::array();
    for (std::size_t k = 0; k < fit.num_groups; ++k) {
        const Vector b = fit.block(k);
        blocks.push_back(std::vector<double>(b.data(), b.data() + b.size()));
    }
    j["gamma"] = blocks;
    j["theta"] = num(fit.theta);
    j["sigma2"] = num(fit.sigma2);
    j["rho"] = num(fit.rho);
    if (!fit.sigma_blocks.empty()) {
        json sb = json::array();
        for (const auto& S : fit.sigma_blocks) sb.push_back(matrix_json(S));
        j["sigma_blocks"] = sb;
    }
    std::vector<std::string> sel_names;
    for (auto k : fit.selected)
        sel_names.push_back(k < fit.variable_names.size() ? fit.variable_names[k] : std::to_string(k + 1));
    j["selected"] = fit.selected;
    j["selected_names"] = sel_names;
    j["generalized_dim"] = fit.generalized_dim;
    j["omega"] = num(fit.omega);
    j["aicc"] = num(fit.aicc);
    j["final_logpost"] = num(fit.final_logpost);
    j["logpost_trace"] = fit.logpost_trace;
    j["converged"] = fit.converged;
    j["em_runs"] = fit.em_runs;
    j["max_logpost_drop"] = fit.max_logpost_drop;

    json path = json::array();
    for (const auto& r : fit.ladder_path) {
        json runs = json::array();
        for (const auto& run : r.runs)
            runs.push_back({{"rho", num(run.rho)},
                            {"iterations", run.iterations},
                            {"converged", run.converged},
                            {"final_logpost", run.final_logpost()}});
        path.push_back({{"lambda0", r.lambda0},
                        {"chosen", r.chosen},
                        {"theta", num(r.theta)},
                        {"sigma2", num(r.sigma2)},
                        {"rho", num(r.rho)},
                        {"selected_count", r.selected_count},
                        {"converged", r.converged},
                        {"runs", runs}});
    }
    j["ladder_path"] = path;
    if (fit.config) j["config"] = config_json(*fit.config);
    if (fit.xi) j["xi"] = *fit.xi;
    if (fit.working)
        j["working"] = {{"source", fit.working->source},
                        {"sigma2", num(fit.working->sigma2)},
                        {"rho", num(fit.working->rho)}};
    if (fit.penalty_lambda) j["penalty"] = {{"kind", to_string(fit.method)}, {"lambda", *fit.penalty_lambda}};
    return j;
}

FitResult model_from_json(const json& j) {
    try {
        if (j.at("format_version").get<int>() != kModelFormatVersion)
            throw ParseError("unsupported model format version " + j.at("format_version").dump());
        FitResult fit;
        fit.method = parse_method(j.at("method").get<std::string>());
        fit.structure = parse_structure(j.at("structure").get<std::string>());
        const auto& b = j.at("basis");
        fit.basis = make_basis(b.at("t_min").get<double>(), b.at("t_max").get<double>(), b.at("dim").get<int>(),
                               b.at("degree").get<int>());
        fit.variable_names = j.at("variable_names").get<std::vector<std::string>>();
        fit.response_offset = j.at("response_offset").get<double>();
        const auto& blocks = j.at("gamma");
        fit.num_groups = blocks.size();
        if (fit.num_groups != fit.variable_names.size())
            throw ParseError("model has " + std::to_string(fit.num_groups) + " coefficient blocks but " +
                             std::to_string(fit.variable_names.size()) + " variable names");
        fit.gamma.resize(static_cast<Eigen::Index>(fit.num_groups) * fit.basis.dim);
        for (std::size_t k = 0; k < fit.num_groups; ++k) {
            const auto v = blocks[k].get<std::vector<double>>();
            if (static_cast<int>(v.size()) != fit.basis.dim)
                throw ParseError("coefficient block " + std::to_string(k + 1) + " has the wrong length");
            for (int l = 0; l < fit.basis.dim; ++l)
                fit.gamma[static_cast<Eigen::Index>(k) * fit.basis.dim + l] = v[static_cast<std::size_t>(l)];
        }
        fit.theta = get_num(j, "theta");
        fit.sigma2 = get_num(j, "sigma2");
        fit.rho = get_num(j, "rho");
        if (j.contains("sigma_blocks"))
            for (const auto& S : j.at("sigma_blocks")) fit.sigma_blocks.push_back(matrix_from(S));
        fit.selected = j.at("selected").get<std::vector<std::size_t>>();
        fit.generalized_dim = j.at("generalized_dim").get<std::size_t>();
        fit.omega = get_num(j, "omega");
        fit.aicc = get_num(j, "aicc");
        fit.final_logpost = get_num(j, "final_logpost");
        fit.logpost_trace = j.value("logpost_trace", std::vector<double>{});
        fit.converged = j.value("converged", true);
        fit.em_runs = j.value("em_runs", std::size_t{0});
        fit.max_logpost_drop = j.value("max_logpost_drop", 0.0);
        for (const auto& r : j.at("ladder_path")) {
            RungSummary rung;
            rung.lambda0 = r.at("lambda0").get<double>();
            rung.chosen = r.at("chosen").get<std::size_t>();
            rung.theta = get_num(r, "theta");
            rung.sigma2 = get_num(r, "sigma2");
            rung.rho = get_num(r, "rho");
            rung.selected_count = r.at("selected_count").get<std::size_t>();
            rung.converged = r.at("converged").get<bool>();
            for (const auto& run : r.at("runs")) {
                EmRun e;
                e.rho = get_num(run, "rho");
                e.iterations = run.at("iterations").get<int>();
                e.converged = run.at("converged").get<bool>();
                e.logpost_trace = {run.at("final_logpost").get<double>()};
                rung.runs.push_back(std::move(e));
            }
            fit.ladder_path.push_back(std::move(rung));
        }
        if (j.contains("config")) fit.config = config_from(j.at("config"));
        if (j.contains("xi")) fit.xi = j.at("xi").get<double>();
        if (j.contains("working")) {
            WorkingCovariance w;
            w.source = j.at("working").at("source").get<std::string>();
            w.sigma2 = get_num(j.at("working"), "sigma2");
            w.rho = get_num(j.at("working"), "rho");
            fit.working = w;
        }
        if (j.contains("penalty")) fit.penalty_lambda = j.at("penalty").at("lambda").get<double>();
        return fit;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed model file: ") + e.what());
    } catch (const ArgumentError& e) {
        throw ParseError(std::string("malformed model file: ") + e.what());
    }
}

void save_model(const FitResult& fit, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write model file " + path.string());
    out << model_to_json(fit).dump(2) << '\n';
    if (!out) throw ValidationError("failed writing model file " + path.string());
}

FitResult load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("model file " + path.string() + " is not valid JSON: " + e.what());
    }
    return model_from_json(j);
}

json truth_to_json(const Truth& truth, const Scenario& sc) {
    json j;
    j["scenario"] = to_string(sc.kind);
    j["n"] = sc.n;
    j["p"] = sc.p;
    j["n_test"] = sc.n_test;
    j["seed"] = sc.seed;
    j["scaled"] = sc.scaled();
    j["rho"] = sc.rho;
    j["structure"] = to_string(sc.structure);
    j["sigma2"] = sc.sigma2;
    if (sc.kind == ScenarioKind::C3CorrelatedDesign) j["design_rho"] = sc.design_rho;
    j["time_domain"] = {truth.t_min, truth.t_max};
    std::vector<std::size_t> active1;
    for (auto k : truth.active) active1.push_back(k + 1);
    j["active"] = active1;
    j["functions"] = truth.formulas();
    j["errors"] = truth.error_description;
    if (sc.kind == ScenarioKind::D2HeteroMixture) {
        std::vector<std::string> kinds;
        for (auto s : truth.subject_structures) kinds.push_back(to_string(s));
        j["subject_structures"] = kinds;
    }
    if (sc.kind == ScenarioKind::S62Toeplitz) j["toeplitz_shrunk"] = truth.toeplitz_shrunk;
    return j;
}

}  // namespace nvcssl
