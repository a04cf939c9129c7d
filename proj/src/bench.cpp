#include "nvcssl/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "nvcssl/errors.hpp"
#include "nvcssl/parallel.hpp"

namespace nvcssl {

SelectionCounts selection_counts(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& truth) {
    const std::set<std::size_t> sel(selected.begin(), selected.end()), tru(truth.begin(), truth.end());
    SelectionCounts c;
    for (auto k : sel) (tru.count(k) ? c.tp : c.fp)++;
    for (auto k : tru)
        if (!sel.count(k)) ++c.fn;
    const double tp = static_cast<double>(c.tp);
    c.precision = c.tp + c.fp > 0 ? tp / static_cast<double>(c.tp + c.fp) : 0.0;
    c.recall = c.tp + c.fn > 0 ? tp / static_cast<double>(c.tp + c.fn) : 0.0;
    c.f1 = c.precision + c.recall > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    return c;
}

MetricsReport score(const FitResult& fit, const Truth& truth, const LongitudinalDataset& train,
                    const LongitudinalDataset& test) {
    if (fit.num_groups != truth.p || train.num_covariates() != truth.p || test.num_covariates() != truth.p)
        throw ArgumentError("fit, truth and data disagree on the number of covariates");
    MetricsReport m;

    std::set<std::size_t> groups(truth.active.begin(), truth.active.end());
    groups.insert(fit.selected.begin(), fit.selected.end());
    double sq = 0.0;
    const Vector& t = train.times();
    for (Eigen::Index r = 0; r < t.size(); ++r) {
        const LocalBasis b = eval_basis_local(fit.basis, t[r]);
        for (std::size_t k : groups) {
            double est = 0.0;
            const Eigen::Index off = static_cast<Eigen::Index>(k) * fit.basis.dim + b.first;
            for (std::size_t j = 0; j < b.values.size(); ++j)
                est += fit.gamma[off + static_cast<Eigen::Index>(j)] * b.values[j];
            const double diff = est - truth.beta(k, t[r]);
            sq += diff * diff;
        }
    }
    m.mse_scaled = 100.0 * sq / (static_cast<double>(t.size()) * static_cast<double>(truth.p));

    const Vector pred = predict(fit, test);
    m.mspe = (test.responses() - pred).squaredNorm() / static_cast<double>(test.num_observations());

    const SelectionCounts c = selection_counts(fit.selected, truth.active);
    m.tp = c.tp;
    m.fp = c.fp;
    m.fn = c.fn;
    m.precision = c.precision;
    m.recall = c.recall;
    m.f1 = c.f1;
    return m;
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const char* b = v.data();
    const char* e = v.data() + v.size();
    if (b != e && *b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || ptr != e) throw ArgumentError("invalid value '" + v + "' for '" + key + "'");
    return out;
}

template <class T>
std::vector<T> parse_numbers(const std::string& key, const std::string& v) {
    std::vector<T> out;
    for (const auto& item : split_list(v)) out.push_back(parse_number<T>(key, item));
    if (out.empty()) throw ArgumentError("'" + key + "' needs at least one value");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ArgumentError("invalid boolean '" + v + "' for '" + key + "'");
}

template <class T>
std::string join(const std::vector<T>& xs) {
    std::ostringstream os;
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
    return os.str();
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

}  // namespace

std::vector<std::string> BenchConfig::echo() const {
    std::vector<std::string> lines;
    auto add = [&](const std::string& k, const std::string& v) { lines.push_back(k + " = " + v); };
    std::vector<std::string> names;
    for (Method m : methods) names.push_back(to_string(m));
    add("scenario", to_string(scenario.kind));
    add("n", std::to_string(scenario.n));
    add("p", std::to_string(scenario.p));
    add("rho", fmt(scenario.rho));
    add("structure", to_string(scenario.structure));
    add("n_test", std::to_string(scenario.n_test));
    add("sigma2", fmt(scenario.sigma2));
    add("design_rho", fmt(scenario.design_rho));
    add("methods", join(names));
    add("replications", std::to_string(replications));
    add("base_seed", std::to_string(base_seed));
    add("d_grid", join(d_grid));
    add("robust_d_grid", join(robust_d_grid));
    add("nvcssl_structure", to_string(nvcssl_structure.value_or(scenario.structure)));
    add("ladder", join(ssgl.lambda0_ladder));
    add("lambda1", fmt(ssgl.lambda1));
    add("a", fmt(ssgl.a));
    add("b", ssgl.b ? fmt(*ssgl.b) : std::string("p"));
    add("c0", fmt(ssgl.c0));
    add("d0", fmt(ssgl.d0));
    add("atoms", join(ssgl.rho_atoms));
    add("xi_grid", join(ssgl.xi_grid));
    add("em_tol", fmt(ssgl.em_tol));
    add("em_max_iter", std::to_string(ssgl.em_max_iter));
    add("bcd_tol", fmt(ssgl.bcd_tol));
    add("bcd_max_iter", std::to_string(ssgl.bcd_max_iter));
    add("timing", timing ? "true" : "false");
    add("known_domain", known_domain ? "true" : "false");
    if (!output.empty()) add("output", output);
    if (scenario.scaled()) add("scaled", "true");
    return lines;
}

BenchConfig parse_bench_config(std::istream& in, const std::string& source) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(source + ":" + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw ParseError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }

    BenchConfig c;
    // The scenario kind sets the defaults the remaining keys override.
    if (auto it = kv.find("scenario"); it != kv.end()) {
        c.scenario = Scenario::defaults(parse_scenario(it->second));
        kv.erase(it);
    }
    for (const auto& [key, v] : kv) {
        if (key == "n") c.scenario.n = parse_number<std::size_t>(key, v);
        else if (key == "p") c.scenario.p = parse_number<std::size_t>(key, v);
        else if (key == "rho") c.scenario.rho = parse_number<double>(key, v);
        else if (key == "structure") c.scenario.structure = parse_structure(v);
        else if (key == "n_test") c.scenario.n_test = parse_number<std::size_t>(key, v);
        else if (key == "sigma2") c.scenario.sigma2 = parse_number<double>(key, v);
        else if (key == "design_rho") c.scenario.design_rho = parse_number<double>(key, v);
        else if (key == "methods") {
            c.methods.clear();
            for (const auto& m : split_list(v)) c.methods.push_back(parse_method(m));
        } else if (key == "replications") c.replications = parse_number<std::size_t>(key, v);
        else if (key == "base_seed" || key == "seed") c.base_seed = parse_number<std::uint64_t>(key, v);
        else if (key == "d_grid") c.d_grid = parse_numbers<int>(key, v);
        else if (key == "robust_d_grid") c.robust_d_grid = parse_numbers<int>(key, v);
        else if (key == "nvcssl_structure") c.nvcssl_structure = parse_structure(v);
        else if (key == "ladder") c.ssgl.lambda0_ladder = parse_numbers<double>(key, v);
        else if (key == "lambda1") c.ssgl.lambda1 = parse_number<double>(key, v);
        else if (key == "a") c.ssgl.a = parse_number<double>(key, v);
        else if (key == "b") {
            if (v != "p") c.ssgl.b = parse_number<double>(key, v);
        } else if (key == "c0") c.ssgl.c0 = parse_number<double>(key, v);
        else if (key == "d0") c.ssgl.d0 = parse_number<double>(key, v);
        else if (key == "atoms") c.ssgl.rho_atoms = parse_numbers<double>(key, v);
        else if (key == "xi_grid") c.ssgl.xi_grid = parse_numbers<double>(key, v);
        else if (key == "em_tol") c.ssgl.em_tol = parse_number<double>(key, v);
        else if (key == "em_max_iter") c.ssgl.em_max_iter = parse_number<int>(key, v);
        else if (key == "bcd_tol") c.ssgl.bcd_tol = parse_number<double>(key, v);
        else if (key == "bcd_max_iter") c.ssgl.bcd_max_iter = parse_number<int>(key, v);
        else if (key == "threads") c.threads = parse_number<unsigned>(key, v);
        else if (key == "output") c.output = v;
        else if (key == "timing") c.timing = parse_bool(key, v);
        else if (key == "known_domain") c.known_domain = parse_bool(key, v);
        else if (key == "scaled") parse_bool(key, v);  // informational, echoed by earlier runs
        else throw ArgumentError(source + ": unknown key '" + key + "'");
    }
    c.scenario.validate();
    c.ssgl.validate();
    if (c.methods.empty()) throw ArgumentError("no methods given");
    if (c.replications < 1) throw ArgumentError("replications must be at least 1");
    for (int d : c.d_grid)
        if (d < 4) throw ArgumentError("basis dimensions must be at least 4 for cubic splines");
    for (int d : c.robust_d_grid)
        if (d < 4) throw ArgumentError("basis dimensions must be at least 4 for cubic splines");
    if (c.threads == 0) c.threads = default_threads();
    return c;
}

BenchConfig load_bench_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    return parse_bench_config(in, path);
}

BenchRow run_replication_method(const BenchConfig& config, const SimulatedData& data, Method method) {
    BenchRow row;
    row.method = method;
    try {
        const LongitudinalDataset train = center_response(data.train);
        MethodOptions opt;
        opt.ssgl = config.ssgl;
        opt.ssgl.threads = 1;
        opt.structure = config.nvcssl_structure.value_or(config.scenario.structure);
        const bool robust = method == Method::Robustified || method == Method::Unstructured;
        opt.d_grid = robust ? config.robust_d_grid : config.d_grid;
        if (config.known_domain) {
            opt.t_min = data.truth.t_min;
            opt.t_max = data.truth.t_max;
        }
        const auto start = std::chrono::steady_clock::now();
        const FitResult fit = fit_method(method, train, opt);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        row.metrics = score(fit, data.truth, train, data.test);
        row.metrics.runtime_seconds = config.timing ? secs : 0.0;
        row.d = fit.basis.dim;
        row.max_logpost_drop = fit.max_logpost_drop;
        row.em_runs = fit.em_runs;
        row.converged = fit.converged;
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

BenchResult run_benchmark(const BenchConfig& config) {
    const std::size_t M = config.methods.size();
    BenchResult res;
    res.rows.resize(config.replications * M);
    parallel_for(config.replications, config.threads, [&](std::size_t rep) {
        Scenario sc = config.scenario;
        sc.seed = config.base_seed + rep;
        SimulatedData data;
        std::string gen_error;
        try {
            data = generate(sc);
        } catch (const std::exception& e) {
            gen_error = std::string("generation failed: ") + e.what();
        }
        for (std::size_t m = 0; m < M; ++m) {
            BenchRow row;
            if (gen_error.empty()) {
                row = run_replication_method(config, data, config.methods[m]);
            } else {
                row.method = config.methods[m];
                row.error = gen_error;
            }
            row.rep = rep;
            row.seed = sc.seed;
            res.rows[rep * M + m] = std::move(row);
        }
    });

    for (Method method : config.methods) {
        BenchAggregate agg;
        agg.method = method;
        std::vector<const MetricsReport*> ok;
        for (const auto& r : res.rows)
            if (r.method == method && r.error.empty()) ok.push_back(&r.metrics);
        agg.count = ok.size();
        auto stat = [&](auto field, double& mean, double& sd) {
            if (ok.empty()) return;
            double s = 0.0;
            for (auto* m : ok) s += field(*m);
            mean = s / static_cast<double>(ok.size());
            double v = 0.0;
            for (auto* m : ok) v += (field(*m) - mean) * (field(*m) - mean);
            sd = ok.size() > 1 ? std::sqrt(v / static_cast<double>(ok.size() - 1)) : 0.0;
        };
        stat([](const MetricsReport& m) { return m.mse_scaled; }, agg.mean.mse_scaled, agg.sd.mse_scaled);
        stat([](const MetricsReport& m) { return m.mspe; }, agg.mean.mspe, agg.sd.mspe);
        stat([](const MetricsReport& m) { return m.f1; }, agg.mean.f1, agg.sd.f1);
        stat([](const MetricsReport& m) { return m.precision; }, agg.mean.precision, agg.sd.precision);
        stat([](const MetricsReport& m) { return m.recall; }, agg.mean.recall, agg.sd.recall);
        stat([](const MetricsReport& m) { return m.runtime_seconds; }, agg.mean.runtime_seconds,
             agg.sd.runtime_seconds);
        double tp = 0, fp = 0, fn = 0;
        for (auto* m : ok) {
            tp += static_cast<double>(m->tp);
            fp += static_cast<double>(m->fp);
            fn += static_cast<double>(m->fn);
        }
        if (!ok.empty()) {
            const double n = static_cast<double>(ok.size());
            agg.mean_tp = tp / n;
            agg.mean_fp = fp / n;
            agg.mean_fn = fn / n;
        }
        res.aggregates.push_back(agg);
    }
    return res;
}

double BenchResult::max_logpost_drop() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.max_logpost_drop);
    return m;
}

std::size_t BenchResult::failures() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const BenchRow& r) {
        return !r.error.empty();
    }));
}

void write_bench_csv(const BenchResult& result, const BenchConfig& config, std::ostream& out) {
    const std::string sc = to_string(config.scenario.kind);
    for (const auto& line : config.echo()) out << "# " << line << '\n';
    out << "scenario,method,rep,mse100,mspe,f1,tp,fp,fn,seconds\n";
    for (const auto& r : result.rows) {
        const auto& m = r.metrics;
        out << sc << ',' << to_string(r.method) << ',' << r.rep << ',' << fmt(m.mse_scaled) << ',' << fmt(m.mspe)
            << ',' << fmt(m.f1) << ',';
        if (r.error.empty())
            out << m.tp << ',' << m.fp << ',' << m.fn;
        else
            out << "nan,nan,nan";
        out << ',' << fmt(m.runtime_seconds) << '\n';
    }
    for (const auto& a : result.aggregates) {
        const auto& m = a.mean;
        out << sc << ',' << to_string(a.method) << ",mean," << fmt(m.mse_scaled) << ',' << fmt(m.mspe) << ','
            << fmt(m.f1) << ',' << fmt(a.mean_tp) << ',' << fmt(a.mean_fp) << ',' << fmt(a.mean_fn) << ','
            << fmt(m.runtime_seconds) << '\n';
    }
    for (const auto& a : result.aggregates) {
        const auto& s = a.sd;
        out << "# sd " << to_string(a.method) << ": n_ok=" << a.count << " mse100=" << fmt(s.mse_scaled)
            << " mspe=" << fmt(s.mspe) << " f1=" << fmt(s.f1) << " seconds=" << fmt(s.runtime_seconds) << '\n';
    }
    for (const auto& r : result.rows) {
        if (!r.error.empty())
            out << "# error rep=" << r.rep << " method=" << to_string(r.method) << ": " << r.error << '\n';
        else if (!r.converged)
            out << "# warning rep=" << r.rep << " method=" << to_string(r.method)
                << ": at least one EM run hit the iteration limit\n";
    }
}

}  // namespace nvcssl
