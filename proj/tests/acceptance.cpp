// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: nvcssl_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nvcssl/bench.hpp"
#include "nvcssl/correlation.hpp"
#include "nvcssl/group_solver.hpp"
#include "nvcssl/spline.hpp"
#include "oracles.hpp"

using namespace nvcssl;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

const BenchAggregate& agg(const BenchResult& r, Method m) {
    for (const auto& a : r.aggregates)
        if (a.method == m) return a;
    throw std::runtime_error(std::string("no aggregate for ") + to_string(m));
}

BenchConfig s61_config() {
    BenchConfig c;
    c.scenario = Scenario::defaults(ScenarioKind::S61);
    c.scenario.n = 50;
    c.scenario.p = 100;
    c.scenario.rho = 0.8;
    c.scenario.structure = Structure::AR1;
    c.methods = {Method::NVCSSL, Method::GLasso};
    c.replications = 20;
    c.base_seed = 1;
    c.d_grid = {4, 5, 6, 7, 8, 9, 10, 11, 12};
    c.timing = false;
    c.threads = 2;
    return c;
}

// Shared between criteria 1-4 and 9.
std::map<int, BenchResult> results;
std::string c1_csv;

std::string csv_of(const BenchResult& r, const BenchConfig& c) {
    std::ostringstream os;
    write_bench_csv(r, c, os);
    return os.str();
}

Outcome criterion1() {
    const auto cfg = s61_config();
    results[1] = run_benchmark(cfg);
    c1_csv = csv_of(results[1], cfg);
    const auto& r = results[1];
    const auto& nv = agg(r, Method::NVCSSL);
    const auto& gl = agg(r, Method::GLasso);
    Outcome o;
    o.pass = r.failures() == 0 && nv.mean.mse_scaled < gl.mean.mse_scaled && nv.mean.mspe < gl.mean.mspe &&
             nv.mean.f1 >= 0.85;
    o.detail = "nvcssl mse100=" + num(nv.mean.mse_scaled) + " mspe=" + num(nv.mean.mspe) + " f1=" + num(nv.mean.f1) +
               " | glasso mse100=" + num(gl.mean.mse_scaled) + " mspe=" + num(gl.mean.mspe) +
               " | failures=" + std::to_string(r.failures());
    return o;
}

Outcome criterion2() {
    BenchConfig cfg;
    cfg.scenario = Scenario::defaults(ScenarioKind::S62Toeplitz);
    cfg.scenario.n = 50;
    cfg.scenario.p = 100;
    cfg.methods = {Method::Robustified, Method::GLasso};
    cfg.replications = 20;
    cfg.timing = false;
    results[2] = run_benchmark(cfg);
    const auto& r = results[2];
    const auto& rb = agg(r, Method::Robustified);
    const auto& gl = agg(r, Method::GLasso);
    Outcome o;
    o.pass = r.failures() == 0 && rb.mean.mspe < gl.mean.mspe && rb.mean.f1 >= 0.85;
    o.detail = "robustified mspe=" + num(rb.mean.mspe) + " f1=" + num(rb.mean.f1) + " | glasso mspe=" +
               num(gl.mean.mspe) + " | failures=" + std::to_string(r.failures());
    return o;
}

Outcome criterion3() {
    BenchConfig cfg;
    cfg.scenario = Scenario::defaults(ScenarioKind::D2HeteroMixture);
    cfg.scenario.n = 30;
    cfg.scenario.p = 50;
    cfg.methods = {Method::Unstructured, Method::Robustified};
    cfg.replications = 10;
    cfg.timing = false;
    results[3] = run_benchmark(cfg);
    const auto& r = results[3];
    const auto& un = agg(r, Method::Unstructured);
    const auto& rb = agg(r, Method::Robustified);
    Outcome o;
    o.pass = r.failures() == 0 && un.mean.mspe > rb.mean.mspe;
    o.detail = "unstructured mspe=" + num(un.mean.mspe) + " | robustified mspe=" + num(rb.mean.mspe) +
               " | failures=" + std::to_string(r.failures());
    return o;
}

Outcome criterion4() {
    Outcome o;
    double worst = 0.0;
    std::size_t runs = 0;
    for (int c : {1, 2, 3}) {
        if (!results.count(c)) {
            o.detail = "criterion " + std::to_string(c) + " was not run";
            return o;
        }
        worst = std::max(worst, results[c].max_logpost_drop());
        for (const auto& row : results[c].rows) runs += row.em_runs;
    }
    o.pass = worst <= 1e-8;
    o.detail = "largest log-posterior decrease " + num(worst) + " over " + std::to_string(runs) + " EM runs";
    return o;
}

Outcome criterion5() {
    std::mt19937_64 rng(20240501);
    std::uniform_real_distribution<double> gap(0.2, 2.0);
    std::uniform_int_distribution<int> len(1, 20);
    double worst_inv = 0.0, worst_ld = 0.0;
    for (int c = 0; c < 1000; ++c) {
        const Structure st = c % 2 ? Structure::CS : Structure::AR1;
        const double rho = 0.1 * ((c / 2) % 10);
        const int n = len(rng);
        Vector t(n);
        double s = 0;
        for (int j = 0; j < n; ++j) t(j) = s += gap(rng);
        const Matrix R = st == Structure::AR1 ? oracle::ar1(t, rho) : oracle::cs(n, rho);
        const auto il = closed_form_inverse_logdet(st, t, rho);
        worst_inv = std::max(worst_inv, (il.inverse - oracle::inverse(R)).cwiseAbs().maxCoeff());
        worst_ld = std::max(worst_ld, std::abs(il.logdet - oracle::logdet_spd(R)));
    }
    Outcome o;
    o.pass = worst_inv <= 1e-9 && worst_ld <= 1e-9;
    o.detail = "1000 cases, max inverse error " + num(worst_inv) + ", max logdet error " + num(worst_ld);
    return o;
}

Outcome criterion6() {
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<int> pd(1, 5), dd(1, 3), nd(5, 30);
    std::uniform_real_distribution<double> wu(0.0, 3.0);
    std::normal_distribution<double> z;
    double worst_kkt = 0.0, worst_gap = 0.0;
    for (int c = 0; c < 200; ++c) {
        const int p = pd(rng), d = dd(rng), N = nd(rng);
        Matrix U(N, p * d);
        for (auto& v : U.reshaped()) v = z(rng);
        Vector y(N);
        for (auto& v : y) v = 2 * z(rng);
        Vector w(p);
        for (auto& v : w) v = wu(rng) * std::sqrt(double(N));
        GroupProblem pr(y, U, d, w);
        pr.tol = 1e-10;
        pr.max_iter = 10000;
        const auto res = solve(pr);
        const Vector ref = oracle::group_lasso(y, U, d, w);
        worst_kkt = std::max(worst_kkt, kkt_residual(res.gamma, pr));
        worst_gap = std::max(worst_gap, std::abs(res.objective - oracle::group_objective(y, U, d, w, ref)));
    }
    Outcome o;
    o.pass = worst_kkt <= 1e-6 && worst_gap <= 1e-6;
    o.detail = "200 problems, max KKT residual " + num(worst_kkt) + ", max objective gap " + num(worst_gap);
    return o;
}

Outcome criterion7() {
    double worst_sum = 0.0, worst_ref = 0.0, worst_end = 0.0;
    double min_value = 0.0;
    for (int d = 4; d <= 12; ++d) {
        const auto b = make_basis(0.25, 20.0, d);
        const Vector grid = basis_grid(b, 1000);
        for (Eigen::Index i = 0; i < grid.size(); ++i) {
            const Vector v = eval_basis(b, grid(i));
            worst_sum = std::max(worst_sum, std::abs(v.sum() - 1.0));
            min_value = std::min(min_value, v.minCoeff());
            worst_ref = std::max(worst_ref, (v - oracle::basis_row(0.25, 20.0, d, 3, grid(i))).cwiseAbs().maxCoeff());
        }
        const Vector lo = eval_basis(b, 0.25), hi = eval_basis(b, 20.0);
        worst_end = std::max({worst_end, std::abs(lo(0) - 1.0), std::abs(hi(d - 1) - 1.0),
                              lo.tail(d - 1).cwiseAbs().maxCoeff(), hi.head(d - 1).cwiseAbs().maxCoeff()});
    }
    Outcome o;
    o.pass = worst_sum <= 1e-12 && worst_ref <= 1e-12 && worst_end <= 1e-12 && min_value >= 0.0;
    o.detail = "d=4..12, unity error " + num(worst_sum) + ", recursion error " + num(worst_ref) + ", endpoint error " +
               num(worst_end) + ", min value " + num(min_value);
    return o;
}

Outcome criterion8() {
    BenchConfig cfg;
    cfg.scenario = Scenario::defaults(ScenarioKind::S61);
    cfg.scenario.p = 50;
    cfg.d_grid = {8};
    cfg.timing = false;
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const auto m = v.size() / 2;
        return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    };
    std::map<std::size_t, std::vector<double>> mse;
    std::size_t failed = 0;
    for (std::size_t n : {30, 100}) {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            Scenario sc = cfg.scenario;
            sc.n = n;
            sc.seed = seed;
            const auto row = run_replication_method(cfg, generate(sc), Method::NVCSSL);
            if (!row.error.empty()) {
                ++failed;
                continue;
            }
            mse[n].push_back(row.metrics.mse_scaled);
        }
    }
    Outcome o;
    if (failed || mse[30].empty() || mse[100].empty()) {
        o.detail = std::to_string(failed) + " fits failed";
        return o;
    }
    const double m30 = median(mse[30]), m100 = median(mse[100]);
    o.pass = m100 < m30;
    o.detail = "median mse100 at n=30: " + num(m30) + ", at n=100: " + num(m100);
    return o;
}

Outcome criterion9() {
    auto cfg = s61_config();
    cfg.threads = 1;
    if (c1_csv.empty()) {
        auto first = s61_config();
        c1_csv = csv_of(run_benchmark(first), first);
    }
    const std::string again = csv_of(run_benchmark(cfg), cfg);
    Outcome o;
    o.pass = again == c1_csv;
    o.detail = o.pass ? "rerun with 1 worker is byte-identical (" + std::to_string(again.size()) + " bytes)"
                      : "rerun differs";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
        {"S61 AR(1): NVC-SSL beats group lasso on MSE and MSPE, F1 >= 0.85", criterion1},
        {"Toeplitz errors: robustified beats group lasso on MSPE, F1 >= 0.85", criterion2},
        {"mixed errors: unstructured MSPE exceeds robustified MSPE", criterion3},
        {"log posterior never decreases (tolerance 1e-8)", criterion4},
        {"closed-form inverse and log determinant match dense oracle", criterion5},
        {"group solver KKT and objective against oracle", criterion6},
        {"B-spline partition of unity, endpoints, recursion", criterion7},
        {"estimation error falls from n=30 to n=100", criterion8},
        {"benchmark CSV is reproducible across worker counts", criterion9},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));
    if (wanted.count(4)) wanted.insert({1, 2, 3});

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!wanted.empty() && !wanted.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << criteria[i].first << " -- "
                  << o.detail << " (" << num(secs) << " s)" << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed"))
              << std::endl;
    return failed ? 1 : 0;
}
