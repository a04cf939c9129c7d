#include <doctest.h>

#include <random>

#include "nvcssl/baselines.hpp"
#include "nvcssl/errors.hpp"

using namespace nvcssl;

namespace {

struct Problem {
    Vector y;
    Matrix U;
};

Problem sparse_problem(std::uint64_t seed, int N = 60, int p = 6, int d = 3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Problem pr;
    pr.U.resize(N, p * d);
    for (auto& v : pr.U.reshaped()) v = z(rng);
    Vector g = Vector::Zero(p * d);
    g.segment(0, d).setConstant(2.0);
    g.segment(d, d).setConstant(-1.0);
    pr.y = pr.U * g;
    for (auto& v : pr.y) v += z(rng);
    return pr;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("lambda_max zeroes every group") {
    const auto pr = sparse_problem(1);
    const double lm = lambda_max(pr.y, pr.U, 3);
    PenaltySpec spec;
    spec.lambda_grid = {lm * (1 + 1e-9), lm * 0.9};
    const auto path = penalized_path(pr.y, pr.U, 3, spec);
    CHECK(path[0].gamma.norm() == 0.0);
    CHECK(path[1].selected > 0);
}

TEST_CASE("SCAD and MCP weight rules") {
    PenaltySpec s;
    s.kind = Penalty::GSCAD;
    const double l = 2.0;
    CHECK(penalty_derivative(s, l, 1.0) == l);
    CHECK(penalty_derivative(s, l, 3.0) == doctest::Approx((3.7 * 2 - 3) / 2.7));
    CHECK(penalty_derivative(s, l, 8.0) == 0.0);
    CHECK(penalty_value(s, l, 8.0) == doctest::Approx(0.5 * 4 * 4.7));
    // the pieces join continuously
    CHECK(penalty_value(s, l, l) == doctest::Approx(l * l));
    CHECK(penalty_value(s, l, 3.7 * l - 1e-12) == doctest::Approx(penalty_value(s, l, 3.7 * l)));
    PenaltySpec m;
    m.kind = Penalty::GMCP;
    CHECK(penalty_derivative(m, l, 1.5) == doctest::Approx(2.0 - 0.5));
    CHECK(penalty_derivative(m, l, 6.0) == 0.0);
    CHECK(penalty_value(m, l, 6.0) == doctest::Approx(6.0));
    PenaltySpec g;
    CHECK(penalty_derivative(g, l, 100.0) == l);
}

TEST_CASE("penalty derivative matches finite differences") {
    for (Penalty kind : {Penalty::GSCAD, Penalty::GMCP}) {
        PenaltySpec s;
        s.kind = kind;
        for (double t : {0.3, 1.1, 2.5, 4.0, 9.0}) {
            const double h = 1e-6;
            const double fd = (penalty_value(s, 1.0, t + h) - penalty_value(s, 1.0, t - h)) / (2 * h);
            CHECK(penalty_derivative(s, 1.0, t) == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("local linear approximation never increases the objective") {
    for (Penalty kind : {Penalty::GSCAD, Penalty::GMCP}) {
        const auto pr = sparse_problem(5);
        PenaltySpec spec;
        spec.kind = kind;
        spec.grid_size = 15;
        const auto path = penalized_path(pr.y, pr.U, 3, spec);
        for (const auto& pt : path) {
            for (std::size_t i = 1; i < pt.objective_trace.size(); ++i)
                CHECK(pt.objective_trace[i] <= pt.objective_trace[i - 1] + 1e-8);
            CHECK(pt.kkt <= 1e-6);
        }
    }
}

TEST_CASE("group lasso path is certified and recovers the support") {
    const auto pr = sparse_problem(9, 120);
    PenaltySpec spec;
    spec.grid_size = 20;
    const auto path = penalized_path(pr.y, pr.U, 3, spec);
    REQUIRE(path.size() == 20);
    for (std::size_t i = 1; i < path.size(); ++i) CHECK(path[i].lambda < path[i - 1].lambda);
    for (const auto& pt : path) CHECK(pt.kkt <= 1e-6);
    const auto best = std::min_element(path.begin(), path.end(),
                                       [](const auto& a, const auto& b) { return a.aicc < b.aicc; });
    CHECK(best->gamma.segment(0, 3).norm() > 0);
    CHECK(best->gamma.segment(3, 3).norm() > 0);
}

TEST_CASE("grid construction") {
    const auto g = log_spaced_grid(10.0, 5, 0.01);
    REQUIRE(g.size() == 5);
    CHECK(g.front() == doctest::Approx(10.0));
    CHECK(g.back() == doctest::Approx(0.1));
    CHECK(g[2] == doctest::Approx(1.0));
    CHECK_THROWS_AS(log_spaced_grid(0.0, 5, 0.01), ArgumentError);
    PenaltySpec s;
    s.lambda_grid = {1.0, 2.0};
    CHECK_THROWS_AS(s.validate(), ArgumentError);
    s = PenaltySpec{};
    s.scad_a = 2.0;
    CHECK_THROWS_AS(s.validate(), ArgumentError);
}

}  // TEST_SUITE
