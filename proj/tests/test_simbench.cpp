#include <doctest.h>

#include <random>
#include <sstream>

#include "nvcssl/bench.hpp"
#include "nvcssl/errors.hpp"
#include "nvcssl/simulate.hpp"

using namespace nvcssl;

TEST_SUITE("simbench") {

TEST_CASE("selection counts") {
    const auto c = selection_counts({0, 1, 2, 3, 4, 9}, {0, 1, 2, 3, 4, 5});
    CHECK(c.tp == 5);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
    CHECK(c.f1 == doctest::Approx(5.0 / 6.0));
    const auto empty = selection_counts({}, {0, 1});
    CHECK(empty.f1 == 0.0);
    CHECK(empty.precision == 0.0);
    CHECK(selection_counts({0, 1}, {0, 1}).f1 == 1.0);
}

TEST_CASE("generation is deterministic in the seed") {
    Scenario sc = Scenario::defaults(ScenarioKind::S61);
    sc.n = 8;
    sc.p = 10;
    sc.n_test = 3;
    sc.seed = 77;
    const auto a = generate(sc);
    const auto b = generate(sc);
    CHECK(a.train.responses() == b.train.responses());
    CHECK(a.train.covariates() == b.train.covariates());
    CHECK(a.test.times() == b.test.times());
    sc.seed = 78;
    CHECK(generate(sc).train.responses().size() > 0);
    CHECK(generate(sc).train.responses() != a.train.responses());
}

TEST_CASE("generated data respect the scenario") {
    for (ScenarioKind k : {ScenarioKind::S61, ScenarioKind::S62Toeplitz, ScenarioKind::C1LinearConstant,
                           ScenarioKind::C2DenseTime, ScenarioKind::C3CorrelatedDesign,
                           ScenarioKind::D2HeteroMixture}) {
        Scenario sc = Scenario::defaults(k);
        sc.n = 6;
        sc.p = 8;
        sc.n_test = 2;
        const auto data = generate(sc);
        CHECK(data.train.num_subjects() == 6);
        CHECK(data.test.num_subjects() == 2);
        CHECK(data.train.num_covariates() == 8);
        CHECK(data.truth.active == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
        const auto [lo, hi] = data.train.time_range();
        CHECK(lo >= data.truth.t_min);
        CHECK(hi <= data.truth.t_max);
        REQUIRE(data.truth.error_blocks.size() == 6);
        for (std::size_t i = 0; i < 6; ++i) {
            const Matrix& B = data.truth.error_blocks[i];
            CHECK(static_cast<std::size_t>(B.rows()) == data.train.subject_size(i));
            CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(B).eigenvalues().minCoeff() > 0.0);
        }
        CHECK_FALSE(data.truth.formulas().empty());
    }
}

TEST_CASE("mixture scenario splits structures evenly") {
    Scenario sc = Scenario::defaults(ScenarioKind::D2HeteroMixture);
    sc.n = 1000;
    sc.p = 6;
    sc.n_test = 1;
    sc.seed = 5;
    const auto data = generate(sc);
    REQUIRE(data.truth.subject_structures.size() == 1000);
    const auto ar1 = std::count(data.truth.subject_structures.begin(), data.truth.subject_structures.end(),
                                Structure::AR1);
    CHECK(ar1 >= 450);
    CHECK(ar1 <= 550);
}

TEST_CASE("Toeplitz draws clear the eigenvalue floor") {
    std::mt19937_64 rng(3);
    for (std::size_t n : {2, 5, 8, 12, 20}) {
        bool shrunk = false;
        const Matrix R = draw_toeplitz_correlation(n, rng, &shrunk);
        CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(R).eigenvalues().minCoeff() > 0.01 - 1e-12);
        CHECK(R.diagonal().isOnes());
        CHECK((R - R.transpose()).norm() == 0.0);
        for (Eigen::Index i = 0; i + 1 < R.rows(); ++i)
            for (Eigen::Index j = 0; j + 1 < R.cols(); ++j) CHECK(R(i, j) == R(i + 1, j + 1));
    }
}

TEST_CASE("scenario validation") {
    Scenario sc;
    sc.p = 5;
    CHECK_THROWS_AS(sc.validate(), ArgumentError);
    sc = Scenario{};
    sc.rho = 1.0;
    CHECK_THROWS_AS(sc.validate(), ArgumentError);
    CHECK_THROWS_AS(parse_scenario("s99"), ArgumentError);
    CHECK(parse_scenario("s61") == ScenarioKind::S61);
    Scenario d = Scenario::defaults(ScenarioKind::S61);
    CHECK_FALSE(d.scaled());
    d.p = 100;
    CHECK(d.scaled());
}

TEST_CASE("config parsing") {
    std::istringstream in("# comment\nscenario = s61\nn = 12\np = 8\nmethods = glasso, gscad\nreplications = 2\n"
                          "d_grid = 4,5\ntiming = false\n");
    const auto c = parse_bench_config(in);
    CHECK(c.scenario.n == 12);
    CHECK(c.methods.size() == 2);
    CHECK(c.methods[1] == Method::GSCAD);
    CHECK(c.d_grid == std::vector<int>{4, 5});
    CHECK_FALSE(c.timing);
    std::istringstream unknown("bogus = 1\n");
    CHECK_THROWS_AS(parse_bench_config(unknown), ArgumentError);
    std::istringstream malformed("n 12\n");
    CHECK_THROWS_AS(parse_bench_config(malformed), ParseError);
    std::istringstream bad_d("d_grid = 3\n");
    CHECK_THROWS_AS(parse_bench_config(bad_d), ArgumentError);
}

TEST_CASE("benchmark output is reproducible and well formed") {
    std::istringstream in("scenario = s61\nn = 10\np = 8\nn_test = 4\nmethods = glasso\nreplications = 2\n"
                          "d_grid = 4,5\ntiming = false\nthreads = 2\n");
    auto cfg = parse_bench_config(in);
    std::ostringstream a, b;
    const auto ra = run_benchmark(cfg);
    write_bench_csv(ra, cfg, a);
    cfg.threads = 1;
    write_bench_csv(run_benchmark(cfg), cfg, b);
    CHECK(a.str() == b.str());
    CHECK(ra.failures() == 0);
    REQUIRE(ra.rows.size() == 2);
    CHECK(ra.rows[0].seed + 1 == ra.rows[1].seed);
    CHECK(a.str().find("scenario,method,rep,mse100,mspe,f1,tp,fp,fn,seconds") != std::string::npos);
    REQUIRE(ra.aggregates.size() == 1);
    CHECK(ra.aggregates[0].count == 2);
    CHECK(ra.aggregates[0].mean.mspe ==
          doctest::Approx((ra.rows[0].metrics.mspe + ra.rows[1].metrics.mspe) / 2));
}

TEST_CASE("scoring against the truth") {
    Scenario sc = Scenario::defaults(ScenarioKind::S61);
    sc.n = 10;
    sc.p = 8;
    sc.n_test = 3;
    const auto data = generate(sc);
    FitResult fit;
    fit.num_groups = 8;
    fit.basis = make_basis(data.truth.t_min, data.truth.t_max, 5);
    fit.gamma = Vector::Zero(40);
    fit.response_offset = 1.0;
    const auto m = score(fit, data.truth, data.train, data.test);
    // an all-zero fit: MSE is the mean squared true signal, MSPE includes the offset
    double sq = 0;
    for (Eigen::Index r = 0; r < data.train.times().size(); ++r)
        for (std::size_t k = 0; k < 6; ++k) sq += std::pow(data.truth.beta(k, data.train.times()(r)), 2);
    CHECK(m.mse_scaled == doctest::Approx(100 * sq / (data.train.times().size() * 8.0)));
    CHECK(m.mspe == doctest::Approx((data.test.responses().array() - 1.0).square().mean()));
    CHECK(m.fn == 6);
    CHECK(m.f1 == 0.0);
}

}  // TEST_SUITE
