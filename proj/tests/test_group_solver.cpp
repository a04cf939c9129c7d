#include <doctest.h>

#include <random>

#include "nvcssl/errors.hpp"
#include "nvcssl/group_solver.hpp"
#include "oracles.hpp"

using namespace nvcssl;

namespace {

struct Instance {
    Vector y;
    Matrix U;
    Vector w;
    int d;
};

Instance random_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pd(1, 5), dd(1, 3), nd(5, 30);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> wu(0.0, 3.0);
    Instance in;
    const int p = pd(rng);
    in.d = dd(rng);
    const int N = nd(rng);
    in.U.resize(N, p * in.d);
    for (auto& v : in.U.reshaped()) v = z(rng);
    in.y.resize(N);
    for (auto& v : in.y) v = z(rng) * 2;
    in.w.resize(p);
    for (auto& v : in.w) v = wu(rng) * std::sqrt(double(N));
    return in;
}

}  // namespace

TEST_SUITE("group_solver") {

TEST_CASE("orthonormal design gives the group soft-threshold") {
    const Matrix U = Matrix::Identity(6, 6);
    Vector y(6);
    y << 3, 4, 0, 0.1, 0.2, -0.1;
    Vector w(3);
    w << 1, 1, 1;
    GroupProblem pr(y, U, 2, w);
    pr.tol = 1e-12;
    const auto r = solve(pr);
    CHECK(r.gamma(0) == doctest::Approx(3 * 0.8));
    CHECK(r.gamma(1) == doctest::Approx(4 * 0.8));
    CHECK(r.gamma.segment(2, 4).norm() == 0.0);
    CHECK(r.converged);
}

TEST_CASE("zero weights give least squares") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    Matrix U(20, 6);
    for (auto& v : U.reshaped()) v = z(rng);
    Vector y(20);
    for (auto& v : y) v = z(rng);
    GroupProblem pr(y, U, 3, Vector::Zero(2));
    pr.tol = 1e-12;
    const auto r = solve(pr);
    const Vector ls = U.colPivHouseholderQr().solve(y);
    CHECK((r.gamma - ls).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("zero response gives zero") {
    const Matrix U = Matrix::Random(10, 4);
    GroupProblem pr(Vector::Zero(10), U, 2, Vector::Ones(2));
    const auto r = solve(pr);
    CHECK(r.gamma.norm() == 0.0);
    CHECK(r.objective == 0.0);
}

TEST_CASE("weights above the gradient norm zero a group") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    Matrix U(15, 4);
    for (auto& v : U.reshaped()) v = z(rng);
    Vector y(15);
    for (auto& v : y) v = z(rng);
    const double big = (U.transpose() * y).norm() + 1.0;
    GroupProblem pr(y, U, 2, Vector::Constant(2, big));
    CHECK(solve(pr).gamma.norm() == 0.0);
}

TEST_CASE("matches a proximal-gradient oracle") {
    std::mt19937_64 rng(2024);
    for (int c = 0; c < 40; ++c) {
        const auto in = random_instance(rng);
        GroupProblem pr(in.y, in.U, in.d, in.w);
        pr.tol = 1e-10;
        pr.max_iter = 5000;
        const auto r = solve(pr);
        const Vector ref = oracle::group_lasso(in.y, in.U, in.d, in.w);
        const double fo = oracle::group_objective(in.y, in.U, in.d, in.w, ref);
        CHECK(r.objective <= fo + 1e-6);
        CHECK(kkt_residual(r.gamma, pr) <= 1e-6);
        CHECK(r.objective == doctest::Approx(group_objective(pr, r.gamma)));
        CHECK((in.y - in.U * r.gamma - r.residual).norm() < 1e-9);
    }
}

TEST_CASE("warm start and cache do not change the solution") {
    std::mt19937_64 rng(8);
    for (int c = 0; c < 10; ++c) {
        const auto in = random_instance(rng);
        GroupProblem cold(in.y, in.U, in.d, in.w);
        cold.tol = 1e-10;
        const auto a = solve(cold);
        const BlockGram gram = block_gram(in.U, in.d);
        GroupProblem warm(in.y, in.U, in.d, in.w * 1.1);
        warm.cache = &gram;
        warm.warm_start = a.gamma;
        warm.tol = 1e-10;
        GroupProblem fresh(in.y, in.U, in.d, in.w * 1.1);
        fresh.tol = 1e-10;
        CHECK(solve(warm).objective == doctest::Approx(solve(fresh).objective).epsilon(1e-8));
    }
}

TEST_CASE("rank deficient blocks") {
    Matrix U(6, 4);
    U.setZero();
    U.col(0).setOnes();
    U.col(1).setOnes();  // duplicate column
    U(0, 2) = 1;
    U(3, 3) = 2;
    Vector y(6);
    y << 1, 2, 3, 4, 5, 6;
    Vector w(2);
    w << 0.5, 0.5;
    GroupProblem pr(y, U, 2, w);
    pr.tol = 1e-10;
    const auto r = solve(pr);
    CHECK(kkt_residual(r.gamma, pr) < 1e-6);
    const Vector ref = oracle::group_lasso(y, U, 2, w);
    CHECK(r.objective <= oracle::group_objective(y, U, 2, w, ref) + 1e-6);
}

TEST_CASE("input checks") {
    const Matrix U = Matrix::Identity(4, 4);
    const Vector y = Vector::Ones(4);
    CHECK_THROWS_AS(solve(GroupProblem(y, U, 3, Vector::Ones(1))), ArgumentError);
    CHECK_THROWS_AS(solve(GroupProblem(y, U, 2, Vector::Ones(3))), ArgumentError);
    CHECK_THROWS_AS(solve(GroupProblem(y, U, 2, -Vector::Ones(2))), ArgumentError);
    Vector bad = y;
    bad(1) = std::nan("");
    CHECK_THROWS_AS(solve(GroupProblem(bad, U, 2, Vector::Ones(2))), NumericError);
}

}  // TEST_SUITE
