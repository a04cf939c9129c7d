#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nvcssl/data.hpp"

namespace nvcssl {

// Per-block Gram matrices U_k' U_k with their eigendecompositions; lipschitz
// holds the largest eigenvalues. Callers that solve repeatedly on one design
// should build this once.
struct BlockGram {
    Vector lipschitz;
    std::vector<Matrix> gram;
    std::vector<Vector> eigenvalues;   // ascending
    std::vector<Matrix> eigenvectors;
};

BlockGram block_gram(const Matrix& U, Eigen::Index block_size);

/**
 * min_gamma 0.5 ||y - U gamma||^2 + sum_k w_k ||gamma_k||_2
 *
 * y and U are referenced, not copied; they must outlive the problem.
 */
struct GroupProblem {
    GroupProblem(const Vector& y, const Matrix& U, Eigen::Index block_size, Vector weights)
        : y(y), U(U), block_size(block_size), weights(std::move(weights)) {}

    Eigen::Ref<const Vector> y;
    Eigen::Ref<const Matrix> U;
    Eigen::Index block_size;
    Vector weights;
    Vector warm_start;             // empty: start at zero
    const BlockGram* cache = nullptr;  // optional, from block_gram
    double tol = 1e-6;
    int max_iter = 500;

    Eigen::Index num_blocks() const { return U.cols() / block_size; }
};

struct SolveResult {
    Vector gamma;
    Vector residual;  // y - U gamma
    double objective = 0.0;
    int iterations = 0;  // full sweeps
    bool converged = false;
};

// Cyclic block coordinate descent with group soft-thresholding. Throws
// NumericError on non-finite input and ArgumentError on inconsistent shapes
// or negative weights. Non-convergence is reported in the result.
SolveResult solve(const GroupProblem& problem);

double group_objective(const GroupProblem& problem, const Vector& gamma);

// Largest violation of the block optimality conditions.
double kkt_residual(const Vector& gamma, const GroupProblem& problem);

}  // namespace nvcssl
