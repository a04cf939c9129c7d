#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nvcssl/data.hpp"
#include "nvcssl/em.hpp"
#include "nvcssl/spline.hpp"

namespace nvcssl {

enum class Penalty { GLasso, GSCAD, GMCP };

const char* to_string(Penalty p);

struct PenaltySpec {
    Penalty kind = Penalty::GLasso;
    std::vector<double> lambda_grid;  // strictly decreasing; empty: log-spaced from lambda_max
    std::size_t grid_size = 50;
    double min_ratio = 0.01;
    double scad_a = 3.7;
    double mcp_gamma = 3.0;
    int lla_max_rounds = 10;
    double lla_tol = 1e-6;
    double tol = 1e-6;
    int max_iter = 500;
    double kkt_target = 1e-6;  // solves are tightened until this certificate holds

    void validate() const;
};

double penalty_value(const PenaltySpec& spec, double lambda, double t);
double penalty_derivative(const PenaltySpec& spec, double lambda, double t);

// max_k ||U_k' y||_2: the smallest lambda with an all-zero group lasso fit.
double lambda_max(const Vector& y, const Matrix& U, Eigen::Index block_size);
std::vector<double> log_spaced_grid(double hi, std::size_t count, double min_ratio);

struct PathPoint {
    double lambda = 0.0;
    Vector gamma;
    double rss = 0.0;
    std::size_t selected = 0;
    double aicc = 0.0;
    double kkt = 0.0;  // certificate of the last weighted subproblem
    int lla_rounds = 0;
    std::vector<double> objective_trace;  // nonconvex objective: warm start, then after each round
};

// Solution path down the lambda grid with warm starts.
std::vector<PathPoint> penalized_path(const Vector& y, const Matrix& U, Eigen::Index block_size,
                                      const PenaltySpec& spec);

// Best lambda by AIC_c at a fixed basis.
FitResult fit_penalized(const LongitudinalDataset& ds, const DesignExpansion& design, const PenaltySpec& spec);

// Best (lambda, d) by AIC_c.
FitResult fit_penalized(const LongitudinalDataset& ds, const PenaltySpec& spec, const std::vector<int>& d_grid,
                        double t_min, double t_max);

}  // namespace nvcssl
