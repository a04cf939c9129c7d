#include "nvcssl/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "nvcssl/errors.hpp"
#include "nvcssl/group_solver.hpp"

namespace nvcssl {

const char* to_string(Penalty p) {
    switch (p) {
        case Penalty::GLasso: return "glasso";
        case Penalty::GSCAD: return "gscad";
        case Penalty::GMCP: return "gmcp";
    }
    return "?";
}

void PenaltySpec::validate() const {
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] > 0.0) || !std::isfinite(lambda_grid[i]))
            throw ArgumentError("lambda grid values must be positive");
        if (i > 0 && !(lambda_grid[i] < lambda_grid[i - 1]))
            throw ArgumentError("lambda grid must be strictly decreasing");
    }
    if (lambda_grid.empty() && grid_size == 0) throw ArgumentError("lambda grid is empty");
    if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw ArgumentError("lambda grid ratio must lie in (0, 1)");
    if (!(scad_a > 2.0)) throw ArgumentError("SCAD parameter a must exceed 2");
    if (!(mcp_gamma > 1.0)) throw ArgumentError("MCP parameter gamma must exceed 1");
    if (lla_max_rounds < 1) throw ArgumentError("at least one LLA round is required");
    if (!(tol > 0.0) || max_iter < 1) throw ArgumentError("solver tolerance and iteration limit must be positive");
}

double penalty_value(const PenaltySpec& spec, double lambda, double t) {
    switch (spec.kind) {
        case Penalty::GLasso:
            return lambda * t;
        case Penalty::GSCAD: {
            const double a = spec.scad_a;
            if (t <= lambda) return lambda * t;
            if (t <= a * lambda) return (2.0 * a * lambda * t - t * t - lambda * lambda) / (2.0 * (a - 1.0));
            return 0.5 * lambda * lambda * (a + 1.0);
        }
        case Penalty::GMCP: {
            const double g = spec.mcp_gamma;
            if (t <= g * lambda) return lambda * t - t * t / (2.0 * g);
            return 0.5 * g * lambda * lambda;
        }
    }
    return 0.0;
}

double penalty_derivative(const PenaltySpec& spec, double lambda, double t) {
    switch (spec.kind) {
        case Penalty::GLasso:
            return lambda;
        case Penalty::GSCAD: {
            const double a = spec.scad_a;
            if (t <= lambda) return lambda;
            if (t <= a * lambda) return (a * lambda - t) / (a - 1.0);
            return 0.0;
        }
        case Penalty::GMCP:
            return t <= spec.mcp_gamma * lambda ? lambda - t / spec.mcp_gamma : 0.0;
    }
    return 0.0;
}

double lambda_max(const Vector& y, const Matrix& U, Eigen::Index block_size) {
    const Vector g = U.transpose() * y;
    double m = 0.0;
    for (Eigen::Index k = 0; k < g.size() / block_size; ++k)
        m = std::max(m, g.segment(k * block_size, block_size).norm());
    return m;
}

std::vector<double> log_spaced_grid(double hi, std::size_t count, double min_ratio) {
    if (count == 0) throw ArgumentError("lambda grid is empty");
    if (!(hi > 0.0)) throw ArgumentError("lambda_max is zero; the response is orthogonal to every group");
    std::vector<double> grid(count);
    if (count == 1) {
        grid[0] = hi;
        return grid;
    }
    const double step = std::log(min_ratio) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) grid[i] = hi * std::exp(step * static_cast<double>(i));
    return grid;
}

namespace {

double nonconvex_objective(const PenaltySpec& spec, double lambda, const Vector& r, const Vector& gamma,
                           Eigen::Index d) {
    double pen = 0.0;
    for (Eigen::Index k = 0; k < gamma.size() / d; ++k)
        pen += penalty_value(spec, lambda, gamma.segment(k * d, d).norm());
    return 0.5 * r.squaredNorm() + pen;
}

// Solves, then tightens the tolerance until the KKT certificate holds or the
// tolerance bottoms out.
SolveResult certified_solve(GroupProblem& pr, double kkt_target, double* kkt_out) {
    SolveResult res = solve(pr);
    double kkt = kkt_residual(res.gamma, pr);
    const double base_tol = pr.tol;
    while (kkt > kkt_target && pr.tol > 1e-13) {
        pr.tol *= 1e-2;
        pr.warm_start = res.gamma;
        res = solve(pr);
        kkt = kkt_residual(res.gamma, pr);
    }
    pr.tol = base_tol;
    *kkt_out = kkt;
    return res;
}

std::size_t count_nonzero_groups(const Vector& gamma, Eigen::Index d) {
    std::size_t s = 0;
    for (Eigen::Index k = 0; k < gamma.size() / d; ++k)
        if (gamma.segment(k * d, d).squaredNorm() > 0.0) ++s;
    return s;
}

}  // namespace

std::vector<PathPoint> penalized_path(const Vector& y, const Matrix& U, Eigen::Index d, const PenaltySpec& spec) {
    spec.validate();
    const Eigen::Index p = U.cols() / d;
    const std::vector<double> grid =
        spec.lambda_grid.empty() ? log_spaced_grid(lambda_max(y, U, d), spec.grid_size, spec.min_ratio)
                                 : spec.lambda_grid;
    const BlockGram gram = block_gram(U, d);
    const std::size_t N = static_cast<std::size_t>(y.size());

    std::vector<PathPoint> path;
    path.reserve(grid.size());
    Vector gamma = Vector::Zero(U.cols());
    for (double lambda : grid) {
        PathPoint pt;
        pt.lambda = lambda;
        GroupProblem pr(y, U, d, Vector::Constant(p, lambda));
        pr.cache = &gram;
        pr.tol = spec.tol;
        pr.max_iter = spec.max_iter;

        Vector r = y - U * gamma;
        pt.objective_trace.push_back(nonconvex_objective(spec, lambda, r, gamma, d));
        SolveResult res;
        for (int round = 1; round <= spec.lla_max_rounds; ++round) {
            Vector w(p);
            for (Eigen::Index k = 0; k < p; ++k)
                w[k] = penalty_derivative(spec, lambda, gamma.segment(k * d, d).norm());
            const double w_change = round == 1 ? INFINITY : (w - pr.weights).cwiseAbs().maxCoeff();
            if (round > 1 && w_change < spec.lla_tol) break;
            pr.weights = w;
            pr.warm_start = gamma;
            res = certified_solve(pr, spec.kkt_target, &pt.kkt);
            gamma = res.gamma;
            pt.lla_rounds = round;
            pt.objective_trace.push_back(nonconvex_objective(spec, lambda, res.residual, gamma, d));
            if (spec.kind == Penalty::GLasso) break;
        }
        pt.gamma = gamma;
        pt.rss = res.residual.squaredNorm();
        pt.selected = count_nonzero_groups(gamma, d);
        pt.aicc = aicc_value(pt.rss, N, pt.selected);
        path.push_back(std::move(pt));
    }
    return path;
}

FitResult fit_penalized(const LongitudinalDataset& ds, const DesignExpansion& design, const PenaltySpec& spec) {
    const auto path = penalized_path(ds.responses(), design.U, design.block_size(), spec);
    std::size_t best = 0;
    for (std::size_t i = 1; i < path.size(); ++i)
        if (path[i].aicc < path[best].aicc) best = i;

    FitResult fit;
    switch (spec.kind) {
        case Penalty::GLasso: fit.method = Method::GLasso; break;
        case Penalty::GSCAD: fit.method = Method::GSCAD; break;
        case Penalty::GMCP: fit.method = Method::GMCP; break;
    }
    fit.basis = design.basis;
    fit.num_groups = design.num_groups;
    fit.variable_names = ds.variable_names();
    fit.gamma = path[best].gamma;
    fit.penalty_lambda = path[best].lambda;
    fit.response_offset = ds.response_offset();
    fit.aicc = path[best].aicc;
    for (std::size_t k = 0; k < fit.num_groups; ++k)
        if (fit.block(k).squaredNorm() > 0.0) fit.selected.push_back(k);
    fit.generalized_dim = fit.selected.size();
    return fit;
}

FitResult fit_penalized(const LongitudinalDataset& ds, const PenaltySpec& spec, const std::vector<int>& d_grid,
                        double t_min, double t_max) {
    auto sel = select_df(ds, d_grid, t_min, t_max,
                         [&](const DesignExpansion& design) { return fit_penalized(ds, design, spec); });
    return std::move(sel.best());
}

}  // namespace nvcssl
