#include "nvcssl/group_solver.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nvcssl/errors.hpp"

namespace nvcssl {

BlockGram block_gram(const Matrix& U, Eigen::Index block_size) {
    if (block_size <= 0 || U.cols() % block_size != 0)
        throw ArgumentError("design columns are not a multiple of the block size");
    const Eigen::Index p = U.cols() / block_size;
    const auto np = static_cast<std::size_t>(p);
    BlockGram out;
    out.lipschitz.resize(p);
    out.gram.resize(np);
    out.eigenvalues.resize(np);
    out.eigenvectors.resize(np);
    for (Eigen::Index k = 0; k < p; ++k) {
        const auto i = static_cast<std::size_t>(k);
        const auto Uk = U.middleCols(k * block_size, block_size);
        out.gram[i] = Uk.transpose() * Uk;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(out.gram[i]);
        out.eigenvalues[i] = eig.eigenvalues().cwiseMax(0.0);
        out.eigenvectors[i] = eig.eigenvectors();
        out.lipschitz[k] = out.eigenvalues[i][block_size - 1];
    }
    return out;
}

namespace {

void check_problem(const GroupProblem& pr) {
    const Eigen::Index d = pr.block_size;
    if (d <= 0 || pr.U.cols() % d != 0) throw ArgumentError("design columns are not a multiple of the block size");
    if (pr.U.rows() != pr.y.size()) throw ArgumentError("response length does not match design rows");
    const Eigen::Index p = pr.num_blocks();
    if (pr.weights.size() != p) throw ArgumentError("one weight per block is required");
    if (pr.warm_start.size() != 0 && pr.warm_start.size() != pr.U.cols())
        throw ArgumentError("warm start length does not match design columns");
    if (pr.cache && (pr.cache->lipschitz.size() != p || pr.cache->gram.size() != static_cast<std::size_t>(p) ||
                     pr.cache->eigenvectors.size() != static_cast<std::size_t>(p)))
        throw ArgumentError("block Gram cache does not match the design");
    if (!pr.y.allFinite() || !pr.U.allFinite()) throw NumericError("group problem data contain non-finite values");
    if (!pr.weights.allFinite()) throw NumericError("group penalty weights are not finite");
    if ((pr.weights.array() < 0.0).any()) throw ArgumentError("group penalty weights must be non-negative");
    if (pr.warm_start.size() != 0 && !pr.warm_start.allFinite()) throw NumericError("warm start is not finite");
    if (!(pr.tol > 0.0) || pr.max_iter < 1) throw ArgumentError("solver tolerance and iteration limit must be positive");
}

constexpr int kInnerSteps = 100;

// Norm t of the minimizer of 0.5 x'Gx - z'x + w||x|| for G = Q diag(lam) Q'
// with lam > 0, c = Q'z and ||c|| > w > 0. The minimizer has coordinates
// c_i t / (lam_i t + w), so t solves sum c_i^2 / (lam_i t + w)^2 = 1. Newton
// on 1/sqrt(.) of the left side, safeguarded by bisection.
double secular_norm(const Vector& c, const Vector& lam, double w) {
    const double cn = c.norm();
    double lo = (cn - w) / lam.maxCoeff();
    double hi = (cn - w) / lam.minCoeff();
    double t = lo;
    for (int it = 0; it < 100 && hi - lo > 1e-15 * hi; ++it) {
        double h = 0.0, dh = 0.0;
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            const double den = lam[i] * t + w;
            const double q = c[i] * c[i] / (den * den);
            h += q;
            dh -= 2.0 * q * lam[i] / den;
        }
        const double phi = 1.0 / std::sqrt(h) - 1.0;
        if (phi == 0.0) return t;
        (phi < 0.0 ? lo : hi) = t;
        const double dphi = -0.5 * dh / (h * std::sqrt(h));
        double next = dphi > 0.0 ? t - phi / dphi : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        t = next;
    }
    return t;
}

struct Workspace {
    const GroupProblem& pr;
    const BlockGram& cache;
    Vector& gamma;
    Vector& r;
    Vector z, x, step;

    // Minimizes the block subproblem exactly through the eigendecomposition of
    // the block Gram; rank-deficient blocks fall back to majorized prox steps.
    // Applies the change to the residual and returns its l2 norm.
    double update(Eigen::Index k) {
        const Eigen::Index d = pr.block_size;
        const auto i = static_cast<std::size_t>(k);
        const double Lk = cache.lipschitz[k];
        auto gk = gamma.segment(k * d, d);
        const auto Uk = pr.U.middleCols(k * d, d);
        if (!(Lk > 0.0)) {
            // Block has no effect on the fit; the penalty pins it at zero.
            const double change = gk.norm();
            gk.setZero();
            return change;
        }
        const Matrix& G = cache.gram[i];
        const double w = pr.weights[k];
        // Linear term of the block objective 0.5 x'Gx - z'x + w||x||.
        z.noalias() = Uk.transpose() * r;
        z.noalias() += G * gk;
        const Vector& lam = cache.eigenvalues[i];
        if (z.norm() <= w) {
            x.setZero();
        } else if (lam[0] > 1e-10 * Lk) {
            const Matrix& Q = cache.eigenvectors[i];
            step.noalias() = Q.transpose() * z;
            if (w > 0.0) {
                const double t = secular_norm(step, lam, w);
                step.array() *= t / (lam.array() * t + w);
            } else {
                step.array() /= lam.array();
            }
            x.noalias() = Q * step;
        } else {
            const double thr = w / Lk;
            x = gk;
            const double inner_tol = 0.01 * pr.tol;
            for (int it = 0; it < kInnerSteps; ++it) {
                step.noalias() = z - G * x;
                step = x + step / Lk;
                const double nv = step.norm();
                if (nv <= thr)
                    step.setZero();
                else
                    step *= 1.0 - thr / nv;
                const double moved = (step - x).norm();
                x.swap(step);
                if (moved <= inner_tol) break;
            }
        }
        x -= gk;  // delta
        const double change = x.norm();
        if (change > 0.0) {
            r.noalias() -= Uk * x;
            gk += x;
        }
        return change;
    }
};

constexpr std::size_t kAndersonDepth = 5;

double penalty(const GroupProblem& pr, const std::vector<Eigen::Index>& active, const Vector& xa) {
    const Eigen::Index d = pr.block_size;
    double pen = 0.0;
    for (std::size_t j = 0; j < active.size(); ++j)
        pen += pr.weights[active[j]] * xa.segment(static_cast<Eigen::Index>(j) * d, d).norm();
    return pen;
}

// Cycles over the active blocks until a pass moves no block by more than tol.
// Passes are Anderson-extrapolated; an extrapolated point is kept only when
// it lowers the objective, so the iteration stays monotone.
void settle_active(const GroupProblem& pr, Workspace& ws, const std::vector<Eigen::Index>& active, Vector& gamma,
                   Vector& r) {
    const Eigen::Index d = pr.block_size;
    const auto na = static_cast<Eigen::Index>(active.size()) * d;
    auto gather = [&] {
        Vector xa(na);
        for (std::size_t j = 0; j < active.size(); ++j)
            xa.segment(static_cast<Eigen::Index>(j) * d, d) = gamma.segment(active[j] * d, d);
        return xa;
    };
    std::vector<Vector> fs, gs;
    for (int inner = 0; inner < pr.max_iter; ++inner) {
        const Vector before = gather();
        double change = 0.0;
        for (auto k : active) change = std::max(change, ws.update(k));
        if (change <= pr.tol) break;

        Vector g = gather();
        fs.push_back(g - before);
        gs.push_back(std::move(g));
        if (fs.size() > kAndersonDepth + 1) {
            fs.erase(fs.begin());
            gs.erase(gs.begin());
        }
        const auto m = static_cast<Eigen::Index>(fs.size()) - 1;
        if (m < 1) continue;
        Matrix dF(na, m), dG(na, m);
        for (Eigen::Index c = 0; c < m; ++c) {
            dF.col(c) = fs[c + 1] - fs[c];
            dG.col(c) = gs[c + 1] - gs[c];
        }
        const Vector alpha = dF.colPivHouseholderQr().solve(fs.back());
        const Vector step = -(dG * alpha);
        if (!step.allFinite() || step.squaredNorm() == 0.0) continue;
        Vector r_acc = r;
        for (std::size_t j = 0; j < active.size(); ++j)
            r_acc.noalias() -= pr.U.middleCols(active[j] * d, d) * step.segment(static_cast<Eigen::Index>(j) * d, d);
        const Vector x_acc = gs.back() + step;
        const double cur = 0.5 * r.squaredNorm() + penalty(pr, active, gs.back());
        const double acc = 0.5 * r_acc.squaredNorm() + penalty(pr, active, x_acc);
        if (acc < cur) {
            for (std::size_t j = 0; j < active.size(); ++j)
                gamma.segment(active[j] * d, d) = x_acc.segment(static_cast<Eigen::Index>(j) * d, d);
            r = std::move(r_acc);
        } else {
            fs.clear();
            gs.clear();
        }
    }
}

}  // namespace

SolveResult solve(const GroupProblem& pr) {
    check_problem(pr);
    const Eigen::Index d = pr.block_size;
    const Eigen::Index p = pr.num_blocks();

    BlockGram owned;
    if (!pr.cache) owned = block_gram(pr.U, d);
    const BlockGram& cache = pr.cache ? *pr.cache : owned;

    SolveResult out;
    out.gamma = pr.warm_start.size() ? pr.warm_start : Vector::Zero(pr.U.cols());
    out.residual = pr.y;
    if (out.gamma.squaredNorm() > 0.0) out.residual.noalias() -= pr.U * out.gamma;

    Workspace ws{pr, cache, out.gamma, out.residual, Vector(d), Vector(d), Vector(d)};
    std::vector<Eigen::Index> active;
    active.reserve(static_cast<std::size_t>(p));

    for (int sweep = 1; sweep <= pr.max_iter; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) max_change = std::max(max_change, ws.update(k));
        out.iterations = sweep;
        if (max_change <= pr.tol) {
            out.converged = true;
            break;
        }
        // Settle the current support before the next full pass.
        active.clear();
        for (Eigen::Index k = 0; k < p; ++k)
            if (out.gamma.segment(k * d, d).squaredNorm() > 0.0) active.push_back(k);
        settle_active(pr, ws, active, out.gamma, out.residual);
    }
    // Refresh the residual to shed drift from incremental updates.
    out.residual = pr.y - pr.U * out.gamma;
    out.objective = group_objective(pr, out.gamma);
    return out;
}

double group_objective(const GroupProblem& pr, const Vector& gamma) {
    const Eigen::Index d = pr.block_size;
    double pen = 0.0;
    for (Eigen::Index k = 0; k < pr.num_blocks(); ++k) pen += pr.weights[k] * gamma.segment(k * d, d).norm();
    return 0.5 * (pr.y - pr.U * gamma).squaredNorm() + pen;
}

double kkt_residual(const Vector& gamma, const GroupProblem& pr) {
    const Eigen::Index d = pr.block_size;
    const Vector r = pr.y - pr.U * gamma;
    const Vector g = pr.U.transpose() * r;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < pr.num_blocks(); ++k) {
        const auto gk = gamma.segment(k * d, d);
        const auto zk = g.segment(k * d, d);
        const double n = gk.norm();
        double viol;
        if (n > 0.0)
            viol = (zk - pr.weights[k] * gk / n).norm();
        else
            viol = std::max(zk.norm() - pr.weights[k], 0.0);
        worst = std::max(worst, viol);
    }
    return worst;
}

}  // namespace nvcssl
