#include <algorithm>
#include <cmath>
#include <limits>

#include "nvcssl/baselines.hpp"
#include "nvcssl/em.hpp"
#include "nvcssl/errors.hpp"

namespace nvcssl {

void finalize_selection(FitResult& fit, double lambda0, double lambda1) {
    fit.selected.clear();
    for (std::size_t k = 0; k < fit.num_groups; ++k)
        if (fit.block(k).squaredNorm() > 0.0) fit.selected.push_back(k);
    if (std::isfinite(fit.theta)) {
        fit.omega = omega_threshold(lambda0, lambda1, fit.theta, fit.basis.dim);
        fit.generalized_dim = generalized_dimension(fit.gamma, fit.basis.dim, fit.omega);
    } else {
        fit.generalized_dim = fit.selected.size();
    }
}

double aicc_value(double residual_ss, std::size_t N, std::size_t s) {
    if (s + 2 >= N) return std::numeric_limits<double>::infinity();
    // An exact interpolant has no defined criterion; reject it like an oversized model.
    if (!(residual_ss > 0.0)) return std::numeric_limits<double>::infinity();
    const double Nd = static_cast<double>(N);
    const double sd = static_cast<double>(s);
    return std::log(residual_ss / Nd) + 1.0 + 2.0 * (sd + 1.0) / (Nd - sd - 2.0);
}

double aicc(const FitResult& fit, const LongitudinalDataset& ds, const DesignExpansion& design) {
    Vector resid = ds.responses() - design.U * fit.gamma;
    if (fit.method == Method::NVCSSL && fit.structure != Structure::Independence)
        resid = whiten_vector(CovarianceSpec::parametric(fit.structure, fit.rho), ds, resid);
    std::size_t s = 0;
    for (std::size_t k = 0; k < fit.num_groups; ++k)
        if (fit.block(k).squaredNorm() > 0.0) ++s;
    return aicc_value(resid.squaredNorm(), ds.num_observations(), s);
}

DfSelection select_df(const LongitudinalDataset& ds, const std::vector<int>& d_grid, double t_min, double t_max,
                      const DesignFitter& fitter) {
    if (d_grid.empty()) throw ArgumentError("basis dimension grid is empty");
    DfSelection sel;
    sel.d_grid = d_grid;
    for (int d : d_grid) {
        const DesignExpansion design = build_design(ds, make_basis(t_min, t_max, d));
        sel.fits.push_back(fitter(design));
    }
    for (std::size_t i = 1; i < sel.fits.size(); ++i) {
        const double a = sel.fits[i].aicc, b = sel.fits[sel.best_index].aicc;
        if (a < b || (a == b && d_grid[i] < d_grid[sel.best_index])) sel.best_index = i;
    }
    sel.best_d = d_grid[sel.best_index];
    FitResult& best = sel.best();
    for (std::size_t i = 0; i < sel.fits.size(); ++i) {
        if (i == sel.best_index) continue;
        best.max_logpost_drop = std::max(best.max_logpost_drop, sel.fits[i].max_logpost_drop);
        best.em_runs += sel.fits[i].em_runs;
        best.converged = best.converged && sel.fits[i].converged;
    }
    return sel;
}

DfSelection select_df(const LongitudinalDataset& ds, const SSGLConfig& config, Structure structure,
                      const std::vector<int>& d_grid, double t_min, double t_max) {
    return select_df(ds, d_grid, t_min, t_max,
                     [&](const DesignExpansion& design) { return fit_nvcssl(ds, design, config, structure); });
}

XiSelection select_xi(const LongitudinalDataset& ds, const DesignExpansion& design, const SSGLConfig& config,
                      const WorkingCovariance& working, const std::vector<double>& xi_grid) {
    if (xi_grid.empty()) throw ArgumentError("xi grid is empty");
    for (double xi : xi_grid)
        if (!(xi > 0.0 && xi < 1.0)) throw ArgumentError("xi grid values must lie in (0, 1)");
    XiSelection sel;
    for (double xi : xi_grid) sel.fits.push_back(fit_robustified(ds, design, config, working, xi));
    for (std::size_t i = 1; i < sel.fits.size(); ++i) {
        const double a = sel.fits[i].aicc, b = sel.fits[sel.best_index].aicc;
        if (a < b || (a == b && xi_grid[i] > xi_grid[sel.best_index])) sel.best_index = i;
    }
    sel.best_xi = xi_grid[sel.best_index];
    FitResult& best = sel.fits[sel.best_index];
    for (std::size_t i = 0; i < sel.fits.size(); ++i) {
        if (i == sel.best_index) continue;
        best.max_logpost_drop = std::max(best.max_logpost_drop, sel.fits[i].max_logpost_drop);
        best.em_runs += sel.fits[i].em_runs;
        best.converged = best.converged && sel.fits[i].converged;
    }
    return sel;
}

Vector predict(const FitResult& fit, const DesignExpansion& design_new) {
    if (design_new.U.cols() != fit.gamma.size())
        throw ArgumentError("new design has " + std::to_string(design_new.U.cols()) + " columns, model expects " +
                            std::to_string(fit.gamma.size()));
    Vector out = design_new.U * fit.gamma;
    out.array() += fit.response_offset;
    return out;
}

Vector predict(const FitResult& fit, const LongitudinalDataset& ds_new) {
    if (ds_new.num_covariates() != fit.num_groups)
        throw ValidationError("new data have " + std::to_string(ds_new.num_covariates()) +
                              " covariates, model expects " + std::to_string(fit.num_groups));
    return predict(fit, build_design(ds_new, fit.basis));
}

WorkingCovariance EbEstimate::working() const {
    WorkingCovariance w;
    w.source = "eb";
    w.sigma2 = sigma2;
    w.rho = rho;
    w.spec = CovarianceSpec::ar1(rho, sigma2);
    return w;
}

double eb_profile(const LongitudinalDataset& ds, const Vector& residual, double rho, double* sigma2_out) {
    const auto spec = CovarianceSpec::ar1(rho);
    const Vector w = whiten_vector(spec, ds, residual);
    const double Nd = static_cast<double>(ds.num_observations());
    const double s2 = w.squaredNorm() / Nd;
    if (!(s2 > 0.0)) throw NumericError("pilot residuals are identically zero; cannot estimate a working covariance");
    if (sigma2_out) *sigma2_out = s2;
    return -0.5 * Nd * std::log(s2) - 0.5 * covariance_logdet(spec, ds) - 0.5 * Nd;
}

EbEstimate eb_working_cov(const LongitudinalDataset& ds, const DesignExpansion& design) {
    const FitResult pilot = fit_penalized(ds, design, PenaltySpec{});
    const Vector resid = ds.responses() - design.U * pilot.gamma;
    EbEstimate eb;
    eb.pilot_lambda = *pilot.penalty_lambda;
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 1; j <= 99; ++j) {
        const double rho = j / 100.0;
        double s2 = 0.0;
        const double v = eb_profile(ds, resid, rho, &s2);
        eb.rho_grid.push_back(rho);
        eb.profile.push_back(v);
        if (v > best) {
            best = v;
            eb.rho = rho;
            eb.sigma2 = s2;
        }
    }
    return eb;
}

}  // namespace nvcssl
