#include "nvcssl/pipeline.hpp"

#include <cmath>

#include "nvcssl/errors.hpp"

namespace nvcssl {

namespace {

FitResult fit_robustified_tuned(const LongitudinalDataset& ds, const DesignExpansion& design,
                                const MethodOptions& opt) {
    WorkingCovariance working;
    if (opt.working == "eb") {
        working = eb_working_cov(ds, design).working();
    } else if (opt.working == "independence") {
        working.source = "independence";
        working.sigma2 = 1.0;
        working.rho = 0.0;
        working.spec = CovarianceSpec::independence();
    } else {
        throw ArgumentError("unknown working covariance '" + opt.working + "' (expected eb or independence)");
    }
    if (opt.xi) return fit_robustified(ds, design, opt.ssgl, working, *opt.xi);
    auto sel = select_xi(ds, design, opt.ssgl, working, opt.ssgl.xi_grid);
    return std::move(sel.fits[sel.best_index]);
}

}  // namespace

FitResult fit_method(Method method, const LongitudinalDataset& ds, const MethodOptions& opt) {
    double t_min = opt.t_min, t_max = opt.t_max;
    if (std::isnan(t_min) || std::isnan(t_max)) {
        const auto range = ds.time_range();
        if (std::isnan(t_min)) t_min = range.first;
        if (std::isnan(t_max)) t_max = range.second;
    }
    opt.ssgl.validate();
    if (method == Method::Robustified && opt.xi && !(*opt.xi > 0.0 && *opt.xi < 1.0))
        throw ArgumentError("fractional power xi must lie in (0, 1)");

    DesignFitter fitter;
    PenaltySpec penalty = opt.penalty;
    switch (method) {
        case Method::NVCSSL:
            fitter = [&](const DesignExpansion& d) { return fit_nvcssl(ds, d, opt.ssgl, opt.structure); };
            break;
        case Method::Robustified:
            fitter = [&](const DesignExpansion& d) { return fit_robustified_tuned(ds, d, opt); };
            break;
        case Method::Unstructured:
            fitter = [&](const DesignExpansion& d) { return fit_unstructured(ds, d, opt.ssgl); };
            break;
        case Method::GLasso:
        case Method::GSCAD:
        case Method::GMCP:
            penalty.kind = method == Method::GLasso  ? Penalty::GLasso
                           : method == Method::GSCAD ? Penalty::GSCAD
                                                     : Penalty::GMCP;
            penalty.validate();
            fitter = [&](const DesignExpansion& d) { return fit_penalized(ds, d, penalty); };
            break;
    }
    auto sel = select_df(ds, opt.d_grid, t_min, t_max, fitter);
    return std::move(sel.best());
}

}  // namespace nvcssl
