#include "nvcssl/em.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>

#include "nvcssl/errors.hpp"
#include "nvcssl/group_solver.hpp"
#include "nvcssl/parallel.hpp"

namespace nvcssl {

const char* to_string(Method m) {
    switch (m) {
        case Method::NVCSSL: return "nvcssl";
        case Method::Robustified: return "robustified";
        case Method::Unstructured: return "unstructured";
        case Method::GLasso: return "glasso";
        case Method::GSCAD: return "gscad";
        case Method::GMCP: return "gmcp";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    for (Method m : {Method::NVCSSL, Method::Robustified, Method::Unstructured, Method::GLasso, Method::GSCAD,
                     Method::GMCP})
        if (name == to_string(m)) return m;
    throw ArgumentError("unknown method '" + name +
                        "' (expected nvcssl, robustified, unstructured, glasso, gscad or gmcp)");
}

bool FitResult::is_selected(std::size_t k) const {
    return std::binary_search(selected.begin(), selected.end(), k);
}

double theta_update(const Vector& p_star_values, double a, double b, std::size_t p) {
    const double num = a - 1.0 + p_star_values.sum();
    const double den = a + b + static_cast<double>(p) - 2.0;
    return std::clamp(num / den, 1e-12, 1.0 - 1e-12);
}

double sigma2_update(double residual_ss, double d0, double c0, std::size_t N) {
    return (d0 + residual_ss) / (static_cast<double>(N) + c0 + 2.0);
}

double initial_sigma2(const Vector& y) {
    const auto n = y.size();
    double var = 1.0;
    if (n > 1) {
        const double mean = y.mean();
        var = (y.array() - mean).square().sum() / static_cast<double>(n - 1);
    }
    if (!(var > 0.0)) var = 1.0;  // constant response: fall back to unit scale
    // X ~ scaled-inv-chi2(nu, s2) has P(X <= v) = P(chi2_nu >= nu s2 / v), so the
    // 90th percentile equals v when nu s2 = v * q_{0.1}. The mode is nu s2 / (nu + 2).
    constexpr double nu = 3.0;
    const double q = boost::math::quantile(boost::math::chi_squared(nu), 0.1);
    return var * q / (nu + 2.0);
}

Matrix unstructured_sigma_update(const Matrix& omega, const Vector& residual, double m) {
    const double n = static_cast<double>(residual.size());
    Matrix S = (omega + residual * residual.transpose()) / (m + n + 2.0);
    return 0.5 * (S + S.transpose());
}

namespace {

struct ChainState {
    Vector gamma;
    double theta = 0.5;
    double sigma2 = 1.0;
    std::vector<Matrix> blocks;  // unstructured only
};

void finish_run(EmRun& run) {
    run.max_drop = 0.0;
    for (std::size_t i = 1; i < run.logpost_trace.size(); ++i)
        run.max_drop = std::max(run.max_drop, run.logpost_trace[i - 1] - run.logpost_trace[i]);
}

// E-step responsibilities at the current gamma and theta.
Vector e_step(const Vector& gamma, int d, double theta, double lambda0, double lambda1) {
    const auto p = gamma.size() / d;
    Vector pst(p);
    for (Eigen::Index k = 0; k < p; ++k)
        pst[k] = p_star(gamma.segment(k * d, d).norm(), theta, lambda0, lambda1, d);
    return pst;
}

Vector lambda_stars(const Vector& pst, double lambda0, double lambda1) {
    Vector w(pst.size());
    for (Eigen::Index k = 0; k < pst.size(); ++k) w[k] = lambda_star(pst[k], lambda0, lambda1);
    return w;
}

std::size_t active_columns(const Vector& gamma, int d) {
    std::size_t n = 0;
    for (Eigen::Index k = 0; k < gamma.size() / d; ++k)
        if (gamma.segment(k * d, d).squaredNorm() > 0.0) n += static_cast<std::size_t>(d);
    return n;
}

// Fixed-whitening EM shared by the structured and robustified fitters. In
// structured mode the gamma weights are sigma2 * lambda*, otherwise
// lambda* / xi and sigma2 is not updated.
struct FixedSystem {
    double rho = kNaN;
    WhitenedSystem ws;
    BlockGram gram;
};

struct ChainSettings {
    const SSGLConfig* config;
    int d;
    std::size_t p;
    std::size_t N;
    bool structured;
    double xi = 1.0;
};

EmRun run_fixed(const FixedSystem& sys, ChainState& st, double lambda0, const ChainSettings& cs) {
    const SSGLConfig& cfg = *cs.config;
    const double b = cfg.b_for(cs.p);
    auto logpost = [&](double rss) {
        if (cs.structured)
            return log_posterior_structured(rss, sys.ws.logdet, cs.N, st.gamma, cs.d, st.theta, st.sigma2, cfg,
                                            lambda0);
        return log_fractional_posterior(rss, sys.ws.logdet, st.gamma, cs.d, st.theta, cs.xi, cfg, lambda0);
    };

    EmRun run;
    run.rho = sys.rho;
    run.logpost_trace.push_back(logpost((sys.ws.Y - sys.ws.U * st.gamma).squaredNorm()));

    GroupProblem pr(sys.ws.Y, sys.ws.U, cs.d, Vector(static_cast<Eigen::Index>(cs.p)));
    pr.cache = &sys.gram;
    pr.tol = cfg.bcd_tol;
    pr.max_iter = cfg.bcd_max_iter;

    for (int it = 1; it <= cfg.em_max_iter; ++it) {
        const Vector pst = e_step(st.gamma, cs.d, st.theta, lambda0, cfg.lambda1);
        const Vector lam = lambda_stars(pst, lambda0, cfg.lambda1);
        const double theta_new = theta_update(pst, cfg.a, b, cs.p);
        pr.weights = cs.structured ? Vector(st.sigma2 * lam) : Vector(lam / cs.xi);
        pr.warm_start = st.gamma;
        SolveResult res = solve(pr);
        const double rss = res.residual.squaredNorm();
        const double diff = (res.gamma - st.gamma).norm();
        st.gamma = std::move(res.gamma);
        st.theta = theta_new;
        // Hold sigma2 while the fit is saturated (s*d >= N); updating it there
        // drives sigma2 toward d0/(N+c0+2) and the weights toward zero.
        if (cs.structured && active_columns(st.gamma, cs.d) < cs.N)
            st.sigma2 = sigma2_update(rss, cfg.d0, cfg.c0, cs.N);
        run.logpost_trace.push_back(logpost(rss));
        run.iterations = it;
        if (diff <= cfg.em_tol) {
            run.converged = true;
            break;
        }
    }
    finish_run(run);
    return run;
}

// Unstructured pieces of the log-posterior at the current blocks.
struct BlockTerms {
    double rss = 0.0;
    double logdet = 0.0;
    double iw_logdet = 0.0;
    double trace = 0.0;
};

BlockTerms block_terms(const LongitudinalDataset& ds, const Vector& resid, const std::vector<Matrix>& blocks,
                       const std::vector<double>& df, const std::vector<Matrix>& scale) {
    BlockTerms t;
    for (std::size_t i = 0; i < ds.num_subjects(); ++i) {
        Eigen::LLT<Matrix> llt(blocks[i]);
        if (llt.info() != Eigen::Success) throw DecompositionError("unstructured covariance block lost definiteness");
        const auto ri = resid.segment(static_cast<Eigen::Index>(ds.row_begin(i)),
                                      static_cast<Eigen::Index>(ds.subject_size(i)));
        const Vector w = llt.matrixL().solve(ri);
        const double ld = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        t.rss += w.squaredNorm();
        t.logdet += ld;
        t.iw_logdet += (df[i] + static_cast<double>(ds.subject_size(i)) + 1.0) * ld;
        t.trace += llt.solve(scale[i]).trace();
    }
    return t;
}

EmRun run_unstructured(const LongitudinalDataset& ds, const DesignExpansion& design, ChainState& st,
                       double lambda0, const ChainSettings& cs, const std::vector<double>& df,
                       const std::vector<Matrix>& scale, std::size_t& factorizations) {
    const SSGLConfig& cfg = *cs.config;
    const double b = cfg.b_for(cs.p);
    auto logpost = [&](const Vector& resid) {
        const BlockTerms t = block_terms(ds, resid, st.blocks, df, scale);
        return log_posterior_unstructured(t.rss, t.logdet, t.iw_logdet, t.trace, st.gamma, cs.d, st.theta, cfg,
                                          lambda0);
    };

    EmRun run;
    Vector resid = ds.responses() - design.U * st.gamma;
    run.logpost_trace.push_back(logpost(resid));

    for (int it = 1; it <= cfg.em_max_iter; ++it) {
        const Vector pst = e_step(st.gamma, cs.d, st.theta, lambda0, cfg.lambda1);
        const double theta_new = theta_update(pst, cfg.a, b, cs.p);
        const WhitenedSystem ws = whiten(CovarianceSpec::unstructured(st.blocks), ds, design);
        factorizations += ws.factorizations;
        const BlockGram gram = block_gram(ws.U, cs.d);
        GroupProblem pr(ws.Y, ws.U, cs.d, lambda_stars(pst, lambda0, cfg.lambda1));
        pr.cache = &gram;
        pr.tol = cfg.bcd_tol;
        pr.max_iter = cfg.bcd_max_iter;
        pr.warm_start = st.gamma;
        SolveResult res = solve(pr);
        const double diff = (res.gamma - st.gamma).norm();
        st.gamma = std::move(res.gamma);
        st.theta = theta_new;
        resid = ds.responses() - design.U * st.gamma;
        for (std::size_t i = 0; i < ds.num_subjects(); ++i) {
            const auto ri = resid.segment(static_cast<Eigen::Index>(ds.row_begin(i)),
                                          static_cast<Eigen::Index>(ds.subject_size(i)));
            st.blocks[i] = unstructured_sigma_update(scale[i], ri, df[i]);
        }
        run.logpost_trace.push_back(logpost(resid));
        run.iterations = it;
        if (diff <= cfg.em_tol) {
            run.converged = true;
            break;
        }
    }
    finish_run(run);
    return run;
}

void check_design(const LongitudinalDataset& ds, const DesignExpansion& design) {
    if (design.U.rows() != static_cast<Eigen::Index>(ds.num_observations()) ||
        design.num_groups != ds.num_covariates())
        throw ArgumentError("design does not match the dataset");
}

FitResult base_result(Method method, const LongitudinalDataset& ds, const DesignExpansion& design,
                      const SSGLConfig& config) {
    FitResult fit;
    fit.method = method;
    fit.basis = design.basis;
    fit.num_groups = design.num_groups;
    fit.variable_names = ds.variable_names();
    fit.response_offset = ds.response_offset();
    fit.config = config;
    return fit;
}

// Dynamic exploration: each rung warm-starts every atom from the previous
// rung's winner and keeps the atom with the largest final log-posterior.
template <class RunAtom>
void run_ladder(FitResult& fit, const SSGLConfig& cfg, std::size_t atoms, ChainState& state,
                const std::vector<double>& atom_rho, RunAtom&& run_atom) {
    for (double lambda0 : cfg.lambda0_ladder) {
        std::vector<ChainState> states(atoms, state);
        std::vector<EmRun> runs(atoms);
        parallel_for(atoms, cfg.threads, [&](std::size_t h) { runs[h] = run_atom(h, states[h], lambda0); });

        // Scan atoms by increasing rho so exact ties go to the smallest atom.
        std::vector<std::size_t> order(atoms);
        for (std::size_t h = 0; h < atoms; ++h) order[h] = h;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return atom_rho[x] < atom_rho[y]; });
        std::size_t best = order[0];
        for (std::size_t h : order)
            if (runs[h].final_logpost() > runs[best].final_logpost()) best = h;

        RungSummary rung;
        rung.lambda0 = lambda0;
        rung.chosen = best;
        state = std::move(states[best]);
        rung.theta = state.theta;
        rung.sigma2 = state.sigma2;
        rung.rho = atom_rho[best];
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(fit.num_groups); ++k)
            if (state.gamma.segment(k * fit.basis.dim, fit.basis.dim).squaredNorm() > 0.0) ++rung.selected_count;
        for (const auto& r : runs) {
            rung.converged = rung.converged && r.converged;
            fit.max_logpost_drop = std::max(fit.max_logpost_drop, r.max_drop);
        }
        fit.em_runs += runs.size();
        fit.converged = fit.converged && rung.converged;
        fit.logpost_trace = runs[best].logpost_trace;
        fit.final_logpost = runs[best].final_logpost();
        rung.runs = std::move(runs);
        fit.ladder_path.push_back(std::move(rung));
    }
    fit.gamma = state.gamma;
    fit.theta = state.theta;
}

}  // namespace

FitResult fit_nvcssl(const LongitudinalDataset& ds, const DesignExpansion& design, const SSGLConfig& config,
                     Structure structure) {
    config.validate();
    check_design(ds, design);
    if (structure == Structure::Independence)
        throw ArgumentError("the structured fitter needs an AR1 or CS correlation structure");

    FitResult fit = base_result(Method::NVCSSL, ds, design, config);
    fit.structure = structure;
    const ChainSettings cs{&config, design.basis.dim, design.num_groups, ds.num_observations(), true};

    const std::size_t atoms = config.rho_atoms.size();
    std::vector<FixedSystem> systems(atoms);
    parallel_for(atoms, config.threads, [&](std::size_t h) {
        systems[h].rho = config.rho_atoms[h];
        systems[h].ws = whiten(CovarianceSpec::parametric(structure, config.rho_atoms[h]), ds, design);
        systems[h].gram = block_gram(systems[h].ws.U, cs.d);
    });
    for (const auto& s : systems) fit.factorizations += s.ws.factorizations;

    ChainState state;
    state.gamma = Vector::Zero(design.U.cols());
    state.theta = 0.5;
    state.sigma2 = initial_sigma2(ds.responses());
    run_ladder(fit, config, atoms, state, config.rho_atoms,
               [&](std::size_t h, ChainState& st, double lambda0) { return run_fixed(systems[h], st, lambda0, cs); });
    fit.sigma2 = state.sigma2;
    fit.rho = fit.ladder_path.back().rho;
    finalize_selection(fit, config.lambda0_ladder.back(), config.lambda1);
    fit.aicc = aicc(fit, ds, design);
    return fit;
}

FitResult fit_robustified(const LongitudinalDataset& ds, const DesignExpansion& design, const SSGLConfig& config,
                          const WorkingCovariance& working, double xi) {
    config.validate();
    check_design(ds, design);
    if (!(xi > 0.0 && xi < 1.0)) throw ArgumentError("fractional power xi must lie in (0, 1)");

    FitResult fit = base_result(Method::Robustified, ds, design, config);
    fit.xi = xi;
    fit.working = working;
    ChainSettings cs{&config, design.basis.dim, design.num_groups, ds.num_observations(), false};
    cs.xi = xi;

    FixedSystem sys;
    sys.ws = whiten(working.spec, ds, design);
    sys.gram = block_gram(sys.ws.U, cs.d);
    fit.factorizations = sys.ws.factorizations;

    ChainState state;
    state.gamma = Vector::Zero(design.U.cols());
    state.theta = 0.5;
    SSGLConfig serial = config;
    serial.threads = 1;
    run_ladder(fit, serial, 1, state, {kNaN},
               [&](std::size_t, ChainState& st, double lambda0) { return run_fixed(sys, st, lambda0, cs); });
    finalize_selection(fit, config.lambda0_ladder.back(), config.lambda1);
    fit.aicc = aicc(fit, ds, design);
    return fit;
}

FitResult fit_unstructured(const LongitudinalDataset& ds, const DesignExpansion& design, const SSGLConfig& config,
                           std::vector<double> iw_df, std::vector<Matrix> iw_scale) {
    config.validate();
    check_design(ds, design);
    const std::size_t n = ds.num_subjects();
    if (iw_df.empty())
        for (std::size_t i = 0; i < n; ++i) iw_df.push_back(static_cast<double>(ds.subject_size(i)) - 1.0);
    if (iw_scale.empty())
        for (std::size_t i = 0; i < n; ++i) {
            const auto m = static_cast<Eigen::Index>(ds.subject_size(i));
            iw_scale.push_back(Matrix::Identity(m, m));
        }
    if (iw_df.size() != n || iw_scale.size() != n)
        throw ArgumentError("one inverse-Wishart df and scale per subject is required");
    for (std::size_t i = 0; i < n; ++i) {
        const auto m = static_cast<Eigen::Index>(ds.subject_size(i));
        const Matrix& S = iw_scale[i];
        if (S.rows() != m || S.cols() != m)
            throw ArgumentError("inverse-Wishart scale of subject '" + ds.subject_ids()[i] + "' has the wrong size");
        if (!S.isApprox(S.transpose(), 1e-12) || Eigen::LLT<Matrix>(S).info() != Eigen::Success)
            throw ArgumentError("inverse-Wishart scale of subject '" + ds.subject_ids()[i] +
                                "' is not symmetric positive definite");
        if (!std::isfinite(iw_df[i])) throw ArgumentError("inverse-Wishart df must be finite");
    }

    FitResult fit = base_result(Method::Unstructured, ds, design, config);
    const ChainSettings cs{&config, design.basis.dim, design.num_groups, ds.num_observations(), false};

    ChainState state;
    state.gamma = Vector::Zero(design.U.cols());
    state.theta = 0.5;
    state.sigma2 = kNaN;
    for (std::size_t i = 0; i < n; ++i) {
        const auto m = static_cast<Eigen::Index>(ds.subject_size(i));
        state.blocks.push_back(Matrix::Identity(m, m));
    }
    SSGLConfig serial = config;
    serial.threads = 1;
    std::size_t factorizations = 0;
    run_ladder(fit, serial, 1, state, {kNaN}, [&](std::size_t, ChainState& st, double lambda0) {
        return run_unstructured(ds, design, st, lambda0, cs, iw_df, iw_scale, factorizations);
    });
    fit.factorizations = factorizations;
    fit.sigma_blocks = std::move(state.blocks);
    finalize_selection(fit, config.lambda0_ladder.back(), config.lambda1);
    fit.aicc = aicc(fit, ds, design);
    return fit;
}

}  // namespace nvcssl
