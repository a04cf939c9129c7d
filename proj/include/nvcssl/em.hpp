#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nvcssl/correlation.hpp"
#include "nvcssl/data.hpp"
#include "nvcssl/spline.hpp"
#include "nvcssl/ssgl.hpp"

namespace nvcssl {

enum class Method { NVCSSL, Robustified, Unstructured, GLasso, GSCAD, GMCP };

const char* to_string(Method m);
Method parse_method(const std::string& name);

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// One EM chain at a fixed lambda0 (and rho atom for structured fits).
struct EmRun {
    double rho = kNaN;
    int iterations = 0;
    bool converged = false;
    std::vector<double> logpost_trace;  // starting value, then one per iteration
    double max_drop = 0.0;              // largest decrease between successive trace values
    double final_logpost() const { return logpost_trace.back(); }
};

struct RungSummary {
    double lambda0 = 0.0;
    std::vector<EmRun> runs;  // one per atom, in atom order
    std::size_t chosen = 0;
    double theta = kNaN;
    double sigma2 = kNaN;
    double rho = kNaN;
    std::size_t selected_count = 0;
    bool converged = true;  // every run converged
};

struct WorkingCovariance {
    std::string source;  // "eb", "independence" or "given"
    double sigma2 = kNaN;
    double rho = kNaN;
    CovarianceSpec spec;
};

struct FitResult {
    Method method = Method::NVCSSL;
    Structure structure = Structure::Independence;
    BasisSpec basis;
    std::size_t num_groups = 0;
    std::vector<std::string> variable_names;

    Vector gamma;
    double theta = kNaN;
    double sigma2 = kNaN;
    double rho = kNaN;
    std::vector<Matrix> sigma_blocks;

    std::vector<std::size_t> selected;  // 0-based groups with nonzero norm
    std::size_t generalized_dim = 0;
    double omega = kNaN;
    std::vector<double> logpost_trace;  // chosen run of the final rung
    double final_logpost = kNaN;
    double aicc = kNaN;
    std::vector<RungSummary> ladder_path;
    double response_offset = 0.0;

    std::optional<double> xi;
    std::optional<WorkingCovariance> working;
    std::optional<double> penalty_lambda;
    std::optional<SSGLConfig> config;

    // Bookkeeping over every EM run that contributed, tuning candidates included.
    double max_logpost_drop = 0.0;
    std::size_t em_runs = 0;
    std::size_t factorizations = 0;  // dense covariance factorizations
    bool converged = true;

    Vector block(std::size_t k) const {
        return gamma.segment(static_cast<Eigen::Index>(k) * basis.dim, basis.dim);
    }
    bool is_selected(std::size_t k) const;
};

double theta_update(const Vector& p_star_values, double a, double b, std::size_t p);
double sigma2_update(double residual_ss, double d0, double c0, std::size_t N);

// Mode of the scaled inverse chi-squared (nu = 3) whose 90th percentile is
// the sample variance of y.
double initial_sigma2(const Vector& y);

FitResult fit_nvcssl(const LongitudinalDataset& ds, const DesignExpansion& design, const SSGLConfig& config,
                     Structure structure);

FitResult fit_robustified(const LongitudinalDataset& ds, const DesignExpansion& design, const SSGLConfig& config,
                          const WorkingCovariance& working, double xi);

// iw_df and iw_scale may be empty to use m_i = n_i - 1 and Omega_i = I.
FitResult fit_unstructured(const LongitudinalDataset& ds, const DesignExpansion& design, const SSGLConfig& config,
                           std::vector<double> iw_df = {}, std::vector<Matrix> iw_scale = {});

// (Omega + r r') / (m + n + 2)
Matrix unstructured_sigma_update(const Matrix& omega, const Vector& residual, double m);

struct EbEstimate {
    double sigma2 = kNaN;
    double rho = kNaN;
    double pilot_lambda = kNaN;
    std::vector<double> rho_grid;
    std::vector<double> profile;  // profiled log-likelihood on rho_grid
    WorkingCovariance working() const;
};

// Profile log-likelihood -(N/2) log s2(rho) - 0.5 log|R(rho)| - N/2 for a
// fixed residual vector, with s2(rho) = ||R^{-1/2} r||^2 / N.
double eb_profile(const LongitudinalDataset& ds, const Vector& residual, double rho, double* sigma2_out = nullptr);

EbEstimate eb_working_cov(const LongitudinalDataset& ds, const DesignExpansion& design);

double aicc_value(double residual_ss, std::size_t N, std::size_t s);
// Whitens by R(rho_hat) for parametric NVC-SSL fits, identity otherwise.
double aicc(const FitResult& fit, const LongitudinalDataset& ds, const DesignExpansion& design);

struct DfSelection {
    int best_d = 0;
    std::size_t best_index = 0;
    std::vector<int> d_grid;
    std::vector<FitResult> fits;
    FitResult& best() { return fits[best_index]; }
};

using DesignFitter = std::function<FitResult(const DesignExpansion&)>;

// Refits on every d and keeps the AIC_c minimizer (ties to smaller d).
// The basis spans [t_min, t_max].
DfSelection select_df(const LongitudinalDataset& ds, const std::vector<int>& d_grid, double t_min, double t_max,
                      const DesignFitter& fitter);
DfSelection select_df(const LongitudinalDataset& ds, const SSGLConfig& config, Structure structure,
                      const std::vector<int>& d_grid, double t_min, double t_max);

struct XiSelection {
    double best_xi = kNaN;
    std::size_t best_index = 0;
    std::vector<FitResult> fits;
};

// AIC_c minimizer over robustified fits; ties go to the larger xi.
XiSelection select_xi(const LongitudinalDataset& ds, const DesignExpansion& design, const SSGLConfig& config,
                      const WorkingCovariance& working, const std::vector<double>& xi_grid);

// U_new gamma + stored offset.
Vector predict(const FitResult& fit, const DesignExpansion& design_new);
Vector predict(const FitResult& fit, const LongitudinalDataset& ds_new);

// Summary fields derived from gamma (selected set, omega, generalized
// dimension) are refreshed from the current gamma and theta.
void finalize_selection(FitResult& fit, double lambda0, double lambda1);

}  // namespace nvcssl
