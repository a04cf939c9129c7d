#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "nvcssl/correlation.hpp"
#include "nvcssl/data.hpp"
#include "nvcssl/spline.hpp"

namespace nvcssl {

// Hyperparameters and convergence controls shared by the three MAP-EM fitters.
struct SSGLConfig {
    std::vector<double> lambda0_ladder{5, 10, 15, 20, 25, 30, 40, 50, 60, 70, 80, 90, 100};
    double lambda1 = 1.0;
    double a = 1.0;
    std::optional<double> b;  // unset: number of covariates
    double c0 = 1.0;
    double d0 = 1.0;
    std::vector<double> rho_atoms{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<double> xi_grid{0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99};
    double em_tol = 1e-6;
    int em_max_iter = 100;
    double bcd_tol = 1e-6;
    int bcd_max_iter = 500;
    unsigned threads = 1;  // atom-level workers

    // Throws ArgumentError on the first violated invariant.
    void validate() const;
    double b_for(std::size_t num_groups) const { return b.value_or(static_cast<double>(num_groups)); }
};

// log Psi(gamma_k | lambda): the d-dimensional group lasso density.
double psi_log_density(const Vector& gamma_k, double lambda);
double psi_log_normalizer(int d);  // log C_d

// Slab responsibility of a group with norm `norm`, evaluated on the logit
// scale. Always strictly inside (0, 1).
double p_star(double norm, double theta, double lambda0, double lambda1, int d);
double lambda_star(double p, double lambda0, double lambda1);

// Norm at which spike and slab densities cross.
double omega_threshold(double lambda0, double lambda1, double theta, int d);
std::size_t generalized_dimension(const Vector& gamma, int d, double omega);

// log((1-theta) lambda0^d e^{-lambda0 t} + theta lambda1^d e^{-lambda1 t}).
double log_mixture(double norm, double theta, double lambda0, double lambda1, int d);

// Group norms of a stacked coefficient vector with blocks of size d.
Vector group_norms(const Vector& gamma, int d);

// Mixture terms over all groups plus the beta prior on theta.
double log_prior_gamma_theta(const Vector& gamma, int d, double theta, double lambda0, const SSGLConfig& config);

// Marginal log-posterior of (gamma, theta, sigma2, rho) under a parametric
// correlation structure, up to an additive constant.
double log_posterior_structured(const Vector& gamma, double theta, double sigma2, double rho,
                                const LongitudinalDataset& ds, const DesignExpansion& design,
                                const SSGLConfig& config, double lambda0, Structure structure);

// Same quantity from precomputed pieces: residual sum of squares after
// whitening by R(rho) and log|R(rho)|.
double log_posterior_structured(double whitened_rss, double logdet_R, std::size_t N, const Vector& gamma, int d,
                                double theta, double sigma2, const SSGLConfig& config, double lambda0);

// Log fractional posterior with working covariance S and power xi.
double log_fractional_posterior(const Vector& gamma, double theta, const LongitudinalDataset& ds,
                                const DesignExpansion& design, const CovarianceSpec& working, double xi,
                                const SSGLConfig& config, double lambda0);
double log_fractional_posterior(double whitened_rss, double logdet_S, const Vector& gamma, int d, double theta,
                                double xi, const SSGLConfig& config, double lambda0);

// Log posterior of the unstructured model (inverse-Wishart priors on each
// block): whitened_rss and logdet are with respect to the current blocks,
// trace_term = sum_i tr(Omega_i Sigma_i^{-1}).
double log_posterior_unstructured(double whitened_rss, double logdet_sigma, double iw_logdet_weight,
                                  double trace_term, const Vector& gamma, int d, double theta,
                                  const SSGLConfig& config, double lambda0);

}  // namespace nvcssl
