#include "nvcssl/ssgl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "nvcssl/errors.hpp"

namespace nvcssl {

void SSGLConfig::validate() const {
    if (lambda0_ladder.empty()) throw ArgumentError("lambda0 ladder is empty");
    for (std::size_t i = 1; i < lambda0_ladder.size(); ++i)
        if (!(lambda0_ladder[i] > lambda0_ladder[i - 1]))
            throw ArgumentError("lambda0 ladder must be strictly increasing");
    if (!(lambda1 > 0.0) || !std::isfinite(lambda1)) throw ArgumentError("lambda1 must be positive");
    if (!(lambda0_ladder.front() > lambda1)) throw ArgumentError("every lambda0 must exceed lambda1");
    if (!(a > 0.0)) throw ArgumentError("beta prior shape a must be positive");
    if (b && !(*b > 0.0)) throw ArgumentError("beta prior shape b must be positive");
    if (!(c0 > 0.0) || !(d0 > 0.0)) throw ArgumentError("inverse-gamma shapes c0, d0 must be positive");
    if (rho_atoms.empty()) throw ArgumentError("rho atom set is empty");
    std::set<double> seen;
    for (double m : rho_atoms) {
        if (!(m >= 0.0 && m < 1.0)) throw ArgumentError("rho atoms must lie in [0, 1)");
        if (!seen.insert(m).second) throw ArgumentError("rho atoms must be distinct");
    }
    for (double xi : xi_grid)
        if (!(xi > 0.0 && xi < 1.0)) throw ArgumentError("xi grid values must lie in (0, 1)");
    if (!(em_tol > 0.0) || !(bcd_tol > 0.0)) throw ArgumentError("tolerances must be positive");
    if (em_max_iter < 1 || bcd_max_iter < 1) throw ArgumentError("iteration limits must be positive");
}

double psi_log_normalizer(int d) {
    const double dd = static_cast<double>(d);
    return dd * std::numbers::ln2 + 0.5 * (dd - 1.0) * std::log(std::numbers::pi) + std::lgamma(0.5 * (dd + 1.0));
}

double psi_log_density(const Vector& gamma_k, double lambda) {
    const int d = static_cast<int>(gamma_k.size());
    return d * std::log(lambda) - lambda * gamma_k.norm() - psi_log_normalizer(d);
}

double p_star(double norm, double theta, double lambda0, double lambda1, int d) {
    // logit p* = log(theta/(1-theta)) + d log(lambda1/lambda0) + (lambda0 - lambda1) norm
    const double log_odds_prior = std::log(theta) - std::log1p(-theta);
    const double logit = log_odds_prior + d * (std::log(lambda1) - std::log(lambda0)) + (lambda0 - lambda1) * norm;
    double p;
    if (logit >= 0.0)
        p = 1.0 / (1.0 + std::exp(-logit));
    else {
        const double e = std::exp(logit);
        p = e / (1.0 + e);
    }
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    return std::clamp(p, lo, hi);
}

double lambda_star(double p, double lambda0, double lambda1) {
    return lambda1 * p + lambda0 * (1.0 - p);
}

double omega_threshold(double lambda0, double lambda1, double theta, int d) {
    if (lambda0 == lambda1) throw ArgumentError("spike and slab penalties coincide; threshold undefined");
    const double log_ratio = std::log1p(-theta) - std::log(theta) + d * (std::log(lambda0) - std::log(lambda1));
    return log_ratio / (lambda0 - lambda1);
}

Vector group_norms(const Vector& gamma, int d) {
    const auto p = gamma.size() / d;
    Vector out(p);
    for (Eigen::Index k = 0; k < p; ++k) out[k] = gamma.segment(k * d, d).norm();
    return out;
}

std::size_t generalized_dimension(const Vector& gamma, int d, double omega) {
    const Vector norms = group_norms(gamma, d);
    return static_cast<std::size_t>((norms.array() > omega).count());
}

double log_mixture(double norm, double theta, double lambda0, double lambda1, int d) {
    const double spike = std::log1p(-theta) + d * std::log(lambda0) - lambda0 * norm;
    const double slab = std::log(theta) + d * std::log(lambda1) - lambda1 * norm;
    const double hi = std::max(spike, slab);
    if (hi == -std::numeric_limits<double>::infinity()) return hi;
    return hi + std::log(std::exp(spike - hi) + std::exp(slab - hi));
}

double log_prior_gamma_theta(const Vector& gamma, int d, double theta, double lambda0, const SSGLConfig& config) {
    const auto p = static_cast<std::size_t>(gamma.size() / d);
    double acc = 0.0;
    for (std::size_t k = 0; k < p; ++k)
        acc += log_mixture(gamma.segment(static_cast<Eigen::Index>(k) * d, d).norm(), theta, lambda0,
                           config.lambda1, d);
    acc += (config.a - 1.0) * std::log(theta) + (config.b_for(p) - 1.0) * std::log1p(-theta);
    return acc;
}

namespace {

double checked(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericError(std::string(what) + " is not finite");
    return v;
}

}  // namespace

double log_posterior_structured(double whitened_rss, double logdet_R, std::size_t N, const Vector& gamma, int d,
                                double theta, double sigma2, const SSGLConfig& config, double lambda0) {
    const double Nd = static_cast<double>(N);
    const double log_s2 = std::log(sigma2);
    double v = -0.5 * Nd * log_s2 - 0.5 * logdet_R - whitened_rss / (2.0 * sigma2);
    v += log_prior_gamma_theta(gamma, d, theta, lambda0, config);
    v += -0.5 * (config.c0 + 2.0) * log_s2 - config.d0 / (2.0 * sigma2);
    v += -std::log(static_cast<double>(config.rho_atoms.size()));
    return checked(v, "log-posterior");
}

double log_posterior_structured(const Vector& gamma, double theta, double sigma2, double rho,
                                const LongitudinalDataset& ds, const DesignExpansion& design,
                                const SSGLConfig& config, double lambda0, Structure structure) {
    if (!(sigma2 > 0.0)) throw ArgumentError("sigma2 must be positive");
    const auto spec = CovarianceSpec::parametric(structure, rho);
    const Vector resid = ds.responses() - design.U * gamma;
    const Vector w = whiten_vector(spec, ds, resid);
    const double logdet = covariance_logdet(spec, ds);
    return log_posterior_structured(w.squaredNorm(), logdet, ds.num_observations(), gamma, design.basis.dim, theta,
                                    sigma2, config, lambda0);
}

double log_fractional_posterior(double whitened_rss, double logdet_S, const Vector& gamma, int d, double theta,
                                double xi, const SSGLConfig& config, double lambda0) {
    double v = -0.5 * xi * logdet_S - 0.5 * xi * whitened_rss;
    v += log_prior_gamma_theta(gamma, d, theta, lambda0, config);
    return checked(v, "log fractional posterior");
}

double log_fractional_posterior(const Vector& gamma, double theta, const LongitudinalDataset& ds,
                                const DesignExpansion& design, const CovarianceSpec& working, double xi,
                                const SSGLConfig& config, double lambda0) {
    if (!(xi > 0.0 && xi < 1.0)) throw ArgumentError("fractional power must lie in (0, 1)");
    const Vector resid = ds.responses() - design.U * gamma;
    const Vector w = whiten_vector(working, ds, resid);
    const double logdet = covariance_logdet(working, ds);
    return log_fractional_posterior(w.squaredNorm(), logdet, gamma, design.basis.dim, theta, xi, config, lambda0);
}

double log_posterior_unstructured(double whitened_rss, double logdet_sigma, double iw_logdet_weight,
                                  double trace_term, const Vector& gamma, int d, double theta,
                                  const SSGLConfig& config, double lambda0) {
    // iw_logdet_weight = sum_i (m_i + n_i + 1) log|Sigma_i|
    double v = -0.5 * logdet_sigma - 0.5 * whitened_rss;
    v += log_prior_gamma_theta(gamma, d, theta, lambda0, config);
    v += -0.5 * iw_logdet_weight - 0.5 * trace_term;
    return checked(v, "log-posterior");
}

}  // namespace nvcssl
