#include "nvcssl/correlation.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "nvcssl/errors.hpp"

namespace nvcssl {

const char* to_string(Structure s) {
    switch (s) {
        case Structure::Independence: return "independence";
        case Structure::AR1: return "ar1";
        case Structure::CS: return "cs";
    }
    return "?";
}

Structure parse_structure(const std::string& name) {
    if (name == "ar1" || name == "AR1") return Structure::AR1;
    if (name == "cs" || name == "CS") return Structure::CS;
    if (name == "independence" || name == "ind") return Structure::Independence;
    throw ArgumentError("unknown correlation structure '" + name + "' (expected ar1, cs or independence)");
}

namespace {

void check_rho(double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) {
        std::ostringstream msg;
        msg << "correlation parameter " << rho << " outside [0, 1)";
        throw ArgumentError(msg.str());
    }
}

void check_sigma2(double sigma2) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ArgumentError("variance scale must be positive and finite");
}

// rho^gap with the 0^0 = 1 convention.
double ar1_coefficient(double rho, double gap) {
    if (rho == 0.0) return gap == 0.0 ? 1.0 : 0.0;
    return std::exp(gap * std::log(rho));
}

// 1 - rho^(2 gap), computed without cancellation.
double ar1_innovation_variance(double rho, double gap) {
    if (rho == 0.0) return 1.0;
    const double v = -std::expm1(2.0 * gap * std::log(rho));
    if (!(v >= std::numeric_limits<double>::min()) || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << "AR(1) innovation variance underflows for rho=" << rho << ", gap=" << gap;
        throw NumericError(msg.str());
    }
    return v;
}

struct WhitenStats {
    double logdet = 0.0;
    std::size_t factorizations = 0;
};

// In-place row transform of subject blocks of M (N rows, any number of
// columns) by W_i with W_i' W_i = block_i^{-1}.
WhitenStats whiten_rows(const CovarianceSpec& spec, const LongitudinalDataset& ds, Matrix& M) {
    WhitenStats stats;
    const auto n = ds.num_subjects();
    if (spec.is_explicit() && spec.blocks.size() != n)
        throw ArgumentError("explicit covariance has " + std::to_string(spec.blocks.size()) + " blocks for " +
                            std::to_string(n) + " subjects");
    if (!spec.is_explicit()) check_sigma2(spec.sigma2);
    const double inv_sd = spec.is_explicit() ? 1.0 : 1.0 / std::sqrt(spec.sigma2);
    const double log_sigma2 = spec.is_explicit() ? 0.0 : std::log(spec.sigma2);

    for (std::size_t i = 0; i < n; ++i) {
        const auto b = static_cast<Eigen::Index>(ds.row_begin(i));
        const auto m = static_cast<Eigen::Index>(ds.subject_size(i));
        auto rows = M.middleRows(b, m);
        switch (spec.kind) {
            case CovarianceSpec::Kind::Independence:
                break;
            case CovarianceSpec::Kind::AR1: {
                check_rho(spec.rho);
                const auto t = ds.subject_times(i);
                // Bottom-up so row j-1 is still untouched when row j needs it.
                for (Eigen::Index j = m - 1; j >= 1; --j) {
                    const double gap = t[j] - t[j - 1];
                    const double phi = ar1_coefficient(spec.rho, gap);
                    const double v = ar1_innovation_variance(spec.rho, gap);
                    rows.row(j) = (rows.row(j) - phi * rows.row(j - 1)) / std::sqrt(v);
                    stats.logdet += std::log(v);
                }
                break;
            }
            case CovarianceSpec::Kind::CS: {
                check_rho(spec.rho);
                const double md = static_cast<double>(m);
                const double a = 1.0 / std::sqrt(1.0 - spec.rho);
                const double c = 1.0 / std::sqrt(1.0 + (md - 1.0) * spec.rho);
                Eigen::RowVectorXd mean = rows.colwise().mean();
                // W = a (I - J/m) + c J/m
                rows = a * rows;
                rows.rowwise() += (c - a) * mean;
                stats.logdet += (md - 1.0) * std::log1p(-spec.rho) + std::log1p((md - 1.0) * spec.rho);
                break;
            }
            case CovarianceSpec::Kind::WorkingFixed:
            case CovarianceSpec::Kind::Unstructured: {
                const Matrix& S = spec.blocks[i];
                if (S.rows() != m || S.cols() != m) {
                    std::ostringstream msg;
                    msg << "covariance block of subject '" << ds.subject_ids()[i] << "' is " << S.rows() << "x"
                        << S.cols() << ", expected " << m << "x" << m;
                    throw ArgumentError(msg.str());
                }
                const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
                if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
                    throw DecompositionError("covariance block of subject '" + ds.subject_ids()[i] +
                                             "' is not symmetric");
                Eigen::LLT<Matrix> llt(S);
                ++stats.factorizations;
                if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().minCoeff() > 0.0))
                    throw DecompositionError("covariance block of subject '" + ds.subject_ids()[i] +
                                             "' is not positive definite");
                llt.matrixL().solveInPlace(rows);
                stats.logdet += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
                break;
            }
        }
        if (!spec.is_explicit()) {
            if (inv_sd != 1.0) rows *= inv_sd;
            stats.logdet += static_cast<double>(m) * log_sigma2;
        }
    }
    if (!M.allFinite()) throw NumericError("whitening produced non-finite values");
    return stats;
}

}  // namespace

CovarianceSpec CovarianceSpec::independence(double sigma2) {
    check_sigma2(sigma2);
    CovarianceSpec s;
    s.kind = Kind::Independence;
    s.sigma2 = sigma2;
    return s;
}

CovarianceSpec CovarianceSpec::ar1(double rho, double sigma2) {
    check_rho(rho);
    check_sigma2(sigma2);
    CovarianceSpec s;
    s.kind = Kind::AR1;
    s.rho = rho;
    s.sigma2 = sigma2;
    return s;
}

CovarianceSpec CovarianceSpec::cs(double rho, double sigma2) {
    check_rho(rho);
    check_sigma2(sigma2);
    CovarianceSpec s;
    s.kind = Kind::CS;
    s.rho = rho;
    s.sigma2 = sigma2;
    return s;
}

CovarianceSpec CovarianceSpec::parametric(Structure st, double rho, double sigma2) {
    switch (st) {
        case Structure::AR1: return ar1(rho, sigma2);
        case Structure::CS: return cs(rho, sigma2);
        case Structure::Independence: return independence(sigma2);
    }
    throw ArgumentError("unknown structure");
}

CovarianceSpec CovarianceSpec::working_fixed(std::vector<Matrix> blocks) {
    CovarianceSpec s;
    s.kind = Kind::WorkingFixed;
    s.blocks = std::move(blocks);
    return s;
}

CovarianceSpec CovarianceSpec::unstructured(std::vector<Matrix> blocks) {
    CovarianceSpec s;
    s.kind = Kind::Unstructured;
    s.blocks = std::move(blocks);
    return s;
}

Matrix ar1_matrix(const Vector& times, double rho) {
    check_rho(rho);
    const auto n = times.size();
    for (Eigen::Index j = 1; j < n; ++j)
        if (!(times[j] > times[j - 1])) throw ArgumentError("AR(1) times must be strictly increasing");
    Matrix R(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) R(j, k) = ar1_coefficient(rho, std::abs(times[j] - times[k]));
    return R;
}

Matrix cs_matrix(std::size_t n, double rho) {
    check_rho(rho);
    const auto m = static_cast<Eigen::Index>(n);
    Matrix R = Matrix::Constant(m, m, rho);
    R.diagonal().setOnes();
    return R;
}

InverseLogdet closed_form_inverse_logdet(Structure s, const Vector& times, double rho) {
    check_rho(rho);
    const auto n = times.size();
    InverseLogdet out;
    switch (s) {
        case Structure::Independence:
            out.inverse = Matrix::Identity(n, n);
            out.logdet = 0.0;
            break;
        case Structure::AR1: {
            for (Eigen::Index j = 1; j < n; ++j)
                if (!(times[j] > times[j - 1])) throw ArgumentError("AR(1) times must be strictly increasing");
            out.inverse = Matrix::Zero(n, n);
            if (n == 0) break;
            out.inverse(0, 0) = 1.0;
            for (Eigen::Index j = 1; j < n; ++j) {
                const double gap = times[j] - times[j - 1];
                const double phi = ar1_coefficient(rho, gap);
                const double v = ar1_innovation_variance(rho, gap);
                // Contribution of innovation j: (e_j - phi e_{j-1})(...)' / v
                out.inverse(j, j) += 1.0 / v;
                out.inverse(j - 1, j - 1) += phi * phi / v;
                out.inverse(j, j - 1) -= phi / v;
                out.inverse(j - 1, j) -= phi / v;
                out.logdet += std::log(v);
            }
            break;
        }
        case Structure::CS: {
            const double md = static_cast<double>(n);
            const double c = rho / (1.0 + (md - 1.0) * rho);
            out.inverse = Matrix::Constant(n, n, -c / (1.0 - rho));
            out.inverse.diagonal().array() += 1.0 / (1.0 - rho);
            out.logdet = (md - 1.0) * std::log1p(-rho) + std::log1p((md - 1.0) * rho);
            break;
        }
    }
    return out;
}

Matrix covariance_block(const CovarianceSpec& spec, const LongitudinalDataset& ds, std::size_t subject) {
    const auto m = ds.subject_size(subject);
    switch (spec.kind) {
        case CovarianceSpec::Kind::Independence:
            return spec.sigma2 * Matrix::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        case CovarianceSpec::Kind::AR1:
            return spec.sigma2 * ar1_matrix(ds.subject_times(subject), spec.rho);
        case CovarianceSpec::Kind::CS:
            return spec.sigma2 * cs_matrix(m, spec.rho);
        case CovarianceSpec::Kind::WorkingFixed:
        case CovarianceSpec::Kind::Unstructured:
            return spec.blocks.at(subject);
    }
    throw ArgumentError("unknown covariance kind");
}

std::vector<Matrix> covariance_blocks(const CovarianceSpec& spec, const LongitudinalDataset& ds) {
    std::vector<Matrix> out;
    out.reserve(ds.num_subjects());
    for (std::size_t i = 0; i < ds.num_subjects(); ++i) out.push_back(covariance_block(spec, ds, i));
    return out;
}

WhitenedSystem whiten(const CovarianceSpec& spec, const LongitudinalDataset& ds, const DesignExpansion& design) {
    if (design.U.rows() != static_cast<Eigen::Index>(ds.num_observations()))
        throw ArgumentError("design rows do not match the dataset");
    WhitenedSystem out;
    const auto cols = design.U.cols();
    Matrix joint(design.U.rows(), cols + 1);
    joint.leftCols(cols) = design.U;
    joint.col(cols) = ds.responses();
    auto stats = whiten_rows(spec, ds, joint);
    out.Y = joint.col(cols);
    joint.conservativeResize(Eigen::NoChange, cols);
    out.U = std::move(joint);
    out.logdet = stats.logdet;
    out.factorizations = stats.factorizations;
    return out;
}

Vector whiten_vector(const CovarianceSpec& spec, const LongitudinalDataset& ds, const Vector& v) {
    if (v.size() != static_cast<Eigen::Index>(ds.num_observations()))
        throw ArgumentError("vector length does not match the dataset");
    Matrix m = v;
    whiten_rows(spec, ds, m);
    return m.col(0);
}

double covariance_logdet(const CovarianceSpec& spec, const LongitudinalDataset& ds) {
    Matrix dummy = Matrix::Zero(static_cast<Eigen::Index>(ds.num_observations()), 1);
    return whiten_rows(spec, ds, dummy).logdet;
}

}  // namespace nvcssl
