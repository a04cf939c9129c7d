#pragma once

#include <cstddef>
#include <vector>

#include "nvcssl/data.hpp"
#include "nvcssl/spline.hpp"

namespace nvcssl {

// Parametric within-subject correlation families.
enum class Structure { Independence, AR1, CS };

const char* to_string(Structure s);
Structure parse_structure(const std::string& name);

// Per-subject error covariance. For the parametric kinds the block of subject
// i is sigma2 * R_i(rho); for the explicit kinds it is blocks[i] as given.
struct CovarianceSpec {
    enum class Kind { Independence, AR1, CS, WorkingFixed, Unstructured };

    Kind kind = Kind::Independence;
    double rho = 0.0;
    double sigma2 = 1.0;
    std::vector<Matrix> blocks;

    static CovarianceSpec independence(double sigma2 = 1.0);
    static CovarianceSpec ar1(double rho, double sigma2 = 1.0);
    static CovarianceSpec cs(double rho, double sigma2 = 1.0);
    static CovarianceSpec parametric(Structure s, double rho, double sigma2 = 1.0);
    static CovarianceSpec working_fixed(std::vector<Matrix> blocks);
    static CovarianceSpec unstructured(std::vector<Matrix> blocks);

    bool is_explicit() const { return kind == Kind::WorkingFixed || kind == Kind::Unstructured; }
};

Matrix ar1_matrix(const Vector& times, double rho);
Matrix cs_matrix(std::size_t n, double rho);

struct InverseLogdet {
    Matrix inverse;
    double logdet = 0.0;
};

// Closed forms. AR(1) handles arbitrary gaps: the inverse is tridiagonal and
// log|R| = sum_j log(1 - rho^(2*gap_j)). For CS only times.size() is used.
InverseLogdet closed_form_inverse_logdet(Structure s, const Vector& times, double rho);

// Dense materialization of subject i's covariance block.
Matrix covariance_block(const CovarianceSpec& spec, const LongitudinalDataset& ds, std::size_t subject);
std::vector<Matrix> covariance_blocks(const CovarianceSpec& spec, const LongitudinalDataset& ds);

struct WhitenedSystem {
    Vector Y;
    Matrix U;
    double logdet = 0.0;              // sum_i log|block_i|
    std::size_t factorizations = 0;   // dense Cholesky factorizations performed
};

// Pre-multiplies Y and U blockwise by W_i with W_i' W_i = block_i^{-1}. AR(1)
// uses the bidiagonal innovations factor, CS the closed-form symmetric root,
// explicit blocks the inverse Cholesky factor.
WhitenedSystem whiten(const CovarianceSpec& spec, const LongitudinalDataset& ds, const DesignExpansion& design);

// Whitening of a single stacked vector (residuals, responses).
Vector whiten_vector(const CovarianceSpec& spec, const LongitudinalDataset& ds, const Vector& v);

// sum_i log|block_i|.
double covariance_logdet(const CovarianceSpec& spec, const LongitudinalDataset& ds);

}  // namespace nvcssl
