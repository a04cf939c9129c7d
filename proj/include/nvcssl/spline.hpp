#pragma once

#include <cstddef>
#include <vector>

#include "nvcssl/data.hpp"

namespace nvcssl {

// Clamped B-spline basis on [t_min, t_max] with equispaced interior knots.
struct BasisSpec {
    int degree = 3;
    int dim = 8;  // number of basis functions per covariate
    double t_min = 0.0;
    double t_max = 1.0;
    std::vector<double> knots;  // dim + degree + 1 entries

    int num_interior_knots() const { return dim - degree - 1; }
};

BasisSpec make_basis(double t_min, double t_max, int dim, int degree = 3);

// Index of the first nonzero basis function at t and the degree+1 values
// starting there. Throws DomainError outside [t_min, t_max].
struct LocalBasis {
    int first = 0;
    std::vector<double> values;
};
LocalBasis eval_basis_local(const BasisSpec& basis, double t);

// All `dim` basis values at t.
Vector eval_basis(const BasisSpec& basis, double t);

// Curve sum_l gamma_l B_l(t) evaluated on a grid.
Vector eval_beta(const Vector& gamma_k, const BasisSpec& basis, const Vector& t_grid);

// Stacked design: row r is x'(t_r) B(t_r), so covariate k owns the contiguous
// column block [k*dim, (k+1)*dim).
struct DesignExpansion {
    BasisSpec basis;
    Matrix U;
    std::size_t num_groups = 0;

    Eigen::Index block_begin(std::size_t k) const { return static_cast<Eigen::Index>(k) * basis.dim; }
    Eigen::Index block_size() const { return basis.dim; }
};

DesignExpansion build_design(const LongitudinalDataset& ds, const BasisSpec& basis);

// `count` equispaced points spanning the basis support, both ends included.
Vector basis_grid(const BasisSpec& basis, std::size_t count);

}  // namespace nvcssl
