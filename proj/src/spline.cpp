#include "nvcssl/spline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nvcssl/errors.hpp"

namespace nvcssl {

BasisSpec make_basis(double t_min, double t_max, int dim, int degree) {
    if (degree < 0) throw ArgumentError("spline degree must be non-negative");
    if (dim < degree + 1) {
        std::ostringstream msg;
        msg << "basis dimension " << dim << " is below degree + 1 = " << degree + 1;
        throw ArgumentError(msg.str());
    }
    if (!(t_max > t_min) || !std::isfinite(t_min) || !std::isfinite(t_max))
        throw ArgumentError("basis range must satisfy t_min < t_max");

    BasisSpec b;
    b.degree = degree;
    b.dim = dim;
    b.t_min = t_min;
    b.t_max = t_max;
    const int interior = dim - degree - 1;
    b.knots.reserve(static_cast<std::size_t>(dim + degree + 1));
    for (int i = 0; i <= degree; ++i) b.knots.push_back(t_min);
    for (int j = 1; j <= interior; ++j)
        b.knots.push_back(t_min + (t_max - t_min) * static_cast<double>(j) / static_cast<double>(interior + 1));
    for (int i = 0; i <= degree; ++i) b.knots.push_back(t_max);
    return b;
}

namespace {

// Knot span index s with knots[s] <= t < knots[s+1]; the right end maps to the
// last non-degenerate span.
int find_span(const BasisSpec& b, double t) {
    const int last = b.dim - 1;
    if (t >= b.t_max) return last;
    auto it = std::upper_bound(b.knots.begin() + b.degree, b.knots.begin() + last + 1, t);
    return static_cast<int>(it - b.knots.begin()) - 1;
}

}  // namespace

LocalBasis eval_basis_local(const BasisSpec& b, double t) {
    if (!(t >= b.t_min && t <= b.t_max)) {
        std::ostringstream msg;
        msg << "time " << t << " lies outside the basis range [" << b.t_min << ", " << b.t_max << "]";
        throw DomainError(msg.str());
    }
    const int p = b.degree;
    const int span = find_span(b, t);
    // de Boor's triangular scheme for the p+1 nonzero functions on the span.
    std::vector<double> values(static_cast<std::size_t>(p + 1), 0.0);
    std::vector<double> left(static_cast<std::size_t>(p + 1)), right(static_cast<std::size_t>(p + 1));
    values[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[static_cast<std::size_t>(j)] = t - b.knots[static_cast<std::size_t>(span + 1 - j)];
        right[static_cast<std::size_t>(j)] = b.knots[static_cast<std::size_t>(span + j)] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
            const double temp = values[static_cast<std::size_t>(r)] / denom;
            values[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
            saved = left[static_cast<std::size_t>(j - r)] * temp;
        }
        values[static_cast<std::size_t>(j)] = saved;
    }
    return LocalBasis{span - p, std::move(values)};
}

Vector eval_basis(const BasisSpec& b, double t) {
    auto local = eval_basis_local(b, t);
    Vector out = Vector::Zero(b.dim);
    for (std::size_t j = 0; j < local.values.size(); ++j)
        out[local.first + static_cast<Eigen::Index>(j)] = local.values[j];
    return out;
}

Vector eval_beta(const Vector& gamma_k, const BasisSpec& b, const Vector& t_grid) {
    if (gamma_k.size() != b.dim) throw ArgumentError("coefficient block length does not match basis dimension");
    Vector out(t_grid.size());
    for (Eigen::Index i = 0; i < t_grid.size(); ++i) {
        auto local = eval_basis_local(b, t_grid[i]);
        double acc = 0.0;
        for (std::size_t j = 0; j < local.values.size(); ++j)
            acc += gamma_k[local.first + static_cast<Eigen::Index>(j)] * local.values[j];
        out[i] = acc;
    }
    return out;
}

DesignExpansion build_design(const LongitudinalDataset& ds, const BasisSpec& b) {
    const auto N = static_cast<Eigen::Index>(ds.num_observations());
    const auto p = static_cast<Eigen::Index>(ds.num_covariates());
    DesignExpansion out;
    out.basis = b;
    out.num_groups = ds.num_covariates();
    out.U = Matrix::Zero(N, p * b.dim);
    const auto& X = ds.covariates();
    for (std::size_t i = 0; i < ds.num_subjects(); ++i) {
        for (auto r = ds.row_begin(i); r < ds.row_end(i); ++r) {
            const auto row = static_cast<Eigen::Index>(r);
            const double t = ds.times()[row];
            LocalBasis local;
            try {
                local = eval_basis_local(b, t);
            } catch (const DomainError&) {
                std::ostringstream msg;
                msg << "subject '" << ds.subject_ids()[i] << "' has time " << t << " outside the basis range ["
                    << b.t_min << ", " << b.t_max << "]";
                throw DomainError(msg.str());
            }
            for (Eigen::Index k = 0; k < p; ++k) {
                const double x = X(row, k);
                for (std::size_t j = 0; j < local.values.size(); ++j)
                    out.U(row, k * b.dim + local.first + static_cast<Eigen::Index>(j)) = x * local.values[j];
            }
        }
    }
    return out;
}

Vector basis_grid(const BasisSpec& b, std::size_t count) {
    if (count < 2) throw ArgumentError("grid needs at least two points");
    Vector g = Vector::LinSpaced(static_cast<Eigen::Index>(count), b.t_min, b.t_max);
    g[g.size() - 1] = b.t_max;
    return g;
}

}  // namespace nvcssl
