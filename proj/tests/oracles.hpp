#pragma once

// Slow, independent reference implementations. Nothing here calls into the
// library except for the plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Clamped knot vector with equispaced interior knots.
inline std::vector<double> clamped_knots(double lo, double hi, int dim, int degree) {
    std::vector<double> k;
    for (int i = 0; i <= degree; ++i) k.push_back(lo);
    const int interior = dim - degree - 1;
    for (int j = 1; j <= interior; ++j) k.push_back(lo + (hi - lo) * j / (interior + 1));
    for (int i = 0; i <= degree; ++i) k.push_back(hi);
    return k;
}

// Textbook recursion, right-continuous, with the last basis function closed
// at the right end.
inline double cox_de_boor(const std::vector<double>& k, int i, int deg, double t) {
    if (deg == 0) {
        const double hi = k.back();
        if (t == hi) return (k[i] < hi && k[i + 1] == hi) ? 1.0 : 0.0;
        return (k[i] <= t && t < k[i + 1]) ? 1.0 : 0.0;
    }
    double v = 0.0;
    const double l = k[i + deg] - k[i];
    const double r = k[i + deg + 1] - k[i + 1];
    if (l > 0) v += (t - k[i]) / l * cox_de_boor(k, i, deg - 1, t);
    if (r > 0) v += (k[i + deg + 1] - t) / r * cox_de_boor(k, i + 1, deg - 1, t);
    return v;
}

inline Vector basis_row(double lo, double hi, int dim, int degree, double t) {
    const auto k = clamped_knots(lo, hi, dim, degree);
    Vector out(dim);
    for (int i = 0; i < dim; ++i) out(i) = cox_de_boor(k, i, degree, t);
    return out;
}

// Gauss-Jordan with partial pivoting.
inline Matrix inverse(Matrix a) {
    const Eigen::Index n = a.rows();
    Matrix inv = Matrix::Identity(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        Eigen::Index piv = c;
        for (Eigen::Index r = c + 1; r < n; ++r)
            if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
        if (a(piv, c) == 0.0) throw std::runtime_error("singular");
        a.row(c).swap(a.row(piv));
        inv.row(c).swap(inv.row(piv));
        const double d = a(c, c);
        a.row(c) /= d;
        inv.row(c) /= d;
        for (Eigen::Index r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a(r, c);
            if (f == 0.0) continue;
            a.row(r) -= f * a.row(c);
            inv.row(r) -= f * inv.row(c);
        }
    }
    return inv;
}

// log|A| for symmetric positive definite A, by hand-rolled Cholesky.
inline double logdet_spd(const Matrix& a) {
    const Eigen::Index n = a.rows();
    Matrix L = Matrix::Zero(n, n);
    double out = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        double s = a(j, j);
        for (Eigen::Index k = 0; k < j; ++k) s -= L(j, k) * L(j, k);
        if (s <= 0) throw std::runtime_error("not positive definite");
        L(j, j) = std::sqrt(s);
        out += 2.0 * std::log(L(j, j));
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double t = a(i, j);
            for (Eigen::Index k = 0; k < j; ++k) t -= L(i, k) * L(j, k);
            L(i, j) = t / L(j, j);
        }
    }
    return out;
}

inline Matrix ar1(const Vector& times, double rho) {
    const Eigen::Index n = times.size();
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = std::pow(rho, std::abs(times(i) - times(j)));
    return m;
}

inline Matrix cs(Eigen::Index n, double rho) {
    Matrix m = Matrix::Constant(n, n, rho);
    m.diagonal().setOnes();
    return m;
}

inline double group_objective(const Vector& y, const Matrix& U, int d, const Vector& w, const Vector& g) {
    double v = 0.5 * (y - U * g).squaredNorm();
    for (Eigen::Index k = 0; k < w.size(); ++k) v += w(k) * g.segment(k * d, d).norm();
    return v;
}

// Accelerated proximal gradient with a fixed global step 1/||U||^2 and
// restart on objective increase. Slow but simple; run long enough it is
// accurate far below the solver tolerance.
inline Vector group_lasso(const Vector& y, const Matrix& U, int d, const Vector& w, int iters = 200000) {
    const double L = std::max(Eigen::JacobiSVD<Matrix>(U).singularValues()(0), 1e-12);
    const double step = 1.0 / (L * L);
    Vector x = Vector::Zero(U.cols()), z = x, prev = x;
    double t = 1.0;
    double fx = group_objective(y, U, d, w, x);
    auto prox = [&](const Vector& v) {
        Vector out = v;
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            const double nrm = v.segment(k * d, d).norm();
            const double thr = step * w(k);
            out.segment(k * d, d) = nrm <= thr ? Vector::Zero(d) : Vector((1.0 - thr / nrm) * v.segment(k * d, d));
        }
        return out;
    };
    for (int it = 0; it < iters; ++it) {
        Vector nx = prox(z + step * U.transpose() * (y - U * z));
        const double fn = group_objective(y, U, d, w, nx);
        if (fn > fx) {
            t = 1.0;
            z = x;
            continue;
        }
        const double nt = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        z = nx + ((t - 1.0) / nt) * (nx - x);
        prev = x;
        x = nx;
        t = nt;
        if (std::abs(fx - fn) < 1e-16 * std::max(1.0, std::abs(fn)) && (x - prev).norm() < 1e-14) break;
        fx = fn;
    }
    return x;
}

}  // namespace oracle
