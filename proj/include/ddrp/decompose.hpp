#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "ddrp/errors.hpp"
#include "ddrp/matrix.hpp"

namespace ddrp {

// Eigendecomposition of a symmetric matrix. Columns of `eigenvectors` are the
// unit eigenvectors, paired with `eigenvalues` sorted descending.
struct SymEig {
    Vector eigenvalues;
    DenseMatrix eigenvectors;
};

struct Svd {
    DenseMatrix u;
    Vector singular_values;  // descending, non-negative
    DenseMatrix v;
};

// Q with Q^T Q = Sigma, built as D^{1/2} U^T from the eigendecomposition.
// The eigen pair is kept so the inverse transpose needs no second solve.
struct Factorization {
    DenseMatrix q;
    DenseMatrix u;              // eigenvectors of Sigma
    Vector eigenvalues;         // clamped, descending
};

namespace detail {

inline void check_square_symmetric(const DenseMatrix& s, double rel_tol) {
    if (s.n_rows != s.n_cols)
        throw DimensionError("sym_eig: matrix is " + std::to_string(s.n_rows) + "x" +
                             std::to_string(s.n_cols));
    const double scale = s.frobenius_norm();
    for (std::size_t i = 0; i < s.n_rows; ++i)
        for (std::size_t j = i + 1; j < s.n_cols; ++j)
            if (std::abs(s(i, j) - s(j, i)) > rel_tol * (scale > 0.0 ? scale : 1.0))
                throw DomainError("sym_eig: input not symmetric at (" + std::to_string(i) + "," +
                                  std::to_string(j) + ")");
}

// Sort eigen/singular values descending, permuting the paired columns.
inline std::vector<std::size_t> descending_order(const Vector& vals) {
    std::vector<std::size_t> order(vals.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
    return order;
}

inline DenseMatrix permute_columns(const DenseMatrix& m, const std::vector<std::size_t>& order) {
    DenseMatrix out(m.n_rows, m.n_cols);
    for (std::size_t j = 0; j < order.size(); ++j)
        for (std::size_t i = 0; i < m.n_rows; ++i) out(i, j) = m(i, order[j]);
    return out;
}

} // namespace detail

// Cyclic Jacobi rotations; unconditionally convergent for symmetric input.
// `tol` is the off-diagonal threshold relative to ||S||_F.
inline SymEig sym_eig(const DenseMatrix& s_in, double tol = 1e-13) {
    detail::check_square_symmetric(s_in, 1e-10);
    const std::size_t d = s_in.n_rows;

    DenseMatrix a = s_in;
    // Symmetrize exactly so rotations act on a genuinely symmetric matrix.
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            const double m = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = m;
            a(j, i) = m;
        }
    DenseMatrix v = DenseMatrix::identity(d);

    const double norm = std::max(a.frobenius_norm(), 1e-300);
    const double thresh = tol * norm;
    const int max_sweeps = 64;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += a(p, q) * a(p, q);
        off = std::sqrt(2.0 * off);
        if (off <= thresh) {
            Vector evals(d);
            for (std::size_t i = 0; i < d; ++i) evals[i] = a(i, i);
            auto order = detail::descending_order(evals);
            Vector sorted(d);
            for (std::size_t i = 0; i < d; ++i) sorted[i] = evals[order[i]];
            return {std::move(sorted), detail::permute_columns(v, order)};
        }

        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                // Small rotations are still applied near convergence; skipping
                // them stalls the final digits.
                if (std::abs(apq) <= 1e-3 * thresh / static_cast<double>(d)) continue;

                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;

                for (std::size_t l = 0; l < d; ++l) {
                    const double alp = a(l, p), alq = a(l, q);
                    a(l, p) = c * alp - sn * alq;
                    a(l, q) = sn * alp + c * alq;
                }
                for (std::size_t l = 0; l < d; ++l) {
                    const double apl = a(p, l), aql = a(q, l);
                    a(p, l) = c * apl - sn * aql;
                    a(q, l) = sn * apl + c * aql;
                }
                for (std::size_t l = 0; l < d; ++l) {
                    const double vlp = v(l, p), vlq = v(l, q);
                    v(l, p) = c * vlp - sn * vlq;
                    v(l, q) = sn * vlp + c * vlq;
                }
            }
        }
    }
    throw ConvergenceError("sym_eig: no convergence in 64 sweeps (d=" + std::to_string(d) + ")");
}

// One-sided Jacobi (Hestenes): orthogonalize column pairs of the working copy;
// singular values are the final column norms.
inline Svd svd(const DenseMatrix& m_in) {
    if (!m_in.all_finite()) throw DomainError("svd: non-finite entries");
    if (m_in.n_rows < m_in.n_cols) {
        Svd t = svd(m_in.transposed());
        return {std::move(t.v), std::move(t.singular_values), std::move(t.u)};
    }

    const std::size_t m = m_in.n_rows, n = m_in.n_cols;
    DenseMatrix a = m_in;
    DenseMatrix v = DenseMatrix::identity(n);

    const int max_sweeps = 64;
    const double eps = 1e-15;
    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t l = 0; l < m; ++l) {
                    const double ai = a(l, i), aj = a(l, j);
                    alpha += ai * ai;
                    beta += aj * aj;
                    gamma += ai * aj;
                }
                if (std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                converged = false;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = c * t;

                for (std::size_t l = 0; l < m; ++l) {
                    const double ai = a(l, i), aj = a(l, j);
                    a(l, i) = c * ai - sn * aj;
                    a(l, j) = sn * ai + c * aj;
                }
                for (std::size_t l = 0; l < n; ++l) {
                    const double vi = v(l, i), vj = v(l, j);
                    v(l, i) = c * vi - sn * vj;
                    v(l, j) = sn * vi + c * vj;
                }
            }
        }
    }
    if (!converged)
        throw ConvergenceError("svd: no convergence in 64 sweeps (" + std::to_string(m) + "x" +
                               std::to_string(n) + ")");

    Vector sigma(n);
    DenseMatrix u(m, n);
    double sigma_max = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < m; ++l) s += a(l, j) * a(l, j);
        sigma[j] = std::sqrt(s);
        sigma_max = std::max(sigma_max, sigma[j]);
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (sigma[j] > sigma_max * 1e-290 && sigma[j] > 0.0) {
            for (std::size_t l = 0; l < m; ++l) u(l, j) = a(l, j) / sigma[j];
        } else {
            // Numerically zero column: complete U with a unit vector orthogonal
            // to the columns already placed.
            sigma[j] = 0.0;
            for (std::size_t basis = 0; basis < m; ++basis) {
                Vector cand(m, 0.0);
                cand[basis] = 1.0;
                for (std::size_t p = 0; p < n; ++p) {
                    if (p == j) continue;
                    double proj = 0.0;
                    for (std::size_t l = 0; l < m; ++l) proj += cand[l] * u(l, p);
                    for (std::size_t l = 0; l < m; ++l) cand[l] -= proj * u(l, p);
                }
                const double nrm = std::sqrt(squared_norm(cand));
                if (nrm > 0.5) {
                    for (std::size_t l = 0; l < m; ++l) u(l, j) = cand[l] / nrm;
                    break;
                }
            }
        }
    }

    auto order = detail::descending_order(sigma);
    Vector sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = sigma[order[i]];
    return {detail::permute_columns(u, order), std::move(sorted),
            detail::permute_columns(v, order)};
}

// Q = D^{1/2} U^T with eigenvalues clamped below at floor * lambda_max.
inline Factorization factor_covariance(const DenseMatrix& sigma, double floor = 1e-10) {
    SymEig eig = sym_eig(sigma);
    const std::size_t d = eig.eigenvalues.size();
    const double lambda_max = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.front();
    if (lambda_max <= 0.0)
        throw DomainError("factor_covariance: degenerate covariance (largest eigenvalue " +
                          std::to_string(lambda_max) + " <= 0)");
    for (double lam : eig.eigenvalues)
        if (lam < -1e-10 * lambda_max)
            throw DomainError("factor_covariance: input not numerically PSD (eigenvalue " +
                              std::to_string(lam) + ")");

    const double clamp = std::max(floor, 1e-12) * lambda_max;
    Vector clamped(d);
    for (std::size_t i = 0; i < d; ++i) clamped[i] = std::max(eig.eigenvalues[i], clamp);

    DenseMatrix q(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        const double root = std::sqrt(clamped[i]);
        for (std::size_t j = 0; j < d; ++j) q(i, j) = root * eig.eigenvectors(j, i);
    }
    return {std::move(q), std::move(eig.eigenvectors), std::move(clamped)};
}

// Q^{-T} = D^{-1/2} U^T. `floor` is an absolute lower bound on the clamped
// eigenvalues; anything at or below it cannot be inverted meaningfully.
inline DenseMatrix inverse_transpose_factor(const Factorization& f, double floor = 0.0) {
    const std::size_t d = f.eigenvalues.size();
    DenseMatrix out(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        if (f.eigenvalues[i] <= floor || f.eigenvalues[i] <= 0.0)
            throw SingularityError("inverse_transpose_factor: eigenvalue " +
                                   std::to_string(f.eigenvalues[i]) + " at index " +
                                   std::to_string(i) + " is below the floor");
        const double inv_root = 1.0 / std::sqrt(f.eigenvalues[i]);
        for (std::size_t j = 0; j < d; ++j) out(i, j) = inv_root * f.u(j, i);
    }
    return out;
}

// Solve (S) w = rhs for symmetric PSD S through the eigendecomposition.
inline Vector solve_sym_psd(const DenseMatrix& s, const Vector& rhs, double rel_floor = 1e-12) {
    if (s.n_rows != rhs.size())
        throw DimensionError("solve_sym_psd: rhs length " + std::to_string(rhs.size()));
    SymEig eig = sym_eig(s);
    const double lambda_max = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.front();
    if (lambda_max <= 0.0) throw SingularityError("solve_sym_psd: matrix is zero or negative");
    const std::size_t d = rhs.size();
    Vector w(d, 0.0);
    // w = U D^{-1} U^T rhs
    for (std::size_t i = 0; i < d; ++i) {
        if (eig.eigenvalues[i] <= rel_floor * lambda_max)
            throw SingularityError("solve_sym_psd: eigenvalue " +
                                   std::to_string(eig.eigenvalues[i]) + " at index " +
                                   std::to_string(i) + " below relative floor");
        double proj = 0.0;
        for (std::size_t l = 0; l < d; ++l) proj += eig.eigenvectors(l, i) * rhs[l];
        proj /= eig.eigenvalues[i];
        for (std::size_t l = 0; l < d; ++l) w[l] += proj * eig.eigenvectors(l, i);
    }
    return w;
}

} // namespace ddrp
