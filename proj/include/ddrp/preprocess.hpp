#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <variant>

#include "ddrp/decompose.hpp"
#include "ddrp/errors.hpp"
#include "ddrp/matrix.hpp"
#include "ddrp/moments.hpp"
#include "ddrp/rng.hpp"

namespace ddrp {

// An invertible map A applied to the x side while A^{-T} is applied to the w
// side, so <apply_x(x), apply_w(w)> == <x, w> exactly (up to roundoff) while
// the variance profile of projected inner products changes.
struct IdentityPre {};

struct DiagonalPre {
    Vector scale;  // strictly positive; x side multiplies, w side divides
};

struct FullPre {
    DenseMatrix a;
    DenseMatrix a_inv_t;  // stored explicitly from the closed form, never by
                          // numerically inverting `a`
};

struct Preprocessor {
    std::variant<IdentityPre, DiagonalPre, FullPre> variant;

    bool is_identity() const { return std::holds_alternative<IdentityPre>(variant); }
    bool is_diagonal() const { return std::holds_alternative<DiagonalPre>(variant); }
    bool is_full() const { return std::holds_alternative<FullPre>(variant); }
};

// Phi(A) = E |Ax|^2 |A^{-T}w|^2 for the three builders, plus the universal
// lower bound (squared nuclear norm of Q_X Q_W^T) that the optimal attains.
struct PhiReport {
    double phi_identity = 0.0;
    double phi_quick = 0.0;
    double phi_optimal = 0.0;
    double optimal_lower_bound = 0.0;
};

namespace detail {

// Coordinates whose second moment is below eps * max(diag) keep scale 1 so
// the preprocessor stays invertible. Returns true where the guard engaged.
inline std::vector<bool> near_zero_mask(const Vector& diag, double eps) {
    double mx = 0.0;
    for (double v : diag) mx = std::max(mx, v);
    std::vector<bool> mask(diag.size(), false);
    for (std::size_t i = 0; i < diag.size(); ++i) mask[i] = diag[i] < eps * mx;
    return mask;
}

inline void check_nonnegative(const Vector& diag, const char* who) {
    for (std::size_t i = 0; i < diag.size(); ++i)
        if (diag[i] < 0.0)
            throw DomainError(std::string(who) + ": negative second-moment entry at " +
                              std::to_string(i));
}

} // namespace detail

inline double default_diag_eps() { return 1e-9; }

// Diagonal minimizer of Phi: scale_i = (Sigma_W,ii / Sigma_X,ii)^{1/4},
// equivalently d_X(i)^{-1/2} d_W(i)^{1/2} on the square-rooted diagonals.
inline Preprocessor build_quick(const Vector& diag_x, const Vector& diag_w,
                                double eps = default_diag_eps()) {
    if (diag_x.size() != diag_w.size())
        throw DimensionError("build_quick: diag lengths " + std::to_string(diag_x.size()) +
                             " vs " + std::to_string(diag_w.size()));
    detail::check_nonnegative(diag_x, "build_quick");
    detail::check_nonnegative(diag_w, "build_quick");

    const auto guard_x = detail::near_zero_mask(diag_x, eps);
    const auto guard_w = detail::near_zero_mask(diag_w, eps);
    Vector scale(diag_x.size());
    for (std::size_t i = 0; i < scale.size(); ++i)
        scale[i] = (guard_x[i] || guard_w[i]) ? 1.0 : std::pow(diag_w[i] / diag_x[i], 0.25);
    return {DiagonalPre{std::move(scale)}};
}

// scale_i = (Sigma_X,ii)^lambda with the same zero guard. lambda = -0.25
// matches build_quick against an isotropic w side; lambda = -0.5 is
// per-coordinate normalization; lambda = 0 is exact identity scales.
inline Preprocessor build_lambda(const Vector& diag_x, double lambda,
                                 double eps = default_diag_eps()) {
    detail::check_nonnegative(diag_x, "build_lambda");
    const auto guard = detail::near_zero_mask(diag_x, eps);
    Vector scale(diag_x.size());
    for (std::size_t i = 0; i < scale.size(); ++i)
        scale[i] = guard[i] ? 1.0 : std::pow(diag_x[i], lambda);
    return {DiagonalPre{std::move(scale)}};
}

// CCA-balancing construction: with Sigma_X = Q_X^T Q_X, Sigma_W = Q_W^T Q_W
// and Q_X Q_W^T = U D V^T,
//   A      = D^{1/2} U^T Q_X^{-T}
//   A^{-T} = D^{1/2} V^T Q_W^{-T}
// which satisfies A Sigma_X A^T = A^{-T} Sigma_W A^{-1}.
inline Preprocessor build_optimal(const SecondMoment& sigma_x, const SecondMoment& sigma_w,
                                  double floor = 1e-10) {
    if (!sigma_x.has_full() || !sigma_w.has_full())
        throw ConfigError("build_optimal: full second moments required on both sides");
    if (sigma_x.dim != sigma_w.dim)
        throw DimensionError("build_optimal: dims " + std::to_string(sigma_x.dim) + " vs " +
                             std::to_string(sigma_w.dim));

    Factorization qx = factor_covariance(*sigma_x.full, floor);
    Factorization qw = factor_covariance(*sigma_w.full, floor);
    const DenseMatrix qx_inv_t = inverse_transpose_factor(qx);
    const DenseMatrix qw_inv_t = inverse_transpose_factor(qw);

    const Svd mid = svd(matmul_transposed(qx.q, qw.q));
    const std::size_t d = sigma_x.dim;
    for (std::size_t i = 0; i < d; ++i)
        if (!(mid.singular_values[i] > 0.0))
            throw SingularityError(
                "build_optimal: Q_X Q_W^T is numerically singular at index " + std::to_string(i) +
                "; regularize the covariances (raise the eigenvalue floor)");

    // rows of D^{1/2} U^T, then right-multiplied by the inverse factors
    DenseMatrix dsu(d, d), dsv(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        const double root = std::sqrt(mid.singular_values[i]);
        for (std::size_t j = 0; j < d; ++j) {
            dsu(i, j) = root * mid.u(j, i);
            dsv(i, j) = root * mid.v(j, i);
        }
    }
    DenseMatrix a = matmul(dsu, qx_inv_t);
    DenseMatrix a_inv_t = matmul(dsv, qw_inv_t);
    return {FullPre{std::move(a), std::move(a_inv_t)}};
}

// --- application -----------------------------------------------------------

inline Vector apply_x(const Preprocessor& p, std::span<const double> x) {
    if (p.is_identity()) return Vector(x.begin(), x.end());
    if (p.is_diagonal()) {
        const auto& s = std::get<DiagonalPre>(p.variant).scale;
        if (s.size() != x.size()) throw DimensionError("apply_x: vector length");
        Vector out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = s[i] * x[i];
        return out;
    }
    return matvec(std::get<FullPre>(p.variant).a, x);
}

inline Vector apply_w(const Preprocessor& p, std::span<const double> w) {
    if (p.is_identity()) return Vector(w.begin(), w.end());
    if (p.is_diagonal()) {
        const auto& s = std::get<DiagonalPre>(p.variant).scale;
        if (s.size() != w.size()) throw DimensionError("apply_w: vector length");
        Vector out(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] / s[i];
        return out;
    }
    return matvec(std::get<FullPre>(p.variant).a_inv_t, w);
}

// Row-wise application to matrices: rows of the result are A * row (x side)
// or A^{-T} * row (w side).
inline DenseMatrix apply_x(const Preprocessor& p, const DenseMatrix& m) {
    if (p.is_identity()) return m;
    if (p.is_diagonal()) {
        const auto& s = std::get<DiagonalPre>(p.variant).scale;
        if (s.size() != m.n_cols) throw DimensionError("apply_x: column count");
        DenseMatrix out = m;
        for (std::size_t i = 0; i < m.n_rows; ++i) {
            double* row = out.values.data() + i * m.n_cols;
            for (std::size_t j = 0; j < m.n_cols; ++j) row[j] *= s[j];
        }
        return out;
    }
    return matmul_transposed(m, std::get<FullPre>(p.variant).a);
}

inline DenseMatrix apply_w(const Preprocessor& p, const DenseMatrix& m) {
    if (p.is_identity()) return m;
    if (p.is_diagonal()) {
        const auto& s = std::get<DiagonalPre>(p.variant).scale;
        if (s.size() != m.n_cols) throw DimensionError("apply_w: column count");
        DenseMatrix out = m;
        for (std::size_t i = 0; i < m.n_rows; ++i) {
            double* row = out.values.data() + i * m.n_cols;
            for (std::size_t j = 0; j < m.n_cols; ++j) row[j] /= s[j];
        }
        return out;
    }
    return matmul_transposed(m, std::get<FullPre>(p.variant).a_inv_t);
}

// Sparse rows stay sparse under diagonal scaling. Full preprocessors densify
// every row, which defeats the point of a sparse container; the caller must
// densify explicitly if that is really wanted.
inline SparseMatrixCSR apply_x(const Preprocessor& p, const SparseMatrixCSR& m) {
    if (p.is_full()) throw ConfigError("apply_x: full preprocessor on sparse input");
    if (p.is_identity()) return m;
    const auto& s = std::get<DiagonalPre>(p.variant).scale;
    if (s.size() != m.n_cols) throw DimensionError("apply_x: column count");
    SparseMatrixCSR out = m;
    for (std::size_t p_ = 0; p_ < out.values.size(); ++p_)
        out.values[p_] *= s[out.col_indices[p_]];
    return out;
}

inline SparseMatrixCSR apply_w(const Preprocessor& p, const SparseMatrixCSR& m) {
    if (p.is_full()) throw ConfigError("apply_w: full preprocessor on sparse input");
    if (p.is_identity()) return m;
    const auto& s = std::get<DiagonalPre>(p.variant).scale;
    if (s.size() != m.n_cols) throw DimensionError("apply_w: column count");
    SparseMatrixCSR out = m;
    for (std::size_t p_ = 0; p_ < out.values.size(); ++p_)
        out.values[p_] /= s[out.col_indices[p_]];
    return out;
}

// --- Phi evaluation ---------------------------------------------------------

// Phi(A) = Tr(A^T A Sigma_X) * Tr(A^{-1} A^{-T} Sigma_W). Identity and
// diagonal variants touch only the moment diagonals; the full variant needs
// full moment matrices.
inline double phi_exact(const Preprocessor& p, const SecondMoment& sigma_x,
                        const SecondMoment& sigma_w) {
    if (sigma_x.dim != sigma_w.dim) throw DimensionError("phi_exact: moment dims differ");
    if (p.is_identity()) {
        double tx = 0.0, tw = 0.0;
        for (double v : sigma_x.diag) tx += v;
        for (double v : sigma_w.diag) tw += v;
        return tx * tw;
    }
    if (p.is_diagonal()) {
        const auto& s = std::get<DiagonalPre>(p.variant).scale;
        if (s.size() != sigma_x.dim) throw DimensionError("phi_exact: scale length");
        double tx = 0.0, tw = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            tx += s[i] * s[i] * sigma_x.diag[i];
            tw += sigma_w.diag[i] / (s[i] * s[i]);
        }
        return tx * tw;
    }
    if (!sigma_x.has_full() || !sigma_w.has_full())
        throw ConfigError("phi_exact: full preprocessor needs full second moments");
    const auto& fp = std::get<FullPre>(p.variant);
    const DenseMatrix gram_a = matmul(fp.a.transposed(), fp.a);           // A^T A
    const DenseMatrix gram_inv = matmul(fp.a_inv_t.transposed(), fp.a_inv_t);  // A^{-1} A^{-T}
    double tx = 0.0, tw = 0.0;
    const DenseMatrix& sx = *sigma_x.full;
    const DenseMatrix& sw = *sigma_w.full;
    for (std::size_t i = 0; i < sx.values.size(); ++i) {
        tx += gram_a.values[i] * sx.values[i];
        tw += gram_inv.values[i] * sw.values[i];
    }
    return tx * tw;
}

// Vector sampler interface for the Monte-Carlo estimate: fills `out` with one
// draw using the supplied stream.
using VectorSampler = std::function<void(rng::Stream&, std::span<double>)>;

// Gaussian sampler with the given second moment: x = Q^T g matches E[xx^T]
// exactly. Diagonal-only moments scale coordinates by sqrt(diag).
inline VectorSampler gaussian_sampler(const SecondMoment& m) {
    if (m.has_full()) {
        Factorization f = factor_covariance(*m.full);
        DenseMatrix qt = f.q.transposed();
        return [qt = std::move(qt)](rng::Stream& s, std::span<double> out) {
            Vector g(qt.n_cols);
            for (double& v : g) v = s.next_gaussian();
            const Vector x = matvec(qt, g);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i];
        };
    }
    Vector roots(m.diag.size());
    for (std::size_t i = 0; i < roots.size(); ++i) roots[i] = std::sqrt(m.diag[i]);
    return [roots = std::move(roots)](rng::Stream& s, std::span<double> out) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = roots[i] * s.next_gaussian();
    };
}

// Sample mean of |Ax|^2 |A^{-T}w|^2 over independent (x, w) pairs; trial i
// draws from its own derived stream, so sharding cannot change the result.
inline double phi_monte_carlo(const Preprocessor& p, const VectorSampler& sampler_x,
                              const VectorSampler& sampler_w, std::size_t dim,
                              std::size_t trials, std::uint64_t seed) {
    if (trials < 100) throw ConfigError("phi_monte_carlo: trials must be >= 100");
    const std::uint64_t base = rng::derive(seed, rng::Domain::PhiMonteCarlo);
    Vector x(dim), w(dim);
    double sum = 0.0, comp = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        rng::Stream stream(rng::derive(base, t));
        sampler_x(stream, x);
        sampler_w(stream, w);
        const Vector ax = apply_x(p, x);
        const Vector aw = apply_w(p, w);
        const double value = squared_norm(ax) * squared_norm(aw);
        const double y = value - comp;
        const double s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
    return sum / static_cast<double>(trials);
}

// Squared nuclear norm of Q_X Q_W^T: the universal lower bound on Phi that
// the CCA preprocessor attains.
inline double optimal_phi_lower_bound(const SecondMoment& sigma_x, const SecondMoment& sigma_w,
                                      double floor = 1e-10) {
    if (!sigma_x.has_full() || !sigma_w.has_full())
        throw ConfigError("optimal_phi_lower_bound: full second moments required");
    Factorization qx = factor_covariance(*sigma_x.full, floor);
    Factorization qw = factor_covariance(*sigma_w.full, floor);
    const Svd mid = svd(matmul_transposed(qx.q, qw.q));
    double nuclear = 0.0;
    for (double s : mid.singular_values) nuclear += s;
    return nuclear * nuclear;
}

inline PhiReport phi_report(const SecondMoment& sigma_x, const SecondMoment& sigma_w,
                            double floor = 1e-10, double eps = default_diag_eps()) {
    PhiReport r;
    r.phi_identity = phi_exact(Preprocessor{IdentityPre{}}, sigma_x, sigma_w);
    r.phi_quick = phi_exact(build_quick(sigma_x.diag, sigma_w.diag, eps), sigma_x, sigma_w);
    r.phi_optimal = phi_exact(build_optimal(sigma_x, sigma_w, floor), sigma_x, sigma_w);
    r.optimal_lower_bound = optimal_phi_lower_bound(sigma_x, sigma_w, floor);

    const double slack = 1e-9 * r.phi_identity + 1e-12;
    if (r.phi_optimal > r.phi_quick + slack || r.phi_quick > r.phi_identity + slack)
        throw Error("phi_report: ordering invariant violated (identity " +
                    std::to_string(r.phi_identity) + ", quick " + std::to_string(r.phi_quick) +
                    ", optimal " + std::to_string(r.phi_optimal) + ")");
    return r;
}

} // namespace ddrp
