#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "ddrp/errors.hpp"
#include "ddrp/matrix.hpp"
#include "ddrp/rng.hpp"

namespace ddrp {

// DebugIdentity is for tests and debugging only: it requires k == d and
// stands in for "no compression" so pipelines can be checked exactly.
enum class ProjectionKind { SignScaled, Gaussian, DebugIdentity };

inline const char* to_string(ProjectionKind k) {
    switch (k) {
        case ProjectionKind::SignScaled: return "sign";
        case ProjectionKind::Gaussian: return "gaussian";
        case ProjectionKind::DebugIdentity: return "debug-identity";
    }
    return "?";
}

// Seeded description of the random k x d matrix R.
struct ProjectionSpec {
    std::uint64_t seed = 0;
    std::size_t input_dim = 0;   // d
    std::size_t target_dim = 0;  // k
    ProjectionKind kind = ProjectionKind::SignScaled;
};

struct ProjectionMatrix {
    ProjectionSpec spec;
    DenseMatrix values;  // k x d, entries pre-scaled by 1/sqrt(k)
};

// Upper-bound constant C in Var <= (C <x,w>^2 + |x|^2 |w|^2) / k, per kind.
// Signs attain C = 1 (the exact oracle below shows it); for Gaussian entries
// C = 2 is the documented bound used by the checks.
inline double valid_rp_constant(ProjectionKind kind) {
    return kind == ProjectionKind::Gaussian ? 2.0 : 1.0;
}

namespace detail {

inline std::uint64_t projection_stream_seed(const ProjectionSpec& spec) {
    std::uint64_t s = rng::derive(spec.seed, rng::Domain::Projection);
    s = rng::derive(s, static_cast<std::uint64_t>(spec.input_dim) * 0x100000001b3ULL ^
                           static_cast<std::uint64_t>(spec.target_dim));
    s = rng::derive(s, static_cast<std::uint64_t>(spec.kind));
    return s;
}

inline void check_spec(const ProjectionSpec& spec) {
    if (spec.target_dim < 1 || spec.input_dim < 1)
        throw DimensionError("projection: dims must be >= 1");
    if (spec.target_dim > spec.input_dim)
        throw DimensionError("projection: target dim " + std::to_string(spec.target_dim) +
                             " exceeds input dim " + std::to_string(spec.input_dim));
}

} // namespace detail

// Deterministic function of the spec; sign entries are exactly +-1/sqrt(k).
inline ProjectionMatrix sample_projection(const ProjectionSpec& spec) {
    detail::check_spec(spec);
    const std::size_t k = spec.target_dim, d = spec.input_dim;
    ProjectionMatrix r{spec, DenseMatrix(k, d)};

    if (spec.kind == ProjectionKind::DebugIdentity) {
        if (k != d) throw ConfigError("debug-identity projection requires k == d");
        r.values = DenseMatrix::identity(d);
        return r;
    }

    rng::Stream stream(detail::projection_stream_seed(spec));
    const double scale = 1.0 / std::sqrt(static_cast<double>(k));
    if (spec.kind == ProjectionKind::SignScaled) {
        std::uint64_t bits = 0;
        int avail = 0;
        for (double& v : r.values.values) {
            if (avail == 0) {
                bits = stream.next_u64();
                avail = 64;
            }
            v = (bits & 1u) ? scale : -scale;
            bits >>= 1;
            --avail;
        }
    } else {
        for (double& v : r.values.values) v = stream.next_gaussian() * scale;
    }
    return r;
}

// Rows of the output are R * (row of the input).
inline DenseMatrix project_rows(const DenseMatrix& m, const ProjectionMatrix& r) {
    if (m.n_cols != r.spec.input_dim)
        throw DimensionError("project_rows: data dim " + std::to_string(m.n_cols) +
                             " != projection dim " + std::to_string(r.spec.input_dim));
    return matmul_transposed(m, r.values);
}

inline DenseMatrix project_rows(const SparseMatrixCSR& m, const ProjectionMatrix& r) {
    if (m.n_cols != r.spec.input_dim)
        throw DimensionError("project_rows: data dim " + std::to_string(m.n_cols) +
                             " != projection dim " + std::to_string(r.spec.input_dim));
    // Walk nonzeros against a d x k transpose of R so each update is contiguous.
    const DenseMatrix rt = r.values.transposed();
    const std::size_t k = r.spec.target_dim;
    DenseMatrix out(m.n_rows, k);
    for (std::size_t i = 0; i < m.n_rows; ++i) {
        auto cols = m.row_cols(i);
        auto vals = m.row_vals(i);
        double* orow = out.values.data() + i * k;
        for (std::size_t p = 0; p < cols.size(); ++p) {
            const double v = vals[p];
            const double* rrow = rt.values.data() + cols[p] * k;
            for (std::size_t j = 0; j < k; ++j) orow[j] += v * rrow[j];
        }
    }
    return out;
}

// Exact variance of <Rx, Rw> for SignScaled R: the fourth-moment expansion of
// the estimator collapses to
//   (<x,w>^2 + |x|^2 |w|^2 - 2 sum_i x_i^2 w_i^2) / k .
inline double sign_variance_exact(std::span<const double> x, std::span<const double> w,
                                  std::size_t k) {
    if (x.size() != w.size())
        throw DimensionError("sign_variance_exact: " + std::to_string(x.size()) + " vs " +
                             std::to_string(w.size()));
    if (k < 1) throw DimensionError("sign_variance_exact: k must be >= 1");
    double ip = 0.0, nx = 0.0, nw = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        ip += x[i] * w[i];
        nx += x[i] * x[i];
        nw += w[i] * w[i];
        cross += x[i] * x[i] * w[i] * w[i];
    }
    return (ip * ip + nx * nw - 2.0 * cross) / static_cast<double>(k);
}

// Variance bound for any valid RP of the given kind.
inline double variance_bound(std::span<const double> x, std::span<const double> w, std::size_t k,
                             ProjectionKind kind) {
    const double ip = dot(x, w);
    const double b = valid_rp_constant(kind) * ip * ip + squared_norm(x) * squared_norm(w);
    return b / static_cast<double>(k);
}

namespace detail {

// <Rx, Rw> for one sampled R without materializing it. Consumes the identical
// sign stream as sample_projection, accumulating per-row sums of +-x and +-w.
inline double sign_sketch_inner(const ProjectionSpec& spec, std::span<const double> x,
                                std::span<const double> w) {
    rng::Stream stream(projection_stream_seed(spec));
    const std::size_t k = spec.target_dim, d = spec.input_dim;
    double est = 0.0;
    std::uint64_t bits = 0;
    int avail = 0;
    for (std::size_t row = 0; row < k; ++row) {
        double sx = 0.0, sw = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            if (avail == 0) {
                bits = stream.next_u64();
                avail = 64;
            }
            if (bits & 1u) {
                sx += x[c];
                sw += w[c];
            } else {
                sx -= x[c];
                sw -= w[c];
            }
            bits >>= 1;
            --avail;
        }
        est += sx * sw;
    }
    return est / static_cast<double>(k);
}

} // namespace detail

struct MonteCarloEstimate {
    double mean = 0.0;
    double variance = 0.0;  // unbiased, (trials - 1) denominator
    std::size_t trials = 0;
};

// Monte-Carlo harness over independent projections; trial t uses seed
// base.seed + t. Welford accumulation keeps the variance stable at 2e5 trials.
inline MonteCarloEstimate inner_product_mc(std::span<const double> x, std::span<const double> w,
                                           const ProjectionSpec& base, std::size_t trials) {
    if (x.size() != w.size())
        throw DimensionError("inner_product_mc: " + std::to_string(x.size()) + " vs " +
                             std::to_string(w.size()));
    if (trials < 2) throw ConfigError("inner_product_mc: trials must be >= 2");
    detail::check_spec(base);
    if (base.input_dim != x.size())
        throw DimensionError("inner_product_mc: spec dim " + std::to_string(base.input_dim));

    double mean = 0.0, m2 = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        ProjectionSpec spec = base;
        spec.seed = base.seed + t;
        double est;
        if (spec.kind == ProjectionKind::SignScaled) {
            est = detail::sign_sketch_inner(spec, x, w);
        } else {
            const ProjectionMatrix r = sample_projection(spec);
            const Vector rx = matvec(r.values, x);
            const Vector rw = matvec(r.values, w);
            est = dot(rx.data(), rw.data(), rx.size());
        }
        const double delta = est - mean;
        mean += delta / static_cast<double>(t + 1);
        m2 += delta * (est - mean);
    }
    return {mean, m2 / static_cast<double>(trials - 1), trials};
}

} // namespace ddrp
