#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ddrp/errors.hpp"
#include "ddrp/matrix.hpp"
#include "ddrp/moments.hpp"
#include "ddrp/parallel.hpp"
#include "ddrp/preprocess.hpp"
#include "ddrp/projection.hpp"
#include "ddrp/rng.hpp"

namespace ddrp::fmm {

enum class MethodKind { Oblivious, Quick, Optimal };

inline const char* to_string(MethodKind m) {
    switch (m) {
        case MethodKind::Oblivious: return "oblivious";
        case MethodKind::Quick: return "quick";
        case MethodKind::Optimal: return "optimal";
    }
    return "?";
}

struct FmmMethod {
    MethodKind kind = MethodKind::Oblivious;
    ProjectionKind projection_kind = ProjectionKind::SignScaled;
};

// Aggregated squared error of one (method, k) cell. std uses the (trials-1)
// denominator; sem is the standard error of the mean, reported alongside the
// per-trial std so readers can pick either spread measure.
struct TrialStats {
    FmmMethod method;
    std::size_t k = 0;
    std::size_t trials = 0;
    double mean_sq_error = 0.0;
    double std_sq_error = 0.0;
    double sem_sq_error = 0.0;
};

inline DenseMatrix exact_product(const DenseMatrix& x, const DenseMatrix& w) {
    if (x.n_cols != w.n_cols)
        throw DimensionError("exact_product: feature dims " + std::to_string(x.n_cols) + " vs " +
                             std::to_string(w.n_cols));
    return matmul_transposed(x, w);
}

// Frobenius-squared difference, compensated summation.
inline double squared_error(const DenseMatrix& exact, const DenseMatrix& approx) {
    if (!exact.same_shape(approx))
        throw DimensionError("squared_error: shapes " + std::to_string(exact.n_rows) + "x" +
                             std::to_string(exact.n_cols) + " vs " +
                             std::to_string(approx.n_rows) + "x" + std::to_string(approx.n_cols));
    double sum = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < exact.values.size(); ++i) {
        const double d = exact.values[i] - approx.values[i];
        const double y = d * d - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

inline Preprocessor method_preprocessor(const FmmMethod& method, const SecondMoment& moments_x,
                                        const SecondMoment& moments_w,
                                        double eps = default_diag_eps(), double floor = 1e-10) {
    switch (method.kind) {
        case MethodKind::Oblivious: return {IdentityPre{}};
        case MethodKind::Quick: return build_quick(moments_x.diag, moments_w.diag, eps);
        case MethodKind::Optimal:
            if (!moments_x.has_full() || !moments_w.has_full())
                throw ConfigError("optimal method requires full second moments of both inputs");
            return build_optimal(moments_x, moments_w, floor);
    }
    throw ConfigError("unknown method");
}

// (X~ R)(W~ R)^T with the method's preprocessor applied first; both sides use
// the same sampled R.
inline DenseMatrix approx_product(const DenseMatrix& x, const DenseMatrix& w,
                                  const FmmMethod& method, const ProjectionSpec& spec,
                                  const SecondMoment& moments_x, const SecondMoment& moments_w) {
    if (x.n_cols != w.n_cols || x.n_cols != spec.input_dim || moments_x.dim != x.n_cols ||
        moments_w.dim != w.n_cols)
        throw DimensionError("approx_product: inconsistent dims");
    ProjectionSpec s = spec;
    s.kind = method.projection_kind;
    const Preprocessor pre = method_preprocessor(method, moments_x, moments_w);
    const ProjectionMatrix r = sample_projection(s);
    const DenseMatrix px = project_rows(apply_x(pre, x), r);
    const DenseMatrix pw = project_rows(apply_w(pre, w), r);
    return matmul_transposed(px, pw);
}

struct BenchmarkOptions {
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    unsigned threads = 0;           // 0 = resolve from DDRP_THREADS, default 1
    double eps = default_diag_eps();
    double floor = 1e-10;
    std::size_t moment_subsample = 0;  // 0 = estimate moments from all rows
};

namespace detail {

// Seeded subsample of rows for the "moments from a sample of the data"
// scenario: partial Fisher-Yates over row indices.
inline DenseMatrix subsample_rows(const DenseMatrix& m, std::size_t count, std::uint64_t seed) {
    if (count == 0 || count >= m.n_rows) return m;
    std::vector<std::size_t> idx(m.n_rows);
    for (std::size_t i = 0; i < m.n_rows; ++i) idx[i] = i;
    rng::Stream stream(rng::derive(seed, rng::Domain::PairSampling));
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(stream.next_u64() %
                                                           static_cast<std::uint64_t>(m.n_rows - i));
        std::swap(idx[i], idx[j]);
    }
    DenseMatrix out(count, m.n_cols);
    for (std::size_t i = 0; i < count; ++i) {
        auto src = m.row(idx[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

inline TrialStats aggregate(const FmmMethod& method, std::size_t k,
                            std::span<const double> errors) {
    TrialStats st;
    st.method = method;
    st.k = k;
    st.trials = errors.size();
    double sum = 0.0, comp = 0.0;
    for (double e : errors) {
        const double y = e - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    st.mean_sq_error = sum / static_cast<double>(errors.size());
    if (errors.size() >= 2) {
        double ss = 0.0, sc = 0.0;
        for (double e : errors) {
            const double d = e - st.mean_sq_error;
            const double y = d * d - sc;
            const double t = ss + y;
            sc = (t - ss) - y;
            ss = t;
        }
        st.std_sq_error = std::sqrt(ss / static_cast<double>(errors.size() - 1));
        st.sem_sq_error = st.std_sq_error / std::sqrt(static_cast<double>(errors.size()));
    }
    return st;
}

} // namespace detail

// Paired-trial benchmark: per (k, trial) one R is sampled and shared by every
// method, so method comparisons see the same projection noise. Trial t uses
// seed opts.seed + t; results are independent of the thread count.
inline std::vector<TrialStats> run_benchmark_with_seeds(
    const DenseMatrix& x, const DenseMatrix& w, std::span<const FmmMethod> methods,
    std::span<const std::size_t> ks, std::span<const std::uint64_t> trial_seeds,
    const BenchmarkOptions& opts = {}) {
    if (x.n_cols != w.n_cols)
        throw DimensionError("run_benchmark: feature dims " + std::to_string(x.n_cols) + " vs " +
                             std::to_string(w.n_cols));
    if (trial_seeds.size() < 2) throw ConfigError("run_benchmark: trials must be >= 2");
    for (std::size_t k : ks)
        if (k < 1 || k > x.n_cols)
            throw DimensionError("run_benchmark: target dim " + std::to_string(k) +
                                 " not in [1, " + std::to_string(x.n_cols) + "]");

    bool need_full = false;
    for (const auto& m : methods)
        if (m.kind == MethodKind::Optimal) need_full = true;

    const DenseMatrix& mx_src =
        opts.moment_subsample ? detail::subsample_rows(x, opts.moment_subsample, opts.seed) : x;
    const DenseMatrix& mw_src =
        opts.moment_subsample ? detail::subsample_rows(w, opts.moment_subsample, opts.seed + 1)
                              : w;
    const SecondMoment moments_x = need_full ? estimate_full(mx_src)
                                             : estimate_diag_streaming(mx_src);
    const SecondMoment moments_w = need_full ? estimate_full(mw_src)
                                             : estimate_diag_streaming(mw_src);

    const DenseMatrix exact = exact_product(x, w);

    // Preprocessed inputs are trial-independent; build them once per method.
    struct Prepared {
        FmmMethod method;
        DenseMatrix px;
        DenseMatrix pw;
    };
    std::vector<Prepared> prepared;
    prepared.reserve(methods.size());
    for (const auto& m : methods) {
        const Preprocessor pre = method_preprocessor(m, moments_x, moments_w, opts.eps, opts.floor);
        prepared.push_back({m, apply_x(pre, x), apply_w(pre, w)});
    }

    const std::size_t t_count = trial_seeds.size();
    // errors[method][k_index][trial]
    std::vector<std::vector<std::vector<double>>> errors(
        methods.size(), std::vector<std::vector<double>>(ks.size(), std::vector<double>(t_count)));

    parallel_for_index(ks.size() * t_count, opts.threads, [&](std::size_t unit) {
        const std::size_t ki = unit / t_count;
        const std::size_t t = unit % t_count;
        ProjectionSpec spec{trial_seeds[t], x.n_cols, ks[ki], ProjectionKind::SignScaled};
        for (std::size_t mi = 0; mi < prepared.size(); ++mi) {
            spec.kind = prepared[mi].method.projection_kind;
            const ProjectionMatrix r = sample_projection(spec);
            const DenseMatrix sx = project_rows(prepared[mi].px, r);
            const DenseMatrix sw = project_rows(prepared[mi].pw, r);
            errors[mi][ki][t] = squared_error(exact, matmul_transposed(sx, sw));
        }
    });

    std::vector<TrialStats> out;
    out.reserve(methods.size() * ks.size());
    for (std::size_t mi = 0; mi < methods.size(); ++mi)
        for (std::size_t ki = 0; ki < ks.size(); ++ki)
            out.push_back(detail::aggregate(prepared[mi].method, ks[ki], errors[mi][ki]));
    return out;
}

inline std::vector<TrialStats> run_benchmark(const DenseMatrix& x, const DenseMatrix& w,
                                             std::span<const FmmMethod> methods,
                                             std::span<const std::size_t> ks,
                                             const BenchmarkOptions& opts = {}) {
    std::vector<std::uint64_t> seeds(opts.trials);
    for (std::size_t t = 0; t < opts.trials; ++t) seeds[t] = opts.seed + t;
    return run_benchmark_with_seeds(x, w, methods, ks, seeds, opts);
}

} // namespace ddrp::fmm
