#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ddrp/errors.hpp"
#include "ddrp/matrix.hpp"
#include "ddrp/rng.hpp"

namespace ddrp::synth {

enum class Kind { Diag, Uniform, UnifSkew };

inline const char* to_string(Kind k) {
    switch (k) {
        case Kind::Diag: return "diag";
        case Kind::Uniform: return "uniform";
        case Kind::UnifSkew: return "unifskew";
    }
    return "?";
}

struct SyntheticSpec {
    Kind kind = Kind::Diag;
    std::size_t d = 1;
    std::size_t n = 1;
    std::uint64_t seed = 0;
    double laplace_scale = 1.0;  // scale of the Laplace draws behind Kind::Diag
};

namespace detail {

constexpr std::uint64_t kRotationSalt = 0x726f74ULL;   // stream salts per sub-draw
constexpr std::uint64_t kParamSalt = 0x706172ULL;
constexpr std::uint64_t kRowSalt = 0x726f77ULL;
constexpr std::uint64_t kSkewDiagSalt = 0xA;
constexpr std::uint64_t kSkewUniformSalt = 0xB;

} // namespace detail

// Haar-distributed orthogonal matrix: Householder QR of a seeded Gaussian
// matrix with the R-diagonal sign correction.
inline DenseMatrix random_rotation(std::size_t d, std::uint64_t seed) {
    if (d < 1) throw DimensionError("random_rotation: d must be >= 1");
    rng::Stream stream(rng::derive(rng::derive(seed, rng::Domain::Synth), detail::kRotationSalt));

    DenseMatrix a(d, d);
    for (double& v : a.values) v = stream.next_gaussian();

    DenseMatrix q = DenseMatrix::identity(d);
    std::vector<double> v(d);
    std::vector<double> r_diag_sign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double norm2 = 0.0;
        for (std::size_t i = j; i < d; ++i) norm2 += a(i, j) * a(i, j);
        const double norm = std::sqrt(norm2);
        if (norm == 0.0) {
            r_diag_sign[j] = 1.0;
            continue;
        }
        const double alpha = a(j, j) >= 0.0 ? -norm : norm;
        r_diag_sign[j] = alpha >= 0.0 ? 1.0 : -1.0;

        double vnorm2 = 0.0;
        for (std::size_t i = j; i < d; ++i) {
            v[i] = a(i, j) - (i == j ? alpha : 0.0);
            vnorm2 += v[i] * v[i];
        }
        if (vnorm2 == 0.0) continue;

        // apply H = I - 2 v v^T / |v|^2 to the trailing block of A and to Q
        for (std::size_t c = j; c < d; ++c) {
            double proj = 0.0;
            for (std::size_t i = j; i < d; ++i) proj += v[i] * a(i, c);
            proj = 2.0 * proj / vnorm2;
            for (std::size_t i = j; i < d; ++i) a(i, c) -= proj * v[i];
        }
        for (std::size_t c = 0; c < d; ++c) {
            double proj = 0.0;
            for (std::size_t i = j; i < d; ++i) proj += v[i] * q(i, c);
            proj = 2.0 * proj / vnorm2;
            for (std::size_t i = j; i < d; ++i) q(i, c) -= proj * v[i];
        }
    }
    // q currently holds H_{d-1}...H_0, i.e. Q^T; transpose and fix signs so
    // the implicit R has a positive diagonal (Haar correctness).
    DenseMatrix out(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) out(i, j) = q(j, i) * r_diag_sign[j];
    return out;
}

// Diagonal covariance behind Kind::Diag: each Laplace draw acts as a signed
// per-coordinate scale, so the implied variance is its square. (Taking the
// draw itself as the variance flattens the heterogeneity the heavy tail is
// there to provide; squaring matches scaling Gaussian columns by the draws.)
inline Vector diag_variances(const SyntheticSpec& spec) {
    rng::Stream stream(
        rng::derive(rng::derive(spec.seed, rng::Domain::Synth), detail::kParamSalt));
    Vector v(spec.d);
    for (double& x : v) {
        const double l = stream.next_laplace(spec.laplace_scale);
        x = l * l;
    }
    return v;
}

inline std::pair<std::uint64_t, std::uint64_t> unifskew_component_seeds(std::uint64_t seed) {
    return {rng::derive(seed, detail::kSkewDiagSalt), rng::derive(seed, detail::kSkewUniformSalt)};
}

inline DenseMatrix generate(const SyntheticSpec& spec) {
    if (spec.d < 1 || spec.n < 1) throw DimensionError("synth::generate: n, d must be >= 1");

    switch (spec.kind) {
        case Kind::Diag: {
            const Vector variances = diag_variances(spec);
            Vector roots(spec.d);
            for (std::size_t j = 0; j < spec.d; ++j) roots[j] = std::sqrt(variances[j]);
            rng::Stream rows(
                rng::derive(rng::derive(spec.seed, rng::Domain::Synth), detail::kRowSalt));
            DenseMatrix m(spec.n, spec.d);
            for (std::size_t i = 0; i < spec.n; ++i) {
                double* row = m.values.data() + i * spec.d;
                for (std::size_t j = 0; j < spec.d; ++j) row[j] = roots[j] * rows.next_gaussian();
            }
            return m;
        }
        case Kind::Uniform: {
            rng::Stream params(
                rng::derive(rng::derive(spec.seed, rng::Domain::Synth), detail::kParamSalt));
            Vector eig_roots(spec.d);
            for (std::size_t j = 0; j < spec.d; ++j) eig_roots[j] = params.next_uniform();
            const DenseMatrix rot = random_rotation(spec.d, spec.seed);

            rng::Stream rows(
                rng::derive(rng::derive(spec.seed, rng::Domain::Synth), detail::kRowSalt));
            DenseMatrix g(spec.n, spec.d);
            for (std::size_t i = 0; i < spec.n; ++i) {
                double* row = g.values.data() + i * spec.d;
                for (std::size_t j = 0; j < spec.d; ++j)
                    row[j] = eig_roots[j] * rows.next_gaussian();
            }
            // row covariance U diag(lambda) U^T
            return matmul_transposed(g, rot);
        }
        case Kind::UnifSkew: {
            const auto [seed_diag, seed_uniform] = unifskew_component_seeds(spec.seed);
            SyntheticSpec a{Kind::Diag, spec.d, spec.n, seed_diag, spec.laplace_scale};
            SyntheticSpec b{Kind::Uniform, spec.d, spec.n, seed_uniform, spec.laplace_scale};
            DenseMatrix ma = generate(a);
            const DenseMatrix mb = generate(b);
            for (std::size_t i = 0; i < ma.values.size(); ++i)
                ma.values[i] = 0.5 * (ma.values[i] + mb.values[i]);
            return ma;
        }
    }
    throw ConfigError("synth::generate: unknown kind");
}

inline Kind kind_from_string(const std::string& s) {
    if (s == "diag") return Kind::Diag;
    if (s == "uniform") return Kind::Uniform;
    if (s == "unifskew") return Kind::UnifSkew;
    throw ConfigError("unknown synthetic kind '" + s + "' (expected diag|uniform|unifskew)");
}

} // namespace ddrp::synth
