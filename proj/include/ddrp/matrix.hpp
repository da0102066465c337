#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddrp/errors.hpp"

namespace ddrp {

using Vector = std::vector<double>;

// Dot product with four independent accumulators. The unroll hides FP add
// latency (the sketch-product inner loops live here) while keeping a fixed
// summation order, so results are reproducible run to run.
inline double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    const std::size_t unrolled = n - n % 4;
    for (; i < unrolled; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DimensionError("dot: length " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    return dot(a.data(), b.data(), a.size());
}

inline double squared_norm(std::span<const double> a) { return dot(a.data(), a.data(), a.size()); }

// Row-major dense matrix; rows are the sample vectors throughout.
struct DenseMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> values;

    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : n_rows(rows), n_cols(cols), values(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> vals)
        : n_rows(rows), n_cols(cols), values(std::move(vals)) {
        if (values.size() != n_rows * n_cols)
            throw DimensionError("DenseMatrix: value count " + std::to_string(values.size()) +
                                 " != " + std::to_string(n_rows) + "x" + std::to_string(n_cols));
    }

    static DenseMatrix identity(std::size_t d) {
        DenseMatrix m(d, d);
        for (std::size_t i = 0; i < d; ++i) m.values[i * d + i] = 1.0;
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return values[i * n_cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * n_cols + j]; }

    std::span<double> row(std::size_t i) { return {values.data() + i * n_cols, n_cols}; }
    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * n_cols, n_cols};
    }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double frobenius_norm() const {
        double s = dot(values.data(), values.data(), values.size());
        return std::sqrt(s);
    }

    DenseMatrix transposed() const {
        DenseMatrix t(n_cols, n_rows);
        for (std::size_t i = 0; i < n_rows; ++i)
            for (std::size_t j = 0; j < n_cols; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    bool same_shape(const DenseMatrix& o) const {
        return n_rows == o.n_rows && n_cols == o.n_cols;
    }
};

// Compressed sparse row matrix. Column indices are strictly increasing within
// each row; validate() enforces the layout after ingestion.
struct SparseMatrixCSR {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_offsets;  // length n_rows + 1
    std::vector<std::size_t> col_indices;
    std::vector<double> values;

    SparseMatrixCSR() : row_offsets(1, 0) {}
    SparseMatrixCSR(std::size_t rows, std::size_t cols)
        : n_rows(rows), n_cols(cols), row_offsets(rows + 1, 0) {}

    std::size_t nnz() const { return values.size(); }

    std::span<const std::size_t> row_cols(std::size_t i) const {
        return {col_indices.data() + row_offsets[i], row_offsets[i + 1] - row_offsets[i]};
    }
    std::span<const double> row_vals(std::size_t i) const {
        return {values.data() + row_offsets[i], row_offsets[i + 1] - row_offsets[i]};
    }

    void validate() const {
        if (row_offsets.size() != n_rows + 1)
            throw DimensionError("CSR: row_offsets length != n_rows + 1");
        if (col_indices.size() != values.size() || row_offsets.back() != values.size())
            throw DimensionError("CSR: values/col_indices/offsets are inconsistent");
        for (std::size_t i = 0; i < n_rows; ++i) {
            if (row_offsets[i] > row_offsets[i + 1])
                throw DimensionError("CSR: row_offsets not monotone at row " + std::to_string(i));
            for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p) {
                if (col_indices[p] >= n_cols)
                    throw DimensionError("CSR: column index " + std::to_string(col_indices[p]) +
                                         " out of range in row " + std::to_string(i));
                if (p > row_offsets[i] && col_indices[p - 1] >= col_indices[p])
                    throw DomainError("CSR: column indices not strictly increasing in row " +
                                      std::to_string(i));
            }
        }
    }

    DenseMatrix to_dense() const {
        DenseMatrix m(n_rows, n_cols);
        for (std::size_t i = 0; i < n_rows; ++i) {
            auto cols = row_cols(i);
            auto vals = row_vals(i);
            for (std::size_t p = 0; p < cols.size(); ++p) m(i, cols[p]) = vals[p];
        }
        return m;
    }
};

// C = A * B
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.n_cols != b.n_rows)
        throw DimensionError("matmul: " + std::to_string(a.n_cols) + " vs " +
                             std::to_string(b.n_rows));
    DenseMatrix c(a.n_rows, b.n_cols);
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        const double* arow = a.values.data() + i * a.n_cols;
        double* crow = c.values.data() + i * c.n_cols;
        for (std::size_t l = 0; l < a.n_cols; ++l) {
            const double av = arow[l];
            if (av == 0.0) continue;
            const double* brow = b.values.data() + l * b.n_cols;
            for (std::size_t j = 0; j < b.n_cols; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

// C = A * B^T. Both operands are walked along contiguous rows, so this is the
// fast path used by projections and sketch products.
inline DenseMatrix matmul_transposed(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.n_cols != b.n_cols)
        throw DimensionError("matmul_transposed: " + std::to_string(a.n_cols) + " vs " +
                             std::to_string(b.n_cols));
    DenseMatrix c(a.n_rows, b.n_rows);
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        const double* arow = a.values.data() + i * a.n_cols;
        double* crow = c.values.data() + i * c.n_cols;
        for (std::size_t j = 0; j < b.n_rows; ++j)
            crow[j] = dot(arow, b.values.data() + j * b.n_cols, a.n_cols);
    }
    return c;
}

// C = S * B for CSR S; touches only stored entries.
inline DenseMatrix sparse_dense_mul(const SparseMatrixCSR& s, const DenseMatrix& b) {
    if (s.n_cols != b.n_rows)
        throw DimensionError("sparse_dense_mul: " + std::to_string(s.n_cols) + " vs " +
                             std::to_string(b.n_rows));
    DenseMatrix c(s.n_rows, b.n_cols);
    for (std::size_t i = 0; i < s.n_rows; ++i) {
        auto cols = s.row_cols(i);
        auto vals = s.row_vals(i);
        double* crow = c.values.data() + i * c.n_cols;
        for (std::size_t p = 0; p < cols.size(); ++p) {
            const double v = vals[p];
            const double* brow = b.values.data() + cols[p] * b.n_cols;
            for (std::size_t j = 0; j < b.n_cols; ++j) crow[j] += v * brow[j];
        }
    }
    return c;
}

// y = M * x
inline Vector matvec(const DenseMatrix& m, std::span<const double> x) {
    if (m.n_cols != x.size())
        throw DimensionError("matvec: " + std::to_string(m.n_cols) + " vs " +
                             std::to_string(x.size()));
    Vector y(m.n_rows);
    for (std::size_t i = 0; i < m.n_rows; ++i)
        y[i] = dot(m.values.data() + i * m.n_cols, x.data(), m.n_cols);
    return y;
}

} // namespace ddrp
