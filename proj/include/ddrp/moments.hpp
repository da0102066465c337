#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddrp/errors.hpp"
#include "ddrp/matrix.hpp"

namespace ddrp {

// Uncentered second moment E[x x^T] of a row distribution. No mean is ever
// subtracted anywhere in this library: the preprocessors are defined on raw
// second moments, not covariances of centered data.
struct SecondMoment {
    std::size_t dim = 0;
    std::optional<DenseMatrix> full;  // (1/n) X^T X when estimated in full
    Vector diag;                      // always present

    bool has_full() const { return full.has_value(); }
};

namespace detail {

// Kahan-compensated accumulator array; keeps the diag/full agreement at
// 1e-12 even for n ~ 1e6 rows.
struct CompensatedArray {
    Vector sum;
    Vector comp;

    explicit CompensatedArray(std::size_t n) : sum(n, 0.0), comp(n, 0.0) {}

    void add(std::size_t i, double value) {
        const double y = value - comp[i];
        const double t = sum[i] + y;
        comp[i] = (t - sum[i]) - y;
        sum[i] = t;
    }
};

} // namespace detail

// Streaming accumulator for the diagonal of E[x x^T]; O(d) memory, one pass.
class DiagAccumulator {
public:
    DiagAccumulator() = default;

    void push_row(std::span<const double> row) {
        ensure_dim(row.size());
        for (std::size_t j = 0; j < row.size(); ++j) acc_->add(j, row[j] * row[j]);
        ++count_;
    }

    void push_sparse_row(std::span<const std::size_t> cols, std::span<const double> vals,
                         std::size_t n_cols) {
        ensure_dim(n_cols);
        for (std::size_t p = 0; p < cols.size(); ++p) acc_->add(cols[p], vals[p] * vals[p]);
        ++count_;
    }

    // Sample-count-weighted merge; lets trials shard rows across threads.
    void merge(const DiagAccumulator& other) {
        if (other.count_ == 0) return;
        ensure_dim(other.dim_);
        for (std::size_t j = 0; j < dim_; ++j) {
            acc_->add(j, other.acc_->sum[j]);
            acc_->add(j, -other.acc_->comp[j]);
        }
        count_ += other.count_;
    }

    std::size_t count() const { return count_; }

    SecondMoment finalize() const {
        if (count_ == 0) throw DomainError("moments: no rows accumulated");
        SecondMoment m;
        m.dim = dim_;
        m.diag.resize(dim_);
        const double inv = 1.0 / static_cast<double>(count_);
        for (std::size_t j = 0; j < dim_; ++j) m.diag[j] = acc_->sum[j] * inv;
        return m;
    }

private:
    void ensure_dim(std::size_t d) {
        if (!acc_) {
            dim_ = d;
            acc_.emplace(d);
        } else if (d != dim_) {
            throw DimensionError("moments: row length " + std::to_string(d) + " != " +
                                 std::to_string(dim_));
        }
    }

    std::size_t dim_ = 0;
    std::size_t count_ = 0;
    std::optional<detail::CompensatedArray> acc_;
};

// Gram accumulator for the full second moment.
class GramAccumulator {
public:
    GramAccumulator() = default;

    void push_row(std::span<const double> row) {
        ensure_dim(row.size());
        for (std::size_t i = 0; i < dim_; ++i) {
            const double ri = row[i];
            if (ri == 0.0) continue;
            for (std::size_t j = i; j < dim_; ++j) acc_->add(i * dim_ + j, ri * row[j]);
        }
        ++count_;
    }

    void push_sparse_row(std::span<const std::size_t> cols, std::span<const double> vals,
                         std::size_t n_cols) {
        ensure_dim(n_cols);
        for (std::size_t p = 0; p < cols.size(); ++p)
            for (std::size_t q = p; q < cols.size(); ++q)
                acc_->add(cols[p] * dim_ + cols[q], vals[p] * vals[q]);
        ++count_;
    }

    void merge(const GramAccumulator& other) {
        if (other.count_ == 0) return;
        ensure_dim(other.dim_);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = i; j < dim_; ++j) {
                acc_->add(i * dim_ + j, other.acc_->sum[i * dim_ + j]);
                acc_->add(i * dim_ + j, -other.acc_->comp[i * dim_ + j]);
            }
        count_ += other.count_;
    }

    std::size_t count() const { return count_; }

    SecondMoment finalize() const {
        if (count_ == 0) throw DomainError("moments: no rows accumulated");
        SecondMoment m;
        m.dim = dim_;
        DenseMatrix full(dim_, dim_);
        const double inv = 1.0 / static_cast<double>(count_);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = i; j < dim_; ++j) {
                const double v = acc_->sum[i * dim_ + j] * inv;
                full(i, j) = v;
                full(j, i) = v;
            }
        m.diag.resize(dim_);
        for (std::size_t j = 0; j < dim_; ++j) m.diag[j] = full(j, j);
        m.full = std::move(full);
        return m;
    }

private:
    void ensure_dim(std::size_t d) {
        if (!acc_) {
            dim_ = d;
            acc_.emplace(d * d);
        } else if (d != dim_) {
            throw DimensionError("moments: row length " + std::to_string(d) + " != " +
                                 std::to_string(dim_));
        }
    }

    std::size_t dim_ = 0;
    std::size_t count_ = 0;
    std::optional<detail::CompensatedArray> acc_;
};

inline SecondMoment estimate_full(const DenseMatrix& data) {
    if (data.n_rows == 0) throw DomainError("estimate_full: empty input");
    GramAccumulator acc;
    for (std::size_t i = 0; i < data.n_rows; ++i) acc.push_row(data.row(i));
    return acc.finalize();
}

inline SecondMoment estimate_full(const SparseMatrixCSR& data) {
    if (data.n_rows == 0) throw DomainError("estimate_full: empty input");
    GramAccumulator acc;
    for (std::size_t i = 0; i < data.n_rows; ++i)
        acc.push_sparse_row(data.row_cols(i), data.row_vals(i), data.n_cols);
    return acc.finalize();
}

inline SecondMoment estimate_diag_streaming(const DenseMatrix& data) {
    if (data.n_rows == 0) throw DomainError("estimate_diag_streaming: empty input");
    DiagAccumulator acc;
    for (std::size_t i = 0; i < data.n_rows; ++i) acc.push_row(data.row(i));
    return acc.finalize();
}

inline SecondMoment estimate_diag_streaming(const SparseMatrixCSR& data) {
    if (data.n_rows == 0) throw DomainError("estimate_diag_streaming: empty input");
    DiagAccumulator acc;
    for (std::size_t i = 0; i < data.n_rows; ++i)
        acc.push_sparse_row(data.row_cols(i), data.row_vals(i), data.n_cols);
    return acc.finalize();
}

} // namespace ddrp
