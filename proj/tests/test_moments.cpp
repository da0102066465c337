#include <gtest/gtest.h>

#include "ddrp/decompose.hpp"
#include "ddrp/moments.hpp"
#include "testutil.hpp"

using namespace ddrp;

TEST(EstimateFull, SingleRow) {
    DenseMatrix x(1, 2, {1.0, 0.0});
    SecondMoment m = estimate_full(x);
    EXPECT_DOUBLE_EQ((*m.full)(0, 0), 1.0);
    EXPECT_DOUBLE_EQ((*m.full)(0, 1), 0.0);
    EXPECT_DOUBLE_EQ((*m.full)(1, 1), 0.0);
}

TEST(EstimateFull, CrossTermsCancel) {
    DenseMatrix x(2, 2, {1.0, 1.0, 1.0, -1.0});
    SecondMoment m = estimate_full(x);
    EXPECT_DOUBLE_EQ((*m.full)(0, 0), 1.0);
    EXPECT_DOUBLE_EQ((*m.full)(1, 1), 1.0);
    EXPECT_DOUBLE_EQ((*m.full)(0, 1), 0.0);
}

TEST(EstimateFull, MatchesNaivePairAverage) {
    DenseMatrix x = testutil::random_matrix(100, 5, 321);
    SecondMoment m = estimate_full(x);
    for (std::size_t a = 0; a < 5; ++a)
        for (std::size_t b = 0; b < 5; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < x.n_rows; ++i) s += x(i, a) * x(i, b);
            EXPECT_NEAR((*m.full)(a, b), s / 100.0, 1e-12);
        }
}

TEST(EstimateFull, EmptyInputRejected) {
    EXPECT_THROW(estimate_full(DenseMatrix(0, 3)), DomainError);
}

TEST(EstimateDiag, SimpleRows) {
    DenseMatrix x(2, 2, {2.0, 0.0, 0.0, 2.0});
    SecondMoment m = estimate_diag_streaming(x);
    EXPECT_DOUBLE_EQ(m.diag[0], 2.0);
    EXPECT_DOUBLE_EQ(m.diag[1], 2.0);
    EXPECT_FALSE(m.has_full());
}

TEST(EstimateDiag, AllZeroRows) {
    DenseMatrix x(3, 4);
    SecondMoment m = estimate_diag_streaming(x);
    for (double v : m.diag) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(EstimateDiag, InconsistentRowLengthRejected) {
    DiagAccumulator acc;
    Vector row3{1.0, 2.0, 3.0};
    Vector row2{1.0, 2.0};
    acc.push_row(row3);
    EXPECT_THROW(acc.push_row(row2), DimensionError);
}

TEST(Moments, DiagMatchesFullDiagonal) {
    for (std::uint64_t seed : {5u, 6u, 7u}) {
        DenseMatrix x = testutil::random_matrix(257, 8, seed);
        SecondMoment full = estimate_full(x);
        SecondMoment diag = estimate_diag_streaming(x);
        for (std::size_t j = 0; j < 8; ++j)
            EXPECT_NEAR(diag.diag[j], full.diag[j], 1e-12 * std::max(1.0, full.diag[j]));
    }
}

TEST(Moments, DiagMatchesFullAtMillionRows) {
    // Compensated accumulation keeps the two paths together at n = 1e6.
    const std::size_t n = 1000000, d = 3;
    rng::Stream s(rng::mix64(99));
    DenseMatrix x(n, d);
    for (double& v : x.values) v = s.next_gaussian() * 3.0;
    SecondMoment full = estimate_full(x);
    SecondMoment diag = estimate_diag_streaming(x);
    for (std::size_t j = 0; j < d; ++j)
        EXPECT_NEAR(diag.diag[j], full.diag[j], 1e-12 * std::max(1.0, full.diag[j]));
}

TEST(Moments, EstimateIsPsd) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        DenseMatrix x = testutil::random_matrix(12 + seed % 20, 6, seed * 31 + 1);
        SecondMoment m = estimate_full(x);
        SymEig e = sym_eig(*m.full);
        EXPECT_GE(e.eigenvalues.back(), -1e-9 * std::max(e.eigenvalues.front(), 0.0))
            << "seed " << seed;
    }
}

TEST(Moments, ShardedMergeMatchesSerial) {
    DenseMatrix x = testutil::random_matrix(101, 7, 555);
    GramAccumulator serial;
    for (std::size_t i = 0; i < x.n_rows; ++i) serial.push_row(x.row(i));

    GramAccumulator a, b, c;
    for (std::size_t i = 0; i < 40; ++i) a.push_row(x.row(i));
    for (std::size_t i = 40; i < 77; ++i) b.push_row(x.row(i));
    for (std::size_t i = 77; i < x.n_rows; ++i) c.push_row(x.row(i));
    a.merge(b);
    a.merge(c);

    EXPECT_EQ(a.count(), serial.count());
    SecondMoment ms = serial.finalize();
    SecondMoment mm = a.finalize();
    for (std::size_t i = 0; i < ms.full->values.size(); ++i)
        EXPECT_NEAR(mm.full->values[i], ms.full->values[i],
                    1e-12 * std::max(1.0, std::abs(ms.full->values[i])));
}

TEST(Moments, SparseMatchesDense) {
    SparseMatrixCSR s(3, 4);
    s.col_indices = {0, 2, 1, 3};
    s.values = {1.0, -2.0, 3.0, 0.5};
    s.row_offsets = {0, 2, 3, 4};
    s.validate();
    SecondMoment sparse_m = estimate_full(s);
    SecondMoment dense_m = estimate_full(s.to_dense());
    EXPECT_LE(testutil::frob_diff(*sparse_m.full, *dense_m.full), 1e-14);

    SecondMoment sd = estimate_diag_streaming(s);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(sd.diag[j], dense_m.diag[j]);
}
