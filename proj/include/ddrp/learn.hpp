#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "ddrp/decompose.hpp"
#include "ddrp/errors.hpp"
#include "ddrp/matrix.hpp"
#include "ddrp/moments.hpp"
#include "ddrp/parallel.hpp"
#include "ddrp/preprocess.hpp"
#include "ddrp/projection.hpp"
#include "ddrp/rng.hpp"

namespace ddrp::learn {

enum class Loss { Squared, Logistic };

inline const char* to_string(Loss l) { return l == Loss::Squared ? "squared" : "logistic"; }

// Rows are samples; labels are regression targets or +-1 classes.
struct LabeledDataset {
    std::variant<DenseMatrix, SparseMatrixCSR> features;
    Vector labels;

    std::size_t n_rows() const {
        return std::visit([](const auto& m) { return m.n_rows; }, features);
    }
    std::size_t n_cols() const {
        return std::visit([](const auto& m) { return m.n_cols; }, features);
    }
    bool is_sparse() const { return std::holds_alternative<SparseMatrixCSR>(features); }

    void check() const {
        if (n_rows() == 0) throw DomainError("dataset: no rows");
        if (labels.size() != n_rows())
            throw DimensionError("dataset: " + std::to_string(labels.size()) + " labels for " +
                                 std::to_string(n_rows()) + " rows");
    }
    void check_binary_labels() const {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] != 1.0 && labels[i] != -1.0)
                throw DomainError("dataset: label " + std::to_string(labels[i]) + " at row " +
                                  std::to_string(i) + " is not +-1");
    }
};

// Trained projected model: prediction is w^T (R D_X^lambda x).
struct LambdaModel {
    double lambda = 0.0;
    Vector diag_x;           // second-moment diagonal frozen at train time
    ProjectionSpec projection;
    Vector w;
    Loss loss = Loss::Squared;
    double ridge = 0.0;
};

struct SweepCell {
    double lambda = 0.0;
    std::size_t k = 0;
    double mean_metric = 0.0;  // MSE (squared loss) or accuracy (logistic)
    double std_metric = 0.0;   // (trials - 1) denominator
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::size_t trials = 0;
    Loss loss = Loss::Squared;
};

// Z = (X scaled per column by diag_x^lambda, zero-guarded) projected by R.
inline DenseMatrix transform(const DenseMatrix& x, double lambda, const Vector& diag_x,
                             const ProjectionSpec& spec, double eps = default_diag_eps()) {
    if (diag_x.size() != x.n_cols)
        throw DimensionError("transform: diag length " + std::to_string(diag_x.size()));
    const Preprocessor pre = build_lambda(diag_x, lambda, eps);
    return project_rows(apply_x(pre, x), sample_projection(spec));
}

inline DenseMatrix transform(const SparseMatrixCSR& x, double lambda, const Vector& diag_x,
                             const ProjectionSpec& spec, double eps = default_diag_eps()) {
    if (diag_x.size() != x.n_cols)
        throw DimensionError("transform: diag length " + std::to_string(diag_x.size()));
    const Preprocessor pre = build_lambda(diag_x, lambda, eps);
    return project_rows(apply_x(pre, x), sample_projection(spec));
}

inline DenseMatrix transform(const LabeledDataset& ds, double lambda, const Vector& diag_x,
                             const ProjectionSpec& spec, double eps = default_diag_eps()) {
    return std::visit([&](const auto& m) { return transform(m, lambda, diag_x, spec, eps); },
                      ds.features);
}

// Ridge regression through the normal equations: minimizes
// (1/n)|Zw - y|^2 + ridge |w|^2, i.e. w = (Z^T Z + ridge n I)^{-1} Z^T y.
inline Vector train_linear(const DenseMatrix& z, const Vector& y, double ridge) {
    if (z.n_rows != y.size())
        throw DimensionError("train_linear: " + std::to_string(y.size()) + " labels for " +
                             std::to_string(z.n_rows) + " rows");
    if (ridge < 0.0) throw DomainError("train_linear: ridge must be >= 0");
    const std::size_t k = z.n_cols;
    DenseMatrix gram(k, k);
    for (std::size_t i = 0; i < z.n_rows; ++i) {
        const double* row = z.values.data() + i * k;
        for (std::size_t a = 0; a < k; ++a) {
            const double ra = row[a];
            if (ra == 0.0) continue;
            for (std::size_t b = a; b < k; ++b) gram(a, b) += ra * row[b];
        }
    }
    const double reg = ridge * static_cast<double>(z.n_rows);
    for (std::size_t a = 0; a < k; ++a) {
        gram(a, a) += reg;
        for (std::size_t b = a + 1; b < k; ++b) gram(b, a) = gram(a, b);
    }
    Vector rhs(k, 0.0);
    for (std::size_t i = 0; i < z.n_rows; ++i) {
        const double* row = z.values.data() + i * k;
        for (std::size_t a = 0; a < k; ++a) rhs[a] += row[a] * y[i];
    }
    try {
        return solve_sym_psd(gram, rhs);
    } catch (const SingularityError& e) {
        throw SingularityError("train_linear: normal equations are singular with ridge " +
                               std::to_string(ridge) + " (" + e.what() + ")");
    }
}

inline double logistic_loss(const DenseMatrix& z, const Vector& y, const Vector& w,
                            double ridge) {
    double loss = 0.0;
    for (std::size_t i = 0; i < z.n_rows; ++i) {
        const double margin = y[i] * dot(z.values.data() + i * z.n_cols, w.data(), z.n_cols);
        // log(1 + exp(-m)) without overflow
        loss += margin > 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
    }
    loss /= static_cast<double>(z.n_rows);
    return loss + ridge * dot(w.data(), w.data(), w.size());
}

inline Vector logistic_gradient(const DenseMatrix& z, const Vector& y, const Vector& w,
                                double ridge) {
    const std::size_t k = z.n_cols;
    Vector g(k, 0.0);
    for (std::size_t i = 0; i < z.n_rows; ++i) {
        const double* row = z.values.data() + i * k;
        const double margin = y[i] * dot(row, w.data(), k);
        const double sig = 1.0 / (1.0 + std::exp(margin));  // sigma(-margin)
        const double coeff = -y[i] * sig / static_cast<double>(z.n_rows);
        for (std::size_t a = 0; a < k; ++a) g[a] += coeff * row[a];
    }
    for (std::size_t a = 0; a < k; ++a) g[a] += 2.0 * ridge * w[a];
    return g;
}

// Largest eigenvalue of Z^T Z by power iteration; used for the default step.
inline double power_iteration_sq_norm(const DenseMatrix& z, std::size_t iters = 30) {
    const std::size_t k = z.n_cols;
    Vector v(k, 1.0 / std::sqrt(static_cast<double>(k)));
    double lambda = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
        Vector zv(z.n_rows);
        for (std::size_t i = 0; i < z.n_rows; ++i)
            zv[i] = dot(z.values.data() + i * k, v.data(), k);
        Vector ztzv(k, 0.0);
        for (std::size_t i = 0; i < z.n_rows; ++i) {
            const double* row = z.values.data() + i * k;
            for (std::size_t a = 0; a < k; ++a) ztzv[a] += zv[i] * row[a];
        }
        lambda = std::sqrt(dot(ztzv.data(), ztzv.data(), k));
        if (lambda == 0.0) return 0.0;
        for (std::size_t a = 0; a < k; ++a) v[a] = ztzv[a] / lambda;
    }
    return lambda;
}

// Default logistic step 0.1 / L with L the gradient Lipschitz estimate
// lambda_max(Z^T Z) / (4n) + 2 ridge.
inline double default_logistic_step(const DenseMatrix& z, double ridge) {
    const double lip =
        power_iteration_sq_norm(z) / (4.0 * static_cast<double>(z.n_rows)) + 2.0 * ridge;
    return lip > 0.0 ? 0.1 / lip : 1.0;
}

// Full-batch gradient descent on mean log(1 + exp(-y w^T z)) + ridge |w|^2.
// Deterministic given inputs; stops at the epoch cap or when the gradient
// norm drops below 1e-8. step <= 0 selects the default above.
inline Vector train_logistic(const DenseMatrix& z, const Vector& y, std::size_t epochs = 500,
                             double step = 0.0, double ridge = 0.0) {
    if (z.n_rows != y.size())
        throw DimensionError("train_logistic: " + std::to_string(y.size()) + " labels for " +
                             std::to_string(z.n_rows) + " rows");
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] != 1.0 && y[i] != -1.0)
            throw DomainError("train_logistic: label at row " + std::to_string(i) + " is not +-1");
    if (step <= 0.0) step = default_logistic_step(z, ridge);

    Vector w(z.n_cols, 0.0);
    for (std::size_t e = 0; e < epochs; ++e) {
        const Vector g = logistic_gradient(z, y, w, ridge);
        const double gnorm = std::sqrt(dot(g.data(), g.data(), g.size()));
        if (gnorm < 1e-8) break;
        for (std::size_t a = 0; a < w.size(); ++a) w[a] -= step * g[a];
    }
    return w;
}

inline double mse_metric(const DenseMatrix& z, const Vector& y, const Vector& w) {
    double sum = 0.0;
    for (std::size_t i = 0; i < z.n_rows; ++i) {
        const double r = dot(z.values.data() + i * z.n_cols, w.data(), z.n_cols) - y[i];
        sum += r * r;
    }
    return sum / static_cast<double>(z.n_rows);
}

inline double accuracy_metric(const DenseMatrix& z, const Vector& y, const Vector& w) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < z.n_rows; ++i) {
        const double pred = dot(z.values.data() + i * z.n_cols, w.data(), z.n_cols);
        const double cls = pred >= 0.0 ? 1.0 : -1.0;
        if (cls == y[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(z.n_rows);
}

struct SweepOptions {
    ProjectionKind projection = ProjectionKind::SignScaled;
    double eps = default_diag_eps();
    std::size_t epochs = 500;   // logistic only
    double step = 0.0;          // logistic only; <= 0 picks the default
    unsigned threads = 0;
};

// Grid sweep over (lambda, k). diag_x is estimated from the training split
// only. Trial t of every cell at dimension k shares the projection sampled
// from seed + t, so lambda comparisons are paired.
inline SweepResult sweep(const LabeledDataset& train, const LabeledDataset& test,
                         const std::vector<double>& lambdas, const std::vector<std::size_t>& ks,
                         std::size_t trials, Loss loss, double ridge, std::uint64_t seed,
                         const SweepOptions& opts = {}) {
    train.check();
    test.check();
    if (train.n_cols() != test.n_cols())
        throw DimensionError("sweep: train/test feature dims differ");
    if (trials < 2) throw ConfigError("sweep: trials must be >= 2");
    for (std::size_t k : ks)
        if (k < 1 || k > train.n_cols())
            throw DimensionError("sweep: target dim " + std::to_string(k) + " not in [1, " +
                                 std::to_string(train.n_cols()) + "]");
    if (loss == Loss::Logistic) {
        train.check_binary_labels();
        test.check_binary_labels();
    }

    const Vector diag_x = std::visit([](const auto& m) { return estimate_diag_streaming(m).diag; },
                                     train.features);

    struct CellAccum {
        std::vector<double> metrics;
    };
    std::vector<CellAccum> accum(lambdas.size() * ks.size());
    for (auto& c : accum) c.metrics.resize(trials);

    parallel_for_index(ks.size() * trials, opts.threads, [&](std::size_t unit) {
        const std::size_t ki = unit / trials;
        const std::size_t t = unit % trials;
        const ProjectionSpec spec{seed + t, train.n_cols(), ks[ki], opts.projection};
        for (std::size_t li = 0; li < lambdas.size(); ++li) {
            const DenseMatrix z_train = transform(train, lambdas[li], diag_x, spec, opts.eps);
            const DenseMatrix z_test = transform(test, lambdas[li], diag_x, spec, opts.eps);
            Vector w = loss == Loss::Squared
                           ? train_linear(z_train, train.labels, ridge)
                           : train_logistic(z_train, train.labels, opts.epochs, opts.step, ridge);
            const double metric = loss == Loss::Squared
                                      ? mse_metric(z_test, test.labels, w)
                                      : accuracy_metric(z_test, test.labels, w);
            accum[li * ks.size() + ki].metrics[t] = metric;
        }
    });

    SweepResult result;
    result.trials = trials;
    result.loss = loss;
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
        for (std::size_t ki = 0; ki < ks.size(); ++ki) {
            const auto& m = accum[li * ks.size() + ki].metrics;
            double mean = 0.0;
            for (double v : m) mean += v;
            mean /= static_cast<double>(m.size());
            double ss = 0.0;
            for (double v : m) ss += (v - mean) * (v - mean);
            result.cells.push_back(
                {lambdas[li], ks[ki], mean,
                 std::sqrt(ss / static_cast<double>(m.size() - 1))});
        }
    }
    return result;
}

struct JointTrainOptions {
    double init_lambda = 0.0;
    std::size_t epochs = 200;
    double step_w = 0.0;        // <= 0 picks a power-iteration default
    double step_lambda = 0.05;
    double ridge = 0.0;
    double eps = default_diag_eps();
};

namespace detail {

// ln(diag) with guarded coordinates contributing zero, matching the scale-1
// fallback in build_lambda.
inline Vector guarded_log_diag(const Vector& diag_x, double eps) {
    const auto mask = ddrp::detail::near_zero_mask(diag_x, eps);
    Vector out(diag_x.size(), 0.0);
    for (std::size_t i = 0; i < diag_x.size(); ++i)
        if (!mask[i]) out[i] = std::log(diag_x[i]);
    return out;
}

} // namespace detail

// Loss and gradients of the joint objective at (w, lambda). The lambda
// derivative uses d/d lambda (D^lambda x) = ln(diag) (.) D^lambda x, with
// guarded coordinates contributing zero.
struct JointGradients {
    double loss_value = 0.0;
    Vector grad_w;
    double grad_lambda = 0.0;
};

inline DenseMatrix lambda_scaled_projection(const LabeledDataset& ds, double lambda,
                                            const Vector& diag_x, const Vector& log_diag,
                                            const ProjectionSpec& spec, double eps) {
    // projection of X (ln d (.) D^lambda), the column-wise lambda derivative
    const Preprocessor pre = build_lambda(diag_x, lambda, eps);
    return std::visit(
        [&](const auto& m) {
            DenseMatrix dense = [&]() {
                if constexpr (std::is_same_v<std::decay_t<decltype(m)>, SparseMatrixCSR>)
                    return apply_x(pre, m).to_dense();
                else
                    return apply_x(pre, m);
            }();
            for (std::size_t i = 0; i < dense.n_rows; ++i) {
                double* row = dense.values.data() + i * dense.n_cols;
                for (std::size_t j = 0; j < dense.n_cols; ++j) row[j] *= log_diag[j];
            }
            return project_rows(dense, sample_projection(spec));
        },
        ds.features);
}

inline double joint_loss(const DenseMatrix& z, const Vector& labels, const Vector& w, Loss loss,
                         double ridge) {
    if (loss == Loss::Logistic) return logistic_loss(z, labels, w, ridge);
    double sum = 0.0;
    for (std::size_t i = 0; i < z.n_rows; ++i) {
        const double r = dot(z.values.data() + i * z.n_cols, w.data(), z.n_cols) - labels[i];
        sum += r * r;
    }
    return sum / static_cast<double>(z.n_rows) + ridge * dot(w.data(), w.data(), w.size());
}

inline JointGradients joint_loss_gradients(const LabeledDataset& ds, const ProjectionSpec& spec,
                                           Loss loss, const Vector& w, double lambda,
                                           double ridge, double eps = default_diag_eps()) {
    ds.check();
    const std::size_t n = ds.n_rows();
    const Vector diag_x = std::visit([](const auto& m) { return estimate_diag_streaming(m).diag; },
                                     ds.features);
    const Vector log_diag = detail::guarded_log_diag(diag_x, eps);
    const DenseMatrix z = transform(ds, lambda, diag_x, spec, eps);

    JointGradients out;
    out.loss_value = joint_loss(z, ds.labels, w, loss, ridge);

    Vector residual_coeff(n);
    if (loss == Loss::Logistic) {
        for (std::size_t i = 0; i < n; ++i) {
            const double margin =
                ds.labels[i] * dot(z.values.data() + i * z.n_cols, w.data(), z.n_cols);
            residual_coeff[i] = -ds.labels[i] / (1.0 + std::exp(margin)) / static_cast<double>(n);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double r =
                dot(z.values.data() + i * z.n_cols, w.data(), z.n_cols) - ds.labels[i];
            residual_coeff[i] = 2.0 * r / static_cast<double>(n);
        }
    }
    out.grad_w.assign(w.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = z.values.data() + i * z.n_cols;
        for (std::size_t a = 0; a < w.size(); ++a) out.grad_w[a] += residual_coeff[i] * row[a];
    }
    for (std::size_t a = 0; a < w.size(); ++a) out.grad_w[a] += 2.0 * ridge * w[a];

    const DenseMatrix zl = lambda_scaled_projection(ds, lambda, diag_x, log_diag, spec, eps);
    for (std::size_t i = 0; i < n; ++i)
        out.grad_lambda += residual_coeff[i] *
                           dot(zl.values.data() + i * zl.n_cols, w.data(), zl.n_cols);
    return out;
}

// Joint gradient descent over (w, lambda). A halving backtrack keeps the loss
// non-increasing; a loss that stays NaN is a step-size error.
inline LambdaModel joint_train(const LabeledDataset& ds, const ProjectionSpec& spec, Loss loss,
                               const JointTrainOptions& opts = {}) {
    ds.check();
    if (loss == Loss::Logistic) ds.check_binary_labels();
    const std::size_t n = ds.n_rows();
    const Vector diag_x = std::visit([](const auto& m) { return estimate_diag_streaming(m).diag; },
                                     ds.features);

    const auto make_z = [&](double lambda) { return transform(ds, lambda, diag_x, spec, opts.eps); };

    double lambda = opts.init_lambda;
    DenseMatrix z = make_z(lambda);
    Vector w(spec.target_dim, 0.0);
    double step_w = opts.step_w;
    if (step_w <= 0.0) {
        const double lip = loss == Loss::Logistic
                               ? power_iteration_sq_norm(z) / (4.0 * static_cast<double>(n)) +
                                     2.0 * opts.ridge
                               : 2.0 * power_iteration_sq_norm(z) / static_cast<double>(n) +
                                     2.0 * opts.ridge;
        step_w = lip > 0.0 ? 0.5 / lip : 1.0;
    }
    double step_lambda = opts.step_lambda;
    double current = joint_loss(z, ds.labels, w, loss, opts.ridge);
    if (std::isnan(current)) throw StepSizeError("joint_train: initial loss is NaN");

    for (std::size_t e = 0; e < opts.epochs; ++e) {
        const JointGradients g =
            joint_loss_gradients(ds, spec, loss, w, lambda, opts.ridge, opts.eps);
        const Vector& gw = g.grad_w;
        const double glambda = g.grad_lambda;

        const double gnorm =
            std::sqrt(dot(gw.data(), gw.data(), gw.size()) + glambda * glambda);
        if (gnorm < 1e-10) break;

        // simultaneous step with halving backtrack
        double sw = step_w, sl = step_lambda;
        bool accepted = false;
        for (int half = 0; half < 60; ++half) {
            Vector w_next(w.size());
            for (std::size_t a = 0; a < w.size(); ++a) w_next[a] = w[a] - sw * gw[a];
            const double lambda_next = lambda - sl * glambda;
            const DenseMatrix z_next = make_z(lambda_next);
            const double next = joint_loss(z_next, ds.labels, w_next, loss, opts.ridge);
            if (!std::isnan(next) && next <= current) {
                w = std::move(w_next);
                lambda = lambda_next;
                z = z_next;
                current = next;
                accepted = true;
                break;
            }
            sw *= 0.5;
            sl *= 0.5;
        }
        if (!accepted) {
            const DenseMatrix z_probe = make_z(lambda - sl * glambda);
            Vector w_probe(w.size());
            for (std::size_t a = 0; a < w.size(); ++a) w_probe[a] = w[a] - sw * gw[a];
            if (std::isnan(joint_loss(z_probe, ds.labels, w_probe, loss, opts.ridge)))
                throw StepSizeError("joint_train: loss is NaN even at the smallest step");
            break;  // cannot decrease further; converged to tolerance
        }
    }

    LambdaModel model;
    model.lambda = lambda;
    model.diag_x = diag_x;
    model.projection = spec;
    model.w = std::move(w);
    model.loss = loss;
    model.ridge = opts.ridge;
    return model;
}

inline double joint_train_loss(const LambdaModel& model, const LabeledDataset& ds,
                               double eps = default_diag_eps()) {
    const DenseMatrix z = transform(ds, model.lambda, model.diag_x, model.projection, eps);
    if (model.loss == Loss::Logistic)
        return logistic_loss(z, ds.labels, model.w, model.ridge);
    double sum = 0.0;
    for (std::size_t i = 0; i < z.n_rows; ++i) {
        const double r =
            dot(z.values.data() + i * z.n_cols, model.w.data(), z.n_cols) - ds.labels[i];
        sum += r * r;
    }
    return sum / static_cast<double>(z.n_rows) +
           model.ridge * dot(model.w.data(), model.w.data(), model.w.size());
}

} // namespace ddrp::learn
