// ddrp: data-dependent random projection experiments.
//
// Subcommands generate synthetic matrices, benchmark approximate matrix
// products, report the variance objective Phi, sweep projected regression and
// classification over (lambda, k), and validate the sign-projection variance
// oracle. Every subcommand is a pure function of its flags and input files:
// identical invocations produce byte-identical outputs, for any --threads.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ddrp/ddrp.hpp"

namespace {

using namespace ddrp;

std::string format_u64(std::uint64_t v) { return std::to_string(v); }

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::string join_reals(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += io::format_real(v[i]);
    }
    return s;
}

std::string join_strings(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += v[i];
    }
    return s;
}

void emit(const io::ResultsDocument& doc, const std::string& out_path,
          const std::string& csv_path) {
    if (out_path.empty())
        std::cout << io::serialize_results(doc);
    else
        io::write_results(doc, out_path);
    if (!csv_path.empty()) io::write_text(io::results_to_csv(doc), csv_path);
}

ProjectionKind parse_projection(const std::string& s) {
    if (s == "sign") return ProjectionKind::SignScaled;
    if (s == "gaussian") return ProjectionKind::Gaussian;
    throw ConfigError("unknown projection '" + s + "' (expected sign|gaussian)");
}

fmm::MethodKind parse_method(const std::string& s) {
    if (s == "oblivious") return fmm::MethodKind::Oblivious;
    if (s == "quick") return fmm::MethodKind::Quick;
    if (s == "optimal") return fmm::MethodKind::Optimal;
    throw ConfigError("unknown method '" + s + "' (expected oblivious|quick|optimal)");
}

// "kindA-kindB", e.g. diag-diag or uniform-unifskew
std::pair<synth::Kind, synth::Kind> parse_pair(const std::string& s) {
    const auto dash = s.find('-');
    if (dash == std::string::npos)
        throw ConfigError("pair must look like diag-diag or uniform-unifskew");
    return {synth::kind_from_string(s.substr(0, dash)),
            synth::kind_from_string(s.substr(dash + 1))};
}

struct DatasetFlags {
    std::string format = "csv";
    std::size_t label_col = 0;
    bool has_header = false;
    std::size_t dim_override = 0;

    learn::LabeledDataset load(const std::string& path) const {
        if (format == "csv") return io::read_dense_csv_labeled(path, has_header, label_col);
        if (format == "libsvm") return io::read_libsvm(path, dim_override);
        throw ConfigError("unknown format '" + format + "' (expected csv|libsvm)");
    }
};

int cmd_synth(const std::string& kind, std::size_t d, std::size_t n, std::uint64_t seed,
              double laplace_scale, const std::string& out) {
    synth::SyntheticSpec spec{synth::kind_from_string(kind), d, n, seed, laplace_scale};
    const DenseMatrix m = synth::generate(spec);
    if (out.empty()) {
        std::string text;
        for (std::size_t i = 0; i < m.n_rows; ++i) {
            for (std::size_t j = 0; j < m.n_cols; ++j) {
                if (j) text += ',';
                text += io::format_real(m(i, j));
            }
            text += '\n';
        }
        std::cout << text;
    } else {
        io::write_dense_csv(m, out);
    }
    return 0;
}

int cmd_fmm_bench(const std::string& x_path, const std::string& w_path, bool has_header,
                  const std::string& pair, std::size_t d, std::size_t n, double laplace_scale,
                  const std::vector<std::size_t>& ks, const std::vector<std::string>& method_names,
                  std::size_t trials, std::uint64_t seed, const std::string& orientation,
                  const std::string& projection, std::size_t moment_rows, unsigned threads,
                  const std::string& out, const std::string& csv) {
    DenseMatrix x, w;
    if (!pair.empty()) {
        const auto [kind_x, kind_w] = parse_pair(pair);
        x = synth::generate({kind_x, d, n, seed, laplace_scale});
        w = synth::generate({kind_w, d, n, seed + 1, laplace_scale});
    } else {
        if (x_path.empty() || w_path.empty())
            throw ConfigError("either --pair or both --x and --w are required");
        x = io::read_dense_csv(x_path, has_header);
        w = io::read_dense_csv(w_path, has_header);
    }
    if (orientation == "feature") {
        x = x.transposed();
        w = w.transposed();
    } else if (orientation != "data") {
        throw ConfigError("orientation must be data or feature");
    }
    if (x.n_cols != w.n_cols)
        throw DimensionError("fmm-bench: X has " + std::to_string(x.n_cols) +
                             " features, W has " + std::to_string(w.n_cols));

    const ProjectionKind proj = parse_projection(projection);
    std::vector<fmm::FmmMethod> methods;
    for (const auto& name : method_names) methods.push_back({parse_method(name), proj});

    fmm::BenchmarkOptions opts;
    opts.trials = trials;
    opts.seed = seed;
    opts.threads = threads;
    opts.moment_subsample = moment_rows;
    const auto stats = fmm::run_benchmark(x, w, methods, ks, opts);

    io::ResultsDocument doc;
    doc.command = "fmm-bench";
    doc.config = {
        {"ks", join_sizes(ks)},
        {"laplace_scale", io::format_real(laplace_scale)},
        {"methods", join_strings(method_names)},
        {"moment_rows", format_u64(moment_rows)},
        {"orientation", orientation},
        {"pair", pair},
        {"projection", projection},
        {"seed", format_u64(seed)},
        {"trials", format_u64(trials)},
        {"w", w_path},
        {"x", x_path},
    };
    doc.kind = io::ResultsKind::TrialStats;
    for (const auto& st : stats)
        doc.trial_stats.push_back({fmm::to_string(st.method.kind),
                                   to_string(st.method.projection_kind), st.k, st.trials,
                                   st.mean_sq_error, st.std_sq_error, st.sem_sq_error});
    emit(doc, out, csv);
    return 0;
}

int cmd_phi_report(const std::string& x_path, const std::string& w_path, bool has_header,
                   const std::string& orientation, double floor, double eps,
                   std::size_t mc_trials, std::uint64_t seed, const std::string& out,
                   const std::string& csv) {
    DenseMatrix x = io::read_dense_csv(x_path, has_header);
    DenseMatrix w = io::read_dense_csv(w_path, has_header);
    if (orientation == "feature") {
        x = x.transposed();
        w = w.transposed();
    } else if (orientation != "data") {
        throw ConfigError("orientation must be data or feature");
    }
    const SecondMoment mx = estimate_full(x);
    const SecondMoment mw = estimate_full(w);

    for (const auto* m : {&mx, &mw}) {
        const SymEig e = sym_eig(*m->full);
        if (e.eigenvalues.back() < floor * e.eigenvalues.front())
            std::cerr << "ddrp: warning: covariance is near-singular; eigenvalues are clamped "
                         "at the floor and Phi refers to the regularized covariances\n";
    }

    const PhiReport report = phi_report(mx, mw, floor, eps);
    io::PhiReportRecord rec;
    rec.phi_identity = report.phi_identity;
    rec.phi_quick = report.phi_quick;
    rec.phi_optimal = report.phi_optimal;
    rec.optimal_lower_bound = report.optimal_lower_bound;

    if (mc_trials > 0) {
        const VectorSampler sx = gaussian_sampler(mx);
        const VectorSampler sw = gaussian_sampler(mw);
        rec.mc_identity =
            phi_monte_carlo(Preprocessor{IdentityPre{}}, sx, sw, mx.dim, mc_trials, seed);
        rec.mc_quick =
            phi_monte_carlo(build_quick(mx.diag, mw.diag, eps), sx, sw, mx.dim, mc_trials,
                            seed + 1);
        rec.mc_optimal =
            phi_monte_carlo(build_optimal(mx, mw, floor), sx, sw, mx.dim, mc_trials, seed + 2);
    }

    io::ResultsDocument doc;
    doc.command = "phi-report";
    doc.config = {
        {"eps", io::format_real(eps)},
        {"floor", io::format_real(floor)},
        {"mc_trials", format_u64(mc_trials)},
        {"orientation", orientation},
        {"seed", format_u64(seed)},
        {"w", w_path},
        {"x", x_path},
    };
    doc.kind = io::ResultsKind::Phi;
    doc.phi = rec;
    emit(doc, out, csv);
    return 0;
}

struct LearnFlags {
    std::string train, test, projection = "sign", out, csv;
    DatasetFlags data;
    std::vector<double> lambdas{0.0};
    std::vector<std::size_t> ks{10};
    std::size_t trials = 100, epochs = 500;
    double ridge = 0.0, step = 0.0;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

int cmd_learn(learn::Loss loss, const LearnFlags& f) {
    const learn::LabeledDataset train = f.data.load(f.train);
    const learn::LabeledDataset test = f.data.load(f.test);

    learn::SweepOptions opts;
    opts.projection = parse_projection(f.projection);
    opts.epochs = f.epochs;
    opts.step = f.step;
    opts.threads = f.threads;
    const learn::SweepResult result =
        learn::sweep(train, test, f.lambdas, f.ks, f.trials, loss, f.ridge, f.seed, opts);

    io::ResultsDocument doc;
    doc.command = loss == learn::Loss::Squared ? "regress" : "classify";
    doc.config = {
        {"epochs", format_u64(f.epochs)},
        {"format", f.data.format},
        {"ks", join_sizes(f.ks)},
        {"lambdas", join_reals(f.lambdas)},
        {"projection", f.projection},
        {"ridge", io::format_real(f.ridge)},
        {"seed", format_u64(f.seed)},
        {"step", io::format_real(f.step)},
        {"test", f.test},
        {"train", f.train},
        {"trials", format_u64(f.trials)},
    };
    doc.kind = io::ResultsKind::SweepCells;
    for (const auto& cell : result.cells)
        doc.sweep_cells.push_back(
            {cell.lambda, cell.k, result.trials, cell.mean_metric, cell.std_metric});
    emit(doc, f.out, f.csv);
    return 0;
}

int cmd_variance_check(std::size_t d, std::size_t k, std::size_t pairs, std::size_t trials,
                       std::uint64_t seed, const std::string& out, const std::string& csv) {
    io::ResultsDocument doc;
    doc.command = "variance-check";
    doc.config = {
        {"d", format_u64(d)},
        {"k", format_u64(k)},
        {"pairs", format_u64(pairs)},
        {"seed", format_u64(seed)},
        {"trials", format_u64(trials)},
    };
    doc.kind = io::ResultsKind::PairChecks;

    rng::Stream vectors(rng::derive(seed, rng::Domain::PairSampling));
    for (std::size_t p = 0; p < pairs; ++p) {
        Vector x(d), w(d);
        for (double& v : x) v = vectors.next_gaussian();
        for (double& v : w) v = vectors.next_gaussian();

        const ProjectionSpec spec{seed + 1000 * (p + 1), d, k, ProjectionKind::SignScaled};
        const MonteCarloEstimate est = inner_product_mc(x, w, spec, trials);
        const double ip = dot(std::span<const double>(x), std::span<const double>(w));
        const double exact = sign_variance_exact(x, w, k);
        const double bound = variance_bound(x, w, k, ProjectionKind::SignScaled);

        io::PairCheckRecord rec;
        rec.pair = p;
        rec.k = k;
        rec.inner_product = ip;
        rec.mc_mean = est.mean;
        rec.mc_variance = est.variance;
        rec.exact_variance = exact;
        rec.bound = bound;
        rec.mean_ok = std::abs(est.mean - ip) <=
                      4.0 * std::sqrt(est.variance / static_cast<double>(trials));
        rec.variance_ok = std::abs(est.variance - exact) <= 0.05 * exact;
        rec.bound_ok = est.variance <= 1.05 * bound && exact <= bound + 1e-12;
        doc.pair_checks.push_back(rec);
    }
    emit(doc, out, csv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"data-dependent random projections toolkit"};
    app.require_subcommand(1);

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic matrix as CSV");
    std::string synth_kind;
    std::size_t synth_d = 10, synth_n = 100;
    std::uint64_t synth_seed = 0;
    double synth_scale = 1.0;
    std::string synth_out;
    synth_cmd->add_option("--kind", synth_kind, "diag|uniform|unifskew")->required();
    synth_cmd->add_option("--d", synth_d, "feature dimension")->required();
    synth_cmd->add_option("--n", synth_n, "number of rows")->required();
    synth_cmd->add_option("--seed", synth_seed, "generator seed (pairs use seed and seed+1)");
    synth_cmd->add_option("--laplace-scale", synth_scale, "scale of the Laplace draws (diag)");
    synth_cmd->add_option("--out", synth_out, "output CSV path (default stdout)");

    auto* fmm_cmd = app.add_subcommand("fmm-bench", "approximate matrix product benchmark");
    std::string fmm_x, fmm_w, fmm_pair, fmm_orientation = "data", fmm_projection = "sign";
    std::string fmm_out, fmm_csv;
    bool fmm_header = false;
    std::size_t fmm_d = 100, fmm_n = 1000, fmm_trials = 100, fmm_moment_rows = 0;
    double fmm_laplace_scale = 1.0;
    std::uint64_t fmm_seed = 0;
    unsigned fmm_threads = 0;
    std::vector<std::size_t> fmm_ks{5, 10, 20, 40, 80};
    std::vector<std::string> fmm_methods{"oblivious", "quick", "optimal"};
    fmm_cmd->add_option("--x", fmm_x, "CSV matrix for the X side");
    fmm_cmd->add_option("--w", fmm_w, "CSV matrix for the W side");
    fmm_cmd->add_flag("--has-header", fmm_header, "skip the first CSV line");
    fmm_cmd->add_option("--pair", fmm_pair,
                        "synthetic pair such as diag-diag or uniform-unifskew");
    fmm_cmd->add_option("--d", fmm_d, "synthetic feature dimension");
    fmm_cmd->add_option("--n", fmm_n, "synthetic rows");
    fmm_cmd->add_option("--laplace-scale", fmm_laplace_scale,
                        "scale of the Laplace draws behind diag synthetics");
    fmm_cmd->add_option("--ks", fmm_ks, "target dimensions")->delimiter(',');
    fmm_cmd->add_option("--methods", fmm_methods, "oblivious,quick,optimal")->delimiter(',');
    fmm_cmd->add_option("--trials", fmm_trials, "trials per (method, k)");
    fmm_cmd->add_option("--seed", fmm_seed, "base seed; trial t uses seed+t");
    fmm_cmd->add_option("--orientation", fmm_orientation,
                        "data (rows are vectors) or feature (compare transposed pair)");
    fmm_cmd->add_option("--projection", fmm_projection, "sign|gaussian");
    fmm_cmd->add_option("--moment-rows", fmm_moment_rows,
                        "estimate moments from this many sampled rows (0 = all)");
    fmm_cmd->add_option("--threads", fmm_threads, "worker threads (DDRP_THREADS fallback)");
    fmm_cmd->add_option("--out", fmm_out, "results JSON path (default stdout)");
    fmm_cmd->add_option("--csv", fmm_csv, "also emit plot-ready CSV here");

    auto* phi_cmd = app.add_subcommand("phi-report", "exact Phi values and the optimal bound");
    std::string phi_x, phi_w, phi_orientation = "data", phi_out, phi_csv;
    bool phi_header = false;
    double phi_floor = 1e-10, phi_eps = default_diag_eps();
    std::size_t phi_mc_trials = 0;
    std::uint64_t phi_seed = 0;
    phi_cmd->add_option("--x", phi_x, "CSV matrix for the X side")->required();
    phi_cmd->add_option("--w", phi_w, "CSV matrix for the W side")->required();
    phi_cmd->add_flag("--has-header", phi_header, "skip the first CSV line");
    phi_cmd->add_option("--orientation", phi_orientation, "data|feature");
    phi_cmd->add_option("--floor", phi_floor, "relative eigenvalue floor");
    phi_cmd->add_option("--eps", phi_eps, "near-zero diagonal guard");
    phi_cmd->add_option("--mc-trials", phi_mc_trials,
                        "Monte-Carlo cross-check sample count (0 = skip)");
    phi_cmd->add_option("--seed", phi_seed, "Monte-Carlo seed");
    phi_cmd->add_option("--out", phi_out, "results JSON path (default stdout)");
    phi_cmd->add_option("--csv", phi_csv, "also emit CSV here");

    LearnFlags reg, cls;
    reg.ridge = 1e-6;
    const auto add_learn_flags = [](CLI::App* cmd, LearnFlags& f, bool classify) {
        cmd->add_option("--train", f.train, "training dataset")->required();
        cmd->add_option("--test", f.test, "evaluation dataset")->required();
        cmd->add_option("--format", f.data.format, "csv|libsvm");
        cmd->add_option("--label-col", f.data.label_col, "label column for CSV input");
        cmd->add_flag("--has-header", f.data.has_header, "skip the first CSV line");
        cmd->add_option("--dim", f.data.dim_override, "force feature dimension (libsvm)");
        cmd->add_option("--lambdas", f.lambdas, "lambda grid")->delimiter(',');
        cmd->add_option("--ks", f.ks, "target dimensions")->delimiter(',');
        cmd->add_option("--trials", f.trials, "projections per cell");
        cmd->add_option("--ridge", f.ridge, "ridge strength");
        cmd->add_option("--seed", f.seed, "base seed; trial t uses seed+t");
        cmd->add_option("--projection", f.projection, "sign|gaussian");
        cmd->add_option("--threads", f.threads, "worker threads (DDRP_THREADS fallback)");
        cmd->add_option("--out", f.out, "results JSON path (default stdout)");
        cmd->add_option("--csv", f.csv, "also emit table CSV here");
        if (classify) {
            cmd->add_option("--epochs", f.epochs, "gradient descent epochs");
            cmd->add_option("--step", f.step, "step size (0 = 0.1/L default)");
        }
    };
    auto* reg_cmd = app.add_subcommand("regress", "projected ridge regression sweep");
    add_learn_flags(reg_cmd, reg, false);
    auto* cls_cmd = app.add_subcommand("classify", "projected logistic classification sweep");
    add_learn_flags(cls_cmd, cls, true);

    auto* var_cmd =
        app.add_subcommand("variance-check", "validate the sign-projection variance oracle");
    std::size_t var_d = 50, var_k = 4, var_pairs = 20, var_trials = 200000;
    std::uint64_t var_seed = 0;
    std::string var_out, var_csv;
    var_cmd->add_option("--d", var_d, "vector dimension");
    var_cmd->add_option("--k", var_k, "target dimension");
    var_cmd->add_option("--pairs", var_pairs, "number of sampled vector pairs");
    var_cmd->add_option("--trials", var_trials, "Monte-Carlo trials per pair");
    var_cmd->add_option("--seed", var_seed, "base seed");
    var_cmd->add_option("--out", var_out, "results JSON path (default stdout)");
    var_cmd->add_option("--csv", var_csv, "also emit CSV here");

    try {
        app.parse(argc, argv);
        if (synth_cmd->parsed())
            return cmd_synth(synth_kind, synth_d, synth_n, synth_seed, synth_scale, synth_out);
        if (fmm_cmd->parsed())
            return cmd_fmm_bench(fmm_x, fmm_w, fmm_header, fmm_pair, fmm_d, fmm_n,
                                 fmm_laplace_scale, fmm_ks, fmm_methods, fmm_trials, fmm_seed,
                                 fmm_orientation, fmm_projection, fmm_moment_rows, fmm_threads,
                                 fmm_out, fmm_csv);
        if (phi_cmd->parsed())
            return cmd_phi_report(phi_x, phi_w, phi_header, phi_orientation, phi_floor, phi_eps,
                                  phi_mc_trials, phi_seed, phi_out, phi_csv);
        if (reg_cmd->parsed()) return cmd_learn(learn::Loss::Squared, reg);
        if (cls_cmd->parsed()) return cmd_learn(learn::Loss::Logistic, cls);
        if (var_cmd->parsed())
            return cmd_variance_check(var_d, var_k, var_pairs, var_trials, var_seed, var_out,
                                      var_csv);
        return 1;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            // --help and friends print through CLI11's own path
            return app.exit(e);
        }
        std::cerr << "ddrp: error: cli: " << e.what() << "\n";
        return 2;
    } catch (const ddrp::Error& e) {
        std::cerr << "ddrp: error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "ddrp: error: internal: " << e.what() << "\n";
        return 1;
    }
}
