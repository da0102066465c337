#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ddrp/errors.hpp"
#include "ddrp/fmm.hpp"
#include "ddrp/learn.hpp"
#include "ddrp/matrix.hpp"
#include "ddrp/preprocess.hpp"

namespace ddrp::io {

// --- numeric formatting ------------------------------------------------------

// All reals are serialized with 17 significant digits, which round-trips
// doubles exactly; re-serializing a parsed document is byte-identical.
inline std::string format_real(double v) {
    if (!std::isfinite(v)) throw IoError("cannot serialize non-finite value");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline double parse_real(const std::string& tok, std::size_t line) {
    double value = 0.0;
    const char* begin = tok.data();
    const char* end = tok.data() + tok.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
    if (begin < end && *begin == '+') ++begin;  // from_chars rejects a leading plus
    const auto r = std::from_chars(begin, end, value);
    if (r.ec != std::errc{} || r.ptr != end || begin == end)
        throw ParseError("not a number: '" + tok + "'", line);
    return value;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

} // namespace detail

// --- dense CSV ----------------------------------------------------------------

inline DenseMatrix read_dense_csv(const std::string& path, bool has_header = false) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    std::vector<double> values;
    std::size_t n_cols = 0, n_rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && has_header) continue;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        const auto cells = detail::split(line, ',');
        if (n_cols == 0) {
            n_cols = cells.size();
        } else if (cells.size() != n_cols) {
            throw ParseError("row has " + std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(n_cols), lineno);
        }
        for (const auto& c : cells) values.push_back(detail::parse_real(c, lineno));
        ++n_rows;
    }
    if (n_rows == 0) throw ParseError("no data rows in '" + path + "'", lineno == 0 ? 1 : lineno);
    return DenseMatrix(n_rows, n_cols, std::move(values));
}

inline learn::LabeledDataset read_dense_csv_labeled(const std::string& path, bool has_header,
                                                    std::size_t label_column) {
    const DenseMatrix all = read_dense_csv(path, has_header);
    if (label_column >= all.n_cols)
        throw ConfigError("label column " + std::to_string(label_column) + " out of range (" +
                          std::to_string(all.n_cols) + " columns)");
    DenseMatrix features(all.n_rows, all.n_cols - 1);
    Vector labels(all.n_rows);
    for (std::size_t i = 0; i < all.n_rows; ++i) {
        labels[i] = all(i, label_column);
        std::size_t out = 0;
        for (std::size_t j = 0; j < all.n_cols; ++j)
            if (j != label_column) features(i, out++) = all(i, j);
    }
    return {std::move(features), std::move(labels)};
}

inline void write_dense_csv(const DenseMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    std::string line;
    for (std::size_t i = 0; i < m.n_rows; ++i) {
        line.clear();
        for (std::size_t j = 0; j < m.n_cols; ++j) {
            if (j) line += ',';
            line += format_real(m(i, j));
        }
        line += '\n';
        out << line;
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

// --- libsvm -------------------------------------------------------------------

// Lines "label idx:val idx:val ..." with 1-based strictly increasing indices.
// dim_override pins the feature dimension; 0 infers it from the max index.
inline learn::LabeledDataset read_libsvm(const std::string& path, std::size_t dim_override = 0) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    SparseMatrixCSR m;
    Vector labels;
    std::string line;
    std::size_t lineno = 0;
    std::size_t max_index = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) throw ParseError("missing label", lineno);
        labels.push_back(detail::parse_real(tok, lineno));

        std::size_t prev_index = 0;
        while (ls >> tok) {
            const std::size_t colon = tok.find(':');
            if (colon == std::string::npos)
                throw ParseError("expected idx:val, got '" + tok + "'", lineno);
            std::size_t idx = 0;
            const char* b = tok.data();
            const auto r = std::from_chars(b, b + colon, idx);
            if (r.ec != std::errc{} || r.ptr != b + colon || idx == 0)
                throw ParseError("bad feature index '" + tok.substr(0, colon) + "'", lineno);
            if (idx <= prev_index)
                throw ParseError("feature indices not strictly increasing at index " +
                                 std::to_string(idx), lineno);
            prev_index = idx;
            max_index = std::max(max_index, idx);
            if (dim_override && idx > dim_override)
                throw ParseError("feature index " + std::to_string(idx) +
                                 " exceeds forced dimension " + std::to_string(dim_override),
                                 lineno);
            m.col_indices.push_back(idx - 1);  // stored 0-based
            m.values.push_back(detail::parse_real(tok.substr(colon + 1), lineno));
        }
        m.row_offsets.push_back(m.values.size());
        ++m.n_rows;
    }
    if (m.n_rows == 0) throw ParseError("no data rows in '" + path + "'", 1);
    m.n_cols = dim_override ? dim_override : max_index;
    m.validate();
    return {std::move(m), std::move(labels)};
}

inline void write_libsvm(const learn::LabeledDataset& ds, const std::string& path) {
    if (!ds.is_sparse()) throw ConfigError("write_libsvm: dataset is not sparse");
    const auto& m = std::get<SparseMatrixCSR>(ds.features);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (std::size_t i = 0; i < m.n_rows; ++i) {
        std::string line = format_real(ds.labels[i]);
        auto cols = m.row_cols(i);
        auto vals = m.row_vals(i);
        for (std::size_t p = 0; p < cols.size(); ++p) {
            line += ' ';
            line += std::to_string(cols[p] + 1);
            line += ':';
            line += format_real(vals[p]);
        }
        line += '\n';
        out << line;
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

// --- results document -----------------------------------------------------------

struct TrialStatsRecord {
    std::string method;
    std::string projection;
    std::size_t k = 0;
    std::size_t trials = 0;
    double mean = 0.0;
    double std_dev = 0.0;
    double sem = 0.0;
};

struct SweepCellRecord {
    double lambda = 0.0;
    std::size_t k = 0;
    std::size_t trials = 0;
    double mean = 0.0;
    double std_dev = 0.0;
};

struct PhiReportRecord {
    double phi_identity = 0.0;
    double phi_quick = 0.0;
    double phi_optimal = 0.0;
    double optimal_lower_bound = 0.0;
    std::optional<double> mc_identity;
    std::optional<double> mc_quick;
    std::optional<double> mc_optimal;
};

struct PairCheckRecord {
    std::size_t pair = 0;
    std::size_t k = 0;
    double inner_product = 0.0;
    double mc_mean = 0.0;
    double mc_variance = 0.0;
    double exact_variance = 0.0;
    double bound = 0.0;
    bool mean_ok = false;
    bool variance_ok = false;
    bool bound_ok = false;
};

enum class ResultsKind { TrialStats, SweepCells, Phi, PairChecks, Empty };

inline const char* to_string(ResultsKind k) {
    switch (k) {
        case ResultsKind::TrialStats: return "trial_stats";
        case ResultsKind::SweepCells: return "sweep_cells";
        case ResultsKind::Phi: return "phi_report";
        case ResultsKind::PairChecks: return "pair_checks";
        case ResultsKind::Empty: return "empty";
    }
    return "?";
}

struct ResultsDocument {
    std::string schema_version = "1";
    std::string command;
    std::vector<std::pair<std::string, std::string>> config;  // emitted in order
    ResultsKind kind = ResultsKind::Empty;
    std::vector<TrialStatsRecord> trial_stats;
    std::vector<SweepCellRecord> sweep_cells;
    std::optional<PhiReportRecord> phi;
    std::vector<PairCheckRecord> pair_checks;
};

namespace detail {

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

} // namespace detail

// Hand-rolled emitter: fixed key order and 17-significant-digit reals give a
// canonical byte representation.
inline std::string serialize_results(const ResultsDocument& doc) {
    std::string s;
    s += "{\n";
    s += "  \"schema_version\": \"" + detail::json_escape(doc.schema_version) + "\",\n";
    s += "  \"command\": \"" + detail::json_escape(doc.command) + "\",\n";
    s += "  \"config\": {";
    for (std::size_t i = 0; i < doc.config.size(); ++i) {
        if (i) s += ",";
        s += "\n    \"" + detail::json_escape(doc.config[i].first) + "\": \"" +
             detail::json_escape(doc.config[i].second) + "\"";
    }
    s += doc.config.empty() ? "},\n" : "\n  },\n";
    s += "  \"results_kind\": \"" + std::string(to_string(doc.kind)) + "\",\n";
    s += "  \"results\": [";

    bool first = true;
    const auto item = [&](const std::string& body) {
        if (!first) s += ",";
        first = false;
        s += "\n    {" + body + "}";
    };
    switch (doc.kind) {
        case ResultsKind::TrialStats:
            for (const auto& t : doc.trial_stats)
                item("\"method\": \"" + detail::json_escape(t.method) + "\", \"projection\": \"" +
                     detail::json_escape(t.projection) + "\", \"k\": " + std::to_string(t.k) +
                     ", \"trials\": " + std::to_string(t.trials) +
                     ", \"mean\": " + format_real(t.mean) + ", \"std\": " +
                     format_real(t.std_dev) + ", \"sem\": " + format_real(t.sem));
            break;
        case ResultsKind::SweepCells:
            for (const auto& c : doc.sweep_cells)
                item("\"lambda\": " + format_real(c.lambda) + ", \"k\": " + std::to_string(c.k) +
                     ", \"trials\": " + std::to_string(c.trials) +
                     ", \"mean\": " + format_real(c.mean) +
                     ", \"std\": " + format_real(c.std_dev));
            break;
        case ResultsKind::Phi:
            if (doc.phi) {
                std::string body = "\"phi_identity\": " + format_real(doc.phi->phi_identity) +
                                   ", \"phi_quick\": " + format_real(doc.phi->phi_quick) +
                                   ", \"phi_optimal\": " + format_real(doc.phi->phi_optimal) +
                                   ", \"optimal_lower_bound\": " +
                                   format_real(doc.phi->optimal_lower_bound);
                if (doc.phi->mc_identity) body += ", \"mc_identity\": " + format_real(*doc.phi->mc_identity);
                if (doc.phi->mc_quick) body += ", \"mc_quick\": " + format_real(*doc.phi->mc_quick);
                if (doc.phi->mc_optimal) body += ", \"mc_optimal\": " + format_real(*doc.phi->mc_optimal);
                item(body);
            }
            break;
        case ResultsKind::PairChecks:
            for (const auto& p : doc.pair_checks)
                item("\"pair\": " + std::to_string(p.pair) + ", \"k\": " + std::to_string(p.k) +
                     ", \"inner_product\": " + format_real(p.inner_product) +
                     ", \"mc_mean\": " + format_real(p.mc_mean) +
                     ", \"mc_variance\": " + format_real(p.mc_variance) +
                     ", \"exact_variance\": " + format_real(p.exact_variance) +
                     ", \"bound\": " + format_real(p.bound) +
                     ", \"mean_ok\": " + (p.mean_ok ? "true" : "false") +
                     ", \"variance_ok\": " + (p.variance_ok ? "true" : "false") +
                     ", \"bound_ok\": " + (p.bound_ok ? "true" : "false"));
            break;
        case ResultsKind::Empty: break;
    }
    s += first ? "]\n" : "\n  ]\n";
    s += "}\n";
    return s;
}

inline void write_results(const ResultsDocument& doc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << serialize_results(doc);
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline ResultsDocument parse_results(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), 1);
    }
    ResultsDocument doc;
    try {
        doc.schema_version = j.at("schema_version").get<std::string>();
        if (doc.schema_version != "1")
            throw ConfigError("unsupported results schema_version '" + doc.schema_version + "'");
        doc.command = j.at("command").get<std::string>();
        for (const auto& [key, value] : j.at("config").items())
            doc.config.emplace_back(key, value.get<std::string>());
        const std::string kind = j.at("results_kind").get<std::string>();
        const auto& results = j.at("results");
        if (kind == "trial_stats") {
            doc.kind = ResultsKind::TrialStats;
            for (const auto& r : results)
                doc.trial_stats.push_back({r.at("method").get<std::string>(),
                                           r.at("projection").get<std::string>(),
                                           r.at("k").get<std::size_t>(),
                                           r.at("trials").get<std::size_t>(),
                                           r.at("mean").get<double>(), r.at("std").get<double>(),
                                           r.at("sem").get<double>()});
        } else if (kind == "sweep_cells") {
            doc.kind = ResultsKind::SweepCells;
            for (const auto& r : results)
                doc.sweep_cells.push_back({r.at("lambda").get<double>(),
                                           r.at("k").get<std::size_t>(),
                                           r.at("trials").get<std::size_t>(),
                                           r.at("mean").get<double>(), r.at("std").get<double>()});
        } else if (kind == "phi_report") {
            doc.kind = ResultsKind::Phi;
            if (!results.empty()) {
                const auto& r = results.front();
                PhiReportRecord p;
                p.phi_identity = r.at("phi_identity").get<double>();
                p.phi_quick = r.at("phi_quick").get<double>();
                p.phi_optimal = r.at("phi_optimal").get<double>();
                p.optimal_lower_bound = r.at("optimal_lower_bound").get<double>();
                if (r.contains("mc_identity")) p.mc_identity = r.at("mc_identity").get<double>();
                if (r.contains("mc_quick")) p.mc_quick = r.at("mc_quick").get<double>();
                if (r.contains("mc_optimal")) p.mc_optimal = r.at("mc_optimal").get<double>();
                doc.phi = p;
            }
        } else if (kind == "pair_checks") {
            doc.kind = ResultsKind::PairChecks;
            for (const auto& r : results)
                doc.pair_checks.push_back(
                    {r.at("pair").get<std::size_t>(), r.at("k").get<std::size_t>(),
                     r.at("inner_product").get<double>(), r.at("mc_mean").get<double>(),
                     r.at("mc_variance").get<double>(), r.at("exact_variance").get<double>(),
                     r.at("bound").get<double>(), r.at("mean_ok").get<bool>(),
                     r.at("variance_ok").get<bool>(), r.at("bound_ok").get<bool>()});
        } else if (kind == "empty") {
            doc.kind = ResultsKind::Empty;
        } else {
            throw ConfigError("unknown results_kind '" + kind + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("results document: ") + e.what(), 1);
    }
    return doc;
}

inline ResultsDocument read_results(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_results(buf.str());
}

// Flat CSV for plotting; column orders are part of the format contract:
// trial stats "method,k,trials,mean,std", sweep cells "lambda,k,trials,mean,std".
inline std::string results_to_csv(const ResultsDocument& doc) {
    std::string s;
    switch (doc.kind) {
        case ResultsKind::TrialStats:
            s = "method,k,trials,mean,std\n";
            for (const auto& t : doc.trial_stats)
                s += t.method + "," + std::to_string(t.k) + "," + std::to_string(t.trials) + "," +
                     format_real(t.mean) + "," + format_real(t.std_dev) + "\n";
            break;
        case ResultsKind::SweepCells:
            s = "lambda,k,trials,mean,std\n";
            for (const auto& c : doc.sweep_cells)
                s += format_real(c.lambda) + "," + std::to_string(c.k) + "," +
                     std::to_string(c.trials) + "," + format_real(c.mean) + "," +
                     format_real(c.std_dev) + "\n";
            break;
        case ResultsKind::Phi:
            s = "quantity,value\n";
            if (doc.phi) {
                s += "phi_identity," + format_real(doc.phi->phi_identity) + "\n";
                s += "phi_quick," + format_real(doc.phi->phi_quick) + "\n";
                s += "phi_optimal," + format_real(doc.phi->phi_optimal) + "\n";
                s += "optimal_lower_bound," + format_real(doc.phi->optimal_lower_bound) + "\n";
                if (doc.phi->mc_identity) s += "mc_identity," + format_real(*doc.phi->mc_identity) + "\n";
                if (doc.phi->mc_quick) s += "mc_quick," + format_real(*doc.phi->mc_quick) + "\n";
                if (doc.phi->mc_optimal) s += "mc_optimal," + format_real(*doc.phi->mc_optimal) + "\n";
            }
            break;
        case ResultsKind::PairChecks:
            s = "pair,k,inner_product,mc_mean,mc_variance,exact_variance,bound,mean_ok,variance_ok,bound_ok\n";
            for (const auto& p : doc.pair_checks)
                s += std::to_string(p.pair) + "," + std::to_string(p.k) + "," +
                     format_real(p.inner_product) + "," + format_real(p.mc_mean) + "," +
                     format_real(p.mc_variance) + "," + format_real(p.exact_variance) + "," +
                     format_real(p.bound) + "," + (p.mean_ok ? "1" : "0") + "," +
                     (p.variance_ok ? "1" : "0") + "," + (p.bound_ok ? "1" : "0") + "\n";
            break;
        case ResultsKind::Empty: break;
    }
    return s;
}

inline void write_text(const std::string& text, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace ddrp::io
