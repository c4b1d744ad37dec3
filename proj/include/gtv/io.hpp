#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtv/covariance.hpp"
#include "gtv/cv.hpp"
#include "gtv/graph.hpp"
#include "gtv/harness.hpp"
#include "gtv/solver.hpp"
#include "gtv/synth.hpp"
#include "gtv/theory.hpp"

namespace gtv::io {

using nlohmann::json;

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

inline bool parse_double(const std::string& cell, double& out) {
    const std::string t = trim(cell);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, sep)) cells.push_back(c);
    if (!line.empty() && line.back() == sep) cells.emplace_back();
    return cells;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw invalid_input("cannot open '" + path + "' for writing");
    f << std::setprecision(17);
    return f;
}

}  // namespace detail

/// Row-major numeric CSV. A first line that does not parse as numbers is
/// treated as a header and skipped.
inline Matrix read_matrix_csv(std::istream& in, const std::string& name = "csv") {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line);
        std::vector<double> row;
        bool numeric = true;
        for (const auto& c : cells) {
            double v = 0.0;
            if (!detail::parse_double(c, v)) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (rows.empty() && lineno == 1) continue;  // header
            throw invalid_input(name + ":" + std::to_string(lineno) + ": non-numeric cell");
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw invalid_input(name + ":" + std::to_string(lineno) + ": expected " +
                                std::to_string(rows.front().size()) + " columns, got " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    Matrix m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return m;
}

inline Matrix read_matrix_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw invalid_input("cannot open '" + path + "'");
    return read_matrix_csv(f, path);
}

/// Column vector from a one-column CSV, or a single-row CSV.
inline Vector read_vector_csv(const std::string& path) {
    const Matrix m = read_matrix_csv(path);
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw invalid_input(path + ": expected a single row or column");
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m, const std::vector<std::string>& header = {}) {
    out << std::setprecision(17);
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    if (!header.empty()) out << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
        out << '\n';
    }
}

inline void write_matrix_csv(const std::string& path, const Matrix& m, const std::vector<std::string>& header = {}) {
    auto f = detail::open_out(path);
    write_matrix_csv(f, m, header);
}

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j) {
    if (!j.is_array()) throw invalid_input("matrix must be a JSON array of rows");
    const Index rows = static_cast<Index>(j.size());
    const Index cols = rows ? static_cast<Index>(j.at(0).size()) : 0;
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& r = j.at(static_cast<std::size_t>(i));
        if (!r.is_array() || static_cast<Index>(r.size()) != cols) throw invalid_input("ragged matrix in JSON");
        for (Index c = 0; c < cols; ++c) m(i, c) = r.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

inline json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

/// {"p": int, "source": str, "matrix": [[...]]}, plus "threshold" when thresholded.
inline json to_json(const CovarianceEstimate& c) {
    json j{{"p", c.p()}, {"source", to_string(c.source)}, {"matrix", matrix_to_json(c.matrix)}};
    if (c.source == CovarianceSource::hard_thresholded) j["threshold"] = c.threshold;
    return j;
}

inline CovarianceEstimate covariance_from_json(const json& j) {
    CovarianceEstimate c;
    c.matrix = matrix_from_json(j.at("matrix"));
    c.source = covariance_source_from_string(j.value("source", std::string("sample")));
    c.threshold = j.value("threshold", 0.0);
    if (j.contains("p") && j.at("p").get<Index>() != c.p()) throw invalid_input("covariance JSON: p disagrees with matrix");
    if (c.matrix.rows() != c.matrix.cols()) throw invalid_input("covariance JSON: matrix is not square");
    return c;
}

/// Covariance from a JSON envelope (.json) or a plain CSV matrix (anything else).
inline CovarianceEstimate read_covariance(const std::string& path) {
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        std::ifstream f(path);
        if (!f) throw invalid_input("cannot open '" + path + "'");
        return covariance_from_json(json::parse(f));
    }
    CovarianceEstimate c;
    c.matrix = read_matrix_csv(path);
    if (c.matrix.rows() != c.matrix.cols()) throw invalid_input(path + ": covariance matrix is not square");
    return c;
}

inline json to_json(const FitResult& r) {
    return {{"beta", vector_to_json(r.beta)},
            {"objective", r.objective},
            {"kkt", r.kkt_residual},
            {"iters", r.iterations},
            {"converged", r.converged}};
}

inline void write_cv_table_csv(std::ostream& out, const std::vector<CvRow>& rows) {
    out << std::setprecision(17) << "lambda1,lambda_tv,lambda_s,fold,mse\n";
    for (const auto& r : rows)
        out << r.lambda1 << ',' << r.lambda_tv << ',' << r.lambda_s << ',' << r.fold << ',' << r.mse << '\n';
}

inline void write_edges_csv(std::ostream& out, const CovarianceGraph& g) {
    out << std::setprecision(17) << "j,k,weight,sign\n";
    for (const auto& e : g.edges) out << e.j << ',' << e.k << ',' << e.weight << ',' << e.sign << '\n';
}

inline void write_gamma_csv(std::ostream& out, const SparseMatrix& gamma) {
    out << std::setprecision(17) << "row,col,value\n";
    for (Index r = 0; r < gamma.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(gamma, r); it; ++it) out << it.row() << ',' << it.col() << ',' << it.value() << '\n';
}

inline const char* to_string(Misalignment m) {
    switch (m) {
        case Misalignment::none: return "none";
        case Misalignment::within_block_sd: return "within_block_sd";
        case Misalignment::split_blocks: return "split_blocks";
    }
    return "unknown";
}

inline json to_json(const Scenario& s) {
    return {{"family", gtv::to_string(s.family)},
            {"p", s.p},
            {"K", s.K},
            {"r", s.r},
            {"n", s.n},
            {"sigma_noise", s.sigma_noise},
            {"s", s.s},
            {"beta_noise_sd", s.beta_noise_sd},
            {"misalignment", to_string(s.misalignment)},
            {"within_block_sd", s.within_block_sd},
            {"split_blocks", s.split_count},
            {"seed", s.seed},
            {"fix_support", s.fix_support}};
}

/// Missing keys keep the values already in `base`.
inline Scenario scenario_from_json(const json& j, Scenario base = {}) {
    if (j.contains("family")) base.family = family_from_string(j.at("family").get<std::string>());
    base.p = j.value("p", base.p);
    base.K = j.value("K", base.K);
    base.r = j.value("r", base.r);
    base.n = j.value("n", base.n);
    base.sigma_noise = j.value("sigma_noise", base.sigma_noise);
    base.s = j.value("s", base.s);
    base.beta_noise_sd = j.value("beta_noise_sd", base.beta_noise_sd);
    base.seed = j.value("seed", base.seed);
    base.fix_support = j.value("fix_support", base.fix_support);
    base.within_block_sd = j.value("within_block_sd", base.within_block_sd);
    base.split_count = j.value("split_blocks", base.split_count);
    if (j.contains("misalignment")) {
        const auto m = j.at("misalignment").get<std::string>();
        if (m == "none") base.misalignment = Misalignment::none;
        else if (m == "within_block_sd") base.misalignment = Misalignment::within_block_sd;
        else if (m == "split_blocks") base.misalignment = Misalignment::split_blocks;
        else throw invalid_input("unknown misalignment '" + m + "'");
    }
    return base;
}

namespace detail {

// NaN and infinities are not representable in JSON; emit null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

inline json to_json(const TheoryReport& r) {
    const auto& in = r.inputs;
    json mu = json::array();
    for (const auto& m : in.mu) mu.push_back(m ? json(*m) : json(nullptr));
    return {{"graph_family", to_string(r.graph_family)},
            {"constants", "bounds hold up to absolute constants; C = 1, 48 and 8 literal"},
            {"lambda_1", r.lambda_1},
            {"rho_exact", r.rho_exact},
            {"rho_bound", r.rho_bound},
            {"kT_inv_bound", r.kT_inv_bound},
            {"min_eig_exact", r.min_eig_exact},
            {"min_eig_lower", r.min_eig_lower},
            {"lambda1_floor", r.lambda1_floor},
            {"mse_bound", detail::num(r.mse_bound)},
            {"prediction_bound", detail::num(r.prediction_bound)},
            {"consistency_proviso", detail::num(r.consistency_proviso)},
            {"lambda1_below_floor", r.lambda1_below_floor},
            {"alignment_condition", r.alignment_condition},
            {"inputs",
             {{"n", in.n},
              {"p", in.p},
              {"sigma", in.sigma},
              {"c_u", in.c_u},
              {"c_l", in.c_l},
              {"lambda_tv", in.lambda_tv},
              {"lambda_s", in.lambda_s},
              {"beta_l0", in.beta_l0},
              {"gamma_beta_l0", in.gamma_beta_l0},
              {"gamma_beta_l1", in.gamma_beta_l1},
              {"l_beta_inf", in.l_beta_inf},
              {"sigma_l11", in.sigma_l11},
              {"lambda_min", in.lambda_min},
              {"K", in.K()},
              {"block_sizes", in.block_sizes},
              {"mu", mu}}}};
}

inline void write_results_csv(std::ostream& out, const ExperimentResult& r) {
    out << std::setprecision(17)
        << "trial,method,seed,mse,lambda1,lambda_tv,lambda_s,lambda2,threshold,converged,runtime_ms,error\n";
    for (const auto& t : r.records) {
        std::string err = t.error;
        for (char& c : err)
            if (c == ',' || c == '\n') c = ';';
        out << t.trial << ',' << to_string(t.method) << ',' << t.seed << ',' << t.mse << ',' << t.lambda1 << ','
            << t.lambda_tv << ',' << t.lambda_s << ',' << t.lambda2 << ',' << t.threshold << ','
            << (t.converged ? 1 : 0) << ',' << t.runtime_ms << ',' << err << '\n';
    }
}

inline json summary_json(const ExperimentResult& r) {
    json methods = json::array();
    for (const auto& s : r.summary)
        methods.push_back({{"method", to_string(s.method)},
                           {"median_mse", detail::num(s.median_mse)},
                           {"boot_sd", detail::num(s.boot_sd)},
                           {"failures", s.failures}});
    return {{"scenario", to_json(r.scenario)}, {"master_seed", r.master_seed}, {"trials", r.trials}, {"methods", methods}};
}

/// Long format for external plotting: scenario, method, n_or_p, median_mse, boot_sd.
inline void write_plot_csv(std::ostream& out, const std::vector<ExperimentResult>& runs, bool by_p = false,
                           bool header = true) {
    out << std::setprecision(17);
    if (header) out << "scenario,method,n_or_p,median_mse,boot_sd\n";
    for (const auto& r : runs)
        for (const auto& s : r.summary)
            out << gtv::to_string(r.scenario.family) << ',' << to_string(s.method) << ','
                << (by_p ? r.scenario.p : r.scenario.n) << ',' << s.median_mse << ',' << s.boot_sd << '\n';
}

inline void write_stability_csv(std::ostream& out, const StabilityResult& s) {
    out << std::setprecision(17) << "method,a,b,correlation,tanimoto\n";
    for (const auto& p : s.pairs) {
        out << to_string(p.method) << ',' << p.a << ',' << p.b << ',';
        if (p.correlation) out << *p.correlation;
        out << ',' << p.tanimoto << '\n';
    }
}

}  // namespace gtv::io
