#pragma once

#include "homognet/experiments.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace homognet {

using json = nlohmann::json;

// ---- numeric formatting -----------------------------------------------------------

/// 17 significant digits: round-trips doubles exactly.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// ---- matrices ----------------------------------------------------------------------

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j) {
    const Index rows = static_cast<Index>(j.size());
    const Index cols = rows > 0 ? static_cast<Index>(j.at(0).size()) : 0;
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index jj = 0; jj < cols; ++jj) m(i, jj) = j.at(i).at(jj).get<double>();
    return m;
}

// ---- tags and dims -------------------------------------------------------------------

inline json tag_to_json(const FamilyTag& tag) {
    json j;
    j["kind"] = family_name(tag.kind);
    if (tag.kind == Family::MultiHeadAttention) j["temperature"] = tag.temperature;
    if (tag.kind == Family::StructuredMatrixSensing) {
        j["gauge"] = {{"name", tag.gauge.name}, {"s", tag.gauge.s}};
    }
    return j;
}

inline FamilyTag tag_from_json(const json& j) {
    FamilyTag tag;
    tag.kind = family_from_name(j.at("kind").get<std::string>());
    tag.temperature = j.value("temperature", 1.0);
    if (j.contains("gauge")) {
        const std::string gname = j["gauge"].value("name", "sparse_bounded");
        tag.gauge = gname == "l2" ? GaugeSpec::l2()
                                  : GaugeSpec::sparse_bounded(j["gauge"].value("s", 1.0));
    }
    return tag;
}

inline json dims_to_json(const Dims& d) {
    return json{{"m", d.m}, {"n", d.n}, {"T", d.T}};
}

inline Dims dims_from_json(const json& j) {
    Dims d;
    d.m = j.at("m").get<Index>();
    d.n = j.at("n").get<Index>();
    d.T = j.value("T", Index{1});
    return d;
}

// ---- teacher / model / certificate ---------------------------------------------------

inline json teacher_to_json(const TeacherSpec& t) {
    json j;
    j["tag"] = tag_to_json(t.tag);
    j["dims"] = dims_to_json(t.dims);
    j["rank"] = t.rank;
    j["U"] = matrix_to_json(t.U);
    j["V"] = matrix_to_json(t.V);
    j["sigma"] = t.sigma;
    return j;
}

inline TeacherSpec teacher_from_json(const json& j) {
    TeacherSpec t;
    t.tag = tag_from_json(j.at("tag"));
    t.dims = dims_from_json(j.at("dims"));
    t.rank = j.at("rank").get<int>();
    t.U = matrix_from_json(j.at("U"));
    t.V = matrix_from_json(j.at("V"));
    t.sigma = j.at("sigma").get<double>();
    check_teacher(t);
    return t;
}

inline json model_to_json(const ParallelModel& m) {
    json j;
    j["tag"] = tag_to_json(m.tag);
    j["dims"] = dims_to_json(m.dims);
    j["lambda"] = m.lambda;
    json factors = json::array();
    for (const auto& f : m.factors)
        factors.push_back(json{{"left", matrix_to_json(f.left)}, {"right", matrix_to_json(f.right)}});
    j["factors"] = std::move(factors);
    return j;
}

inline ParallelModel model_from_json(const json& j) {
    ParallelModel m;
    m.tag = tag_from_json(j.at("tag"));
    m.dims = dims_from_json(j.at("dims"));
    m.lambda = j.at("lambda").get<double>();
    for (const auto& f : j.at("factors"))
        m.factors.push_back({matrix_from_json(f.at("left")), matrix_from_json(f.at("right"))});
    check_model(m);
    return m;
}

inline json certificate_to_json(const PolarCertificate& c) {
    json j;
    j["value"] = c.value;
    j["method"] = polar_method_name(c.method);
    j["verdict"] = verdict_name(c.verdict);
    j["tolerance"] = c.tolerance;
    j["witness"] = {{"left", matrix_to_json(c.witness.left)},
                    {"right", matrix_to_json(c.witness.right)}};
    return j;
}

inline json ledger_to_json(const ConstantsLedger& l) {
    return json{{"gamma", l.gamma},
                {"sigma_x", l.sigma_x},
                {"sigma_y_given_x", l.sigma_y_given_x},
                {"g_lip", l.g_lip},
                {"L", l.L},
                {"alpha", l.alpha},
                {"omega_up", l.omega_up},
                {"L_phi", l.L_phi},
                {"r_theta", l.r_theta},
                {"B_phi", l.B_phi},
                {"B_ell", l.B_ell},
                {"Lt_Phi", l.Lt_Phi},
                {"Lt_phi", l.Lt_phi},
                {"eps0", l.eps0},
                {"eps1", l.eps1},
                {"eps2", l.eps2},
                {"g_radius", l.g_radius},
                {"delta_C", l.delta_C},
                {"B_C", l.B_C},
                {"R", l.R},
                {"dim_w", l.dim_w},
                {"B_u", l.B_u},
                {"B_v", l.B_v},
                {"C_mult", l.C_mult},
                {"bernstein_c", l.bernstein_c},
                {"teacher_fro", l.teacher_fro},
                {"teacher_op", l.teacher_op},
                {"tokens", l.tokens},
                {"n_x", l.n_x}};
}

/// The documented report shape:
/// {family, N, delta, ledger:{...}, optimization_error, statistical_error, total}.
inline json report_to_json(const BoundReport& r) {
    json j;
    j["family"] = family_name(r.family);
    j["N"] = r.N;
    j["delta"] = r.delta;
    j["ledger"] = ledger_to_json(r.ledger);
    j["optimization_error"] = r.optimization_error;
    j["statistical_error"] = r.statistical_error;
    j["total"] = r.total;
    j["n_y"] = r.n_y;
    j["polar_value"] = r.polar_value;
    j["lambda"] = r.lambda;
    j["convention"] = "up to universal constants";
    return j;
}

inline json sandwich_to_json(const SandwichReport& s) {
    return json{{"convex_value", s.convex_value},
                {"nonconvex_value", s.nonconvex_value},
                {"upper_bound", s.upper_bound},
                {"polar", s.polar},
                {"omega_star", s.omega_star},
                {"slack", s.slack},
                {"lower_ok", s.lower_ok},
                {"upper_ok", s.upper_ok},
                {"ok", s.ok()}};
}

// ---- CSV ------------------------------------------------------------------------------

inline std::string trace_csv(const TrainTrace& t) {
    std::ostringstream out;
    out << "iteration,objective,gradient_norm,max_stationarity_residual\n";
    for (const auto& e : t.iterates)
        out << e.iteration << ',' << format_double(e.objective) << ','
            << format_double(e.grad_norm) << ',' << format_double(e.max_residual) << '\n';
    return out.str();
}

inline std::string growth_csv(const TrainTrace& t) {
    std::ostringstream out;
    out << "iteration,width,polar\n";
    for (const auto& e : t.width_events)
        out << e.iteration << ',' << e.width << ',' << format_double(e.polar) << '\n';
    return out.str();
}

inline std::string lipschitz_csv(const std::vector<LipschitzRow>& rows) {
    std::ostringstream out;
    out << "width,lipschitz_bound,teacher_bound,converged,failed\n";
    for (const auto& r : rows)
        out << r.width << ',' << format_double(r.bound) << ',' << format_double(r.teacher_bound)
            << ',' << (r.converged ? 1 : 0) << ',' << (r.failed ? 1 : 0) << '\n';
    return out.str();
}

inline std::string rate_csv(const std::vector<RateRow>& rows) {
    std::ostringstream out;
    out << "N,mean_gap,std_error,bound_total,failed\n";
    for (const auto& r : rows)
        out << r.N << ',' << format_double(r.mean_gap) << ',' << format_double(r.std_error) << ','
            << format_double(r.bound_total) << ',' << (r.failed ? 1 : 0) << '\n';
    return out.str();
}

// ---- file helpers ------------------------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot open for writing: " + path);
    out << text;
}

inline void write_json_file(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open: " + path);
    json j;
    in >> j;
    return j;
}

}  // namespace homognet
