#include "distobs/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace distobs::io {

namespace {

[[noreturn]] void parse_error(const std::string& message) {
    throw Error("parse", message);
}

const Json& require(const Json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key)) {
        parse_error(std::string("missing field \"") + key + "\"");
    }
    return doc.at(key);
}

double number(const Json& j, const std::string& what) {
    if (!j.is_number()) parse_error(what + " must be a number");
    return j.get<double>();
}

int integer(const Json& j, const std::string& what) {
    if (!j.is_number_integer()) parse_error(what + " must be an integer");
    return j.get<int>();
}

Json finite_or_null(double x) {
    return std::isfinite(x) ? Json(x) : Json(nullptr);
}

Matrix shaped(const Json& j, const char* key, Eigen::Index rows, Eigen::Index cols, int node) {
    const Matrix m = matrix_from_json(require(j, key), cols);
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream msg;
        msg << "node " << node + 1 << ": \"" << key << "\" is " << m.rows() << "x" << m.cols()
            << ", expected " << rows << "x" << cols;
        parse_error(msg.str());
    }
    return m;
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j, Eigen::Index cols_if_empty) {
    if (!j.is_array()) parse_error("matrix must be an array of rows");
    if (j.empty()) return Matrix(0, cols_if_empty);
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (!j.front().is_array()) parse_error("matrix rows must be arrays");
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            parse_error("matrix rows must all have the same length");
        }
        for (Eigen::Index k = 0; k < cols; ++k) {
            m(i, k) = number(row[static_cast<std::size_t>(k)], "matrix entry");
        }
    }
    if (!m.allFinite()) parse_error("matrix entries must be finite");
    return m;
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Vector vector_from_json(const Json& j) {
    if (!j.is_array()) parse_error("vector must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], "vector entry");
    return v;
}

ProblemFile parse_problem(const Json& doc) {
    if (!doc.is_object()) parse_error("problem document must be a JSON object");
    ProblemFile out;
    out.plant.a = matrix_from_json(require(doc, "A"));
    out.plant.c = matrix_from_json(require(doc, "C"), out.plant.a.cols());
    const Json& parts = require(doc, "node_outputs");
    if (!parts.is_array()) parse_error("\"node_outputs\" must be an array");
    for (const Json& m : parts) out.plant.node_outputs.push_back(integer(m, "node_outputs entry"));
    try {
        out.plant.validate();
    } catch (const Error& e) {
        parse_error(e.what());
    }

    const Json& g = require(doc, "graph");
    const int nodes = integer(require(g, "N"), "graph.N");
    if (nodes < 1) parse_error("graph.N must be positive");
    if (nodes != out.plant.node_count()) {
        parse_error("graph.N does not match the number of node_outputs entries");
    }
    out.graph = NetworkGraph(nodes);
    const Json& edges = require(g, "edges");
    if (!edges.is_array()) parse_error("graph.edges must be an array");
    for (const Json& e : edges) {
        const int from = integer(require(e, "from"), "edge.from");
        const int to = integer(require(e, "to"), "edge.to");
        const double w = number(require(e, "weight"), "edge.weight");
        if (from < 1 || from > nodes || to < 1 || to > nodes) parse_error("edge endpoint out of range");
        if (from == to) parse_error("self loops are not allowed");
        if (!(w > 0.0) || !std::isfinite(w)) parse_error("edge weights must be positive");
        out.graph.set_edge(from - 1, to - 1, w);
    }

    out.params.alpha = number(require(doc, "alpha"), "alpha");
    if (doc.contains("overrides") && !doc.at("overrides").is_null()) {
        const Json& o = doc.at("overrides");
        if (!o.is_object()) parse_error("\"overrides\" must be an object");
        if (o.contains("g_weights")) {
            const Vector g_w = vector_from_json(o.at("g_weights"));
            out.params.g_weights.assign(g_w.data(), g_w.data() + g_w.size());
        }
        if (o.contains("epsilon_fraction")) {
            out.params.epsilon_fraction = number(o.at("epsilon_fraction"), "epsilon_fraction");
        }
        if (o.contains("gamma_safety")) {
            out.params.gamma_safety = number(o.at("gamma_safety"), "gamma_safety");
        }
        if (o.contains("rank_tol")) out.params.rank_tol = number(o.at("rank_tol"), "rank_tol");
    }
    try {
        out.params.validate();
        (void)out.params.resolved_g(nodes);
    } catch (const Error& e) {
        parse_error(e.what());
    }
    return out;
}

Json problem_to_json(const ProblemFile& p) {
    Json doc;
    doc["A"] = matrix_to_json(p.plant.a);
    doc["C"] = matrix_to_json(p.plant.c);
    doc["node_outputs"] = p.plant.node_outputs;
    Json edges = Json::array();
    const Matrix& w = p.graph.weights();
    for (Eigen::Index from = 0; from < w.cols(); ++from) {
        for (Eigen::Index to = 0; to < w.rows(); ++to) {
            if (w(to, from) > 0.0) {
                edges.push_back({{"from", from + 1}, {"to", to + 1}, {"weight", w(to, from)}});
            }
        }
    }
    doc["graph"] = {{"N", p.graph.node_count()}, {"edges", edges}};
    doc["alpha"] = p.params.alpha;
    Json o;
    if (!p.params.g_weights.empty()) o["g_weights"] = p.params.g_weights;
    o["epsilon_fraction"] = p.params.epsilon_fraction;
    o["gamma_safety"] = p.params.gamma_safety;
    o["rank_tol"] = p.params.rank_tol;
    doc["overrides"] = o;
    return doc;
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error("parse", path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write " + path);
    out << text;
    if (!out) throw Error("io", "write failed for " + path);
}

Json certificate_to_json(const Certificate& c) {
    Json nodes = Json::array();
    for (std::size_t i = 0; i < c.p_dims.size(); ++i) {
        nodes.push_back({{"p", c.p_dims[i]}, {"v", c.v_dims[i]}});
    }
    Json lmi = Json::array();
    for (double x : c.lmi_max_eigenvalues) lmi.push_back(finite_or_null(x));
    return {
        {"total_order", c.total_order},
        {"nodes", nodes},
        {"epsilon", c.epsilon},
        {"gamma", c.gamma},
        {"alpha", c.alpha},
        {"restricted_spectral_abscissa", finite_or_null(c.restricted_spectral_abscissa)},
        {"cancellation_residual_max", c.cancellation_residual_max},
        {"cancellation_bound", c.cancellation_bound},
        {"lmi_max_eigenvalues", lmi},
        {"lyapunov_max_eigenvalue", finite_or_null(c.lyapunov_max_eigenvalue)},
        {"invariance_residual", c.invariance_leakage},
        {"pass",
         {{"rate", c.rate_pass},
          {"cancellation", c.cancellation_pass},
          {"lmi", c.lmi_pass},
          {"lyapunov", c.lyapunov_pass},
          {"invariance", c.invariance_pass}}},
    };
}

Json realization_to_json(const ObserverRealization& r, const Certificate* certificate) {
    Json nodes = Json::array();
    for (const auto& g : r.nodes) {
        nodes.push_back({
            {"p", g.p_dim},
            {"v", g.v_dim},
            {"N", matrix_to_json(g.n_gain)},
            {"L", matrix_to_json(g.l_gain)},
            {"M", matrix_to_json(g.m_gain)},
            {"P", matrix_to_json(g.p_out)},
            {"Q", matrix_to_json(g.q_out)},
            {"K", matrix_to_json(g.k_mat)},
            {"H", matrix_to_json(g.h_inj)},
            {"Pie", matrix_to_json(g.p_ie)},
            {"Tis", matrix_to_json(g.t_is)},
        });
    }
    Json doc = {
        {"n", r.state_dim},
        {"alpha", r.alpha},
        {"gamma", r.gamma},
        {"epsilon", r.epsilon},
        {"r", vector_to_json(r.r_vector)},
        {"total_order", r.total_order},
        {"nodes", nodes},
    };
    if (certificate != nullptr) doc["certificate"] = certificate_to_json(*certificate);
    return doc;
}

ObserverRealization realization_from_json(const Json& doc, const Plant& plant) {
    if (!doc.is_object()) parse_error("gains document must be a JSON object");
    ObserverRealization r;
    r.state_dim = integer(require(doc, "n"), "n");
    const int n = plant.state_dim();
    if (r.state_dim != n) parse_error("gains were synthesized for a different state dimension");
    r.alpha = number(require(doc, "alpha"), "alpha");
    r.gamma = number(require(doc, "gamma"), "gamma");
    r.epsilon = number(require(doc, "epsilon"), "epsilon");
    r.r_vector = vector_from_json(require(doc, "r"));
    const Json& nodes = require(doc, "nodes");
    if (!nodes.is_array() || static_cast<int>(nodes.size()) != plant.node_count() ||
        r.r_vector.size() != plant.node_count()) {
        parse_error("gains node count does not match the problem");
    }
    for (int i = 0; i < plant.node_count(); ++i) {
        const Json& j = nodes[static_cast<std::size_t>(i)];
        NodeGains g;
        g.p_dim = integer(require(j, "p"), "p");
        g.v_dim = integer(require(j, "v"), "v");
        const int m = plant.node_outputs[i];
        if (g.p_dim < 1 || g.p_dim > g.v_dim || g.v_dim > n || g.p_dim > m) {
            parse_error("node " + std::to_string(i + 1) + ": inconsistent p/v dimensions");
        }
        const int k = n - g.p_dim;
        const int q = g.v_dim - g.p_dim;
        g.n_gain = shaped(j, "N", k, k, i);
        g.l_gain = shaped(j, "L", k, m, i);
        g.m_gain = shaped(j, "M", k, n, i);
        g.p_out = shaped(j, "P", n, k, i);
        g.q_out = shaped(j, "Q", n, m, i);
        g.k_mat = shaped(j, "K", n, m, i);
        g.h_inj = shaped(j, "H", q, g.p_dim, i);
        g.p_ie = shaped(j, "Pie", q, q, i);
        g.t_is = shaped(j, "Tis", n, k, i);
        r.total_order += k;
        r.nodes.push_back(std::move(g));
    }
    if (doc.contains("total_order") && integer(doc.at("total_order"), "total_order") != r.total_order) {
        parse_error("total_order does not match the node gains");
    }
    return r;
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_trace_csv(std::ostream& out, const SimulationTrace& trace) {
    if (trace.size() == 0) return;
    const auto n = trace.x.front().size();
    const std::size_t nodes = trace.z.front().size();
    out << "t";
    for (Eigen::Index k = 0; k < n; ++k) out << ",x_" << k + 1;
    for (std::size_t i = 0; i < nodes; ++i) {
        const auto node = i + 1;
        for (Eigen::Index k = 0; k < trace.z.front()[i].size(); ++k) out << ",z_" << node << "_" << k + 1;
        for (Eigen::Index k = 0; k < n; ++k) out << ",xhat_" << node << "_" << k + 1;
        out << ",err_norm_" << node << ",inv_res_" << node;
    }
    out << "\n";
    for (std::size_t s = 0; s < trace.size(); ++s) {
        out << format_double(trace.times[s]);
        for (Eigen::Index k = 0; k < n; ++k) out << "," << format_double(trace.x[s](k));
        for (std::size_t i = 0; i < nodes; ++i) {
            for (Eigen::Index k = 0; k < trace.z[s][i].size(); ++k) out << "," << format_double(trace.z[s][i](k));
            for (Eigen::Index k = 0; k < n; ++k) out << "," << format_double(trace.xhat[s][i](k));
            out << "," << format_double(trace.err[s][i].norm());
            out << "," << format_double(trace.invariance_residuals[s][i]);
        }
        out << "\n";
    }
}

Json simulation_summary(const SimulationTrace& trace, const RateEstimate& rate) {
    Json finals = Json::array();
    if (trace.size() > 0) {
        for (const auto& e : trace.err.back()) finals.push_back(e.norm());
    }
    return {
        {"alpha_hat", finite_or_null(rate.alpha_hat)},
        {"converged", rate.converged},
        {"low_confidence", rate.low_confidence},
        {"max_invariance_residual", check_invariance(trace)},
        {"final_error_norms", finals},
        {"dt", trace.dt},
        {"samples", trace.size()},
    };
}

}  // namespace distobs::io
