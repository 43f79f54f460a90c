#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"

#include "distobs/error_system.hpp"
#include "distobs/simulator.hpp"
#include "distobs/synthesis.hpp"

namespace distobs::io {

using Json = nlohmann::json;

// Problem document:
//   {"A": [[...]], "C": [[...]], "node_outputs": [m_1, ...],
//    "graph": {"N": int, "edges": [{"from": 1, "to": 2, "weight": 1.0}]},
//    "alpha": 1.0,
//    "overrides": {"g_weights": [...], "epsilon_fraction": .., "gamma_safety": .., "rank_tol": ..}}
// Edge numbering is 1-based; edge i -> j sets a_ji.
using ProblemFile = Problem;

// Parse failures and shape problems raise Error("parse", ...).
ProblemFile parse_problem(const Json& doc);
Json problem_to_json(const ProblemFile& problem);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

Json matrix_to_json(const Matrix& m);
// Accepts an array of equal-length rows. An empty array is read as a matrix
// with zero rows and `cols_if_empty` columns.
Matrix matrix_from_json(const Json& j, Eigen::Index cols_if_empty = 0);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json certificate_to_json(const Certificate& c);

// Gains document: {"n", "alpha", "gamma", "epsilon", "r", "total_order",
// "nodes": [{"p", "v", "N", "L", "M", "P", "Q", "K", "H", "Pie", "Tis"}],
// "certificate"}.
Json realization_to_json(const ObserverRealization& r, const Certificate* certificate = nullptr);

// Checks every gain shape against the plant; mismatches raise Error("parse", ...).
ObserverRealization realization_from_json(const Json& doc, const Plant& plant);

// Decimal text with enough digits to round-trip a double exactly.
std::string format_double(double x);

void write_trace_csv(std::ostream& out, const SimulationTrace& trace);

Json simulation_summary(const SimulationTrace& trace, const RateEstimate& rate);

}  // namespace distobs::io
