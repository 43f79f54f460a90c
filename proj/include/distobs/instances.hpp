#pragma once

#include <random>

#include "distobs/synthesis.hpp"

namespace distobs {

// Two harmonic oscillators (frequencies 1 and 2) watched by a directed
// 3-cycle: node 1 sees the first oscillator, node 2 the second, node 3 the
// sum of both positions. Only node 3 can observe the plant on its own.
Problem standard_problem(double alpha = 1.0);

struct RandomProblemOptions {
    int min_state = 2;
    int max_state = 6;
    int min_nodes = 1;
    int max_nodes = 4;
    double alpha = 0.0;
    double rank_deficient_probability = 0.3;  // for nodes with two output rows
    // Reject draws whose observability is numerically marginal, globally or
    // at any node (see observability_gap). 0 disables the filter.
    double min_observability_gap = 1e-3;
};

// Observable (C, A) assembled from a block structure in a random orthogonal
// basis, so individual nodes typically see only part of the state; the graph
// is a random directed cycle plus random extra edges.
Problem random_problem(std::mt19937_64& rng, const RandomProblemOptions& opts = {});

NetworkGraph random_strongly_connected_graph(std::mt19937_64& rng, int nodes,
                                             double extra_edge_probability = 0.3);

Matrix random_orthogonal(std::mt19937_64& rng, int n);

// Smallest singular value of col(C, CA, ..., CA^{n-1}) (A scaled to unit
// spectral norm, C to unit spectral norm) relative to the largest, ignoring
// values below kDefaultRankTol that count as exact zeros. Near-zero results
// flag modes that are observable only in exact arithmetic.
double observability_gap(const Matrix& a, const Matrix& c);

// Rank of col(C, CA, ..., CA^{n-1}) via SVD.
int observability_matrix_rank(const Matrix& a, const Matrix& c, double tol = kDefaultRankTol);

}  // namespace distobs
