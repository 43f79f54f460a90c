#pragma once

#include <limits>

#include "distobs/types.hpp"

namespace distobs {

// Weighted digraph on nodes 0..N-1. weights(j, i) > 0 iff information flows
// from node i to node j, i.e. weights is the adjacency matrix [a_ji].
class NetworkGraph {
public:
    explicit NetworkGraph(int node_count);
    explicit NetworkGraph(Matrix weights);

    // Adds (or overwrites) the edge i -> j with the given positive weight.
    void set_edge(int from, int to, double weight);

    int node_count() const { return static_cast<int>(weights_.rows()); }
    const Matrix& weights() const { return weights_; }
    double weight(int row, int col) const { return weights_(row, col); }

private:
    Matrix weights_;
};

struct GraphSpectralData {
    Matrix laplacian;
    Vector perron_row;
    Matrix r_diag;
    Matrix mirror;  // R L + L^T R
    // Second-smallest eigenvalue of the mirror Laplacian; +inf for N = 1.
    double lambda2 = std::numeric_limits<double>::infinity();
};

bool is_strongly_connected(const NetworkGraph& g);

Matrix laplacian(const NetworkGraph& g);

// Positive left null vector r of L with r * 1 = N.
Vector perron_row_vector(const Matrix& laplacian);

GraphSpectralData spectral_data(const NetworkGraph& g);

// Convenience constructors used by tests, examples and the CLI.
NetworkGraph directed_cycle(int node_count, double weight = 1.0);

}  // namespace distobs
