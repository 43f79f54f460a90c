#include "distobs/graph.hpp"

#include <algorithm>
#include <functional>
#include <string>

#include <Eigen/SVD>

namespace distobs {

NetworkGraph::NetworkGraph(int node_count) {
    if (node_count < 1) {
        throw Error("graph", "graph must have at least one node");
    }
    weights_ = Matrix::Zero(node_count, node_count);
}

NetworkGraph::NetworkGraph(Matrix weights) : weights_(std::move(weights)) {
    if (weights_.rows() < 1 || weights_.rows() != weights_.cols()) {
        throw Error("graph", "adjacency matrix must be square and nonempty");
    }
    if (!weights_.allFinite() || (weights_.array() < 0.0).any()) {
        throw Error("graph", "edge weights must be finite and nonnegative");
    }
    if (weights_.diagonal().cwiseAbs().maxCoeff() != 0.0) {
        throw Error("graph", "self loops are not allowed");
    }
}

void NetworkGraph::set_edge(int from, int to, double weight) {
    const int n = node_count();
    if (from < 0 || from >= n || to < 0 || to >= n) {
        throw Error("graph", "edge endpoint out of range");
    }
    if (from == to) {
        throw Error("graph", "self loops are not allowed");
    }
    if (!(weight > 0.0) || !std::isfinite(weight)) {
        throw Error("graph", "edge weight must be positive and finite");
    }
    weights_(to, from) = weight;
}

bool is_strongly_connected(const NetworkGraph& g) {
    // Tarjan's algorithm; the graph is strongly connected iff it has exactly
    // one component.
    const int n = g.node_count();
    std::vector<int> index(n, -1);
    std::vector<int> low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<int> stack;
    int next_index = 0;
    int components = 0;

    std::function<void(int)> visit = [&](int v) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = true;
        for (int w = 0; w < n; ++w) {
            if (!(g.weight(w, v) > 0.0)) continue;  // edge v -> w
            if (index[w] < 0) {
                visit(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack[w]) {
                low[v] = std::min(low[v], index[w]);
            }
        }
        if (low[v] == index[v]) {
            ++components;
            int w = -1;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = false;
            } while (w != v);
        }
    };

    for (int v = 0; v < n; ++v) {
        if (index[v] < 0) visit(v);
    }
    return components == 1;
}

Matrix laplacian(const NetworkGraph& g) {
    const Matrix& adj = g.weights();
    Matrix lap = -adj;
    lap.diagonal() = adj.rowwise().sum();
    return lap;
}

Vector perron_row_vector(const Matrix& lap) {
    const auto n = lap.rows();
    if (n == 1) {
        return Vector::Ones(1);
    }
    Eigen::JacobiSVD<Matrix> svd(lap, Eigen::ComputeFullU);
    const Vector& sigma = svd.singularValues();
    const double tol = 1e-9 * std::max(sigma(0), 1.0);
    if (sigma(n - 2) <= tol) {
        throw Error("graph",
                    "left null space of the Laplacian is not one-dimensional "
                    "(graph is not strongly connected)");
    }
    Vector r = svd.matrixU().col(n - 1);
    r *= static_cast<double>(n) / r.sum();
    if (!(r.minCoeff() > 0.0)) {
        throw Error("graph", "Perron vector has a non-positive entry "
                             "(graph is not strongly connected)");
    }
    return r;
}

GraphSpectralData spectral_data(const NetworkGraph& g) {
    if (!is_strongly_connected(g)) {
        throw Error("graph", "communication graph is not strongly connected");
    }
    GraphSpectralData out;
    out.laplacian = laplacian(g);
    out.perron_row = perron_row_vector(out.laplacian);
    out.r_diag = out.perron_row.asDiagonal();
    Matrix mirror = out.r_diag * out.laplacian + out.laplacian.transpose() * out.r_diag;
    out.mirror = 0.5 * (mirror + mirror.transpose());
    if (g.node_count() > 1) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(out.mirror, Eigen::EigenvaluesOnly);
        out.lambda2 = eig.eigenvalues()(1);
    }
    return out;
}

NetworkGraph directed_cycle(int node_count, double weight) {
    NetworkGraph g(node_count);
    if (node_count == 1) return g;
    for (int i = 0; i < node_count; ++i) {
        g.set_edge(i, (i + 1) % node_count, weight);
    }
    return g;
}

}  // namespace distobs
