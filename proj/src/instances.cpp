#include "distobs/instances.hpp"

#include <algorithm>
#include <numeric>

#include <Eigen/QR>

namespace distobs {

Problem standard_problem(double alpha) {
    Problem p;
    p.plant.a = Matrix::Zero(4, 4);
    p.plant.a(0, 1) = 1.0;
    p.plant.a(1, 0) = -1.0;
    p.plant.a(2, 3) = 2.0;
    p.plant.a(3, 2) = -2.0;
    p.plant.c = Matrix::Zero(3, 4);
    p.plant.c(0, 0) = 1.0;
    p.plant.c(1, 2) = 1.0;
    p.plant.c(2, 0) = 1.0;
    p.plant.c(2, 2) = 1.0;
    p.plant.node_outputs = {1, 1, 1};
    p.graph = directed_cycle(3);
    p.params.alpha = alpha;
    return p;
}

Matrix random_orthogonal(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> normal;
    Matrix g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    return qr.householderQ() * Matrix::Identity(n, n);
}

int observability_matrix_rank(const Matrix& a, const Matrix& c, double tol) {
    const auto n = a.rows();
    Matrix obs(c.rows() * n, n);
    Matrix block = c;
    for (Eigen::Index k = 0; k < n; ++k) {
        obs.middleRows(k * c.rows(), c.rows()) = block;
        block = block * a;
    }
    return numerical_rank(obs, tol);
}

double observability_gap(const Matrix& a, const Matrix& c) {
    Eigen::JacobiSVD<Matrix> sa(a);
    Eigen::JacobiSVD<Matrix> sc(c);
    const double na = sa.singularValues()(0);
    const double nc = sc.singularValues()(0);
    if (nc == 0.0) return 0.0;
    const Matrix as = na > 0.0 ? Matrix(a / na) : a;
    const auto n = a.rows();
    Matrix obs(c.rows() * n, n);
    Matrix block = c / nc;
    for (Eigen::Index k = 0; k < n; ++k) {
        obs.middleRows(k * c.rows(), c.rows()) = block;
        block = block * as;
    }
    const Vector s = Eigen::JacobiSVD<Matrix>(obs).singularValues();
    double gap = 1.0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (s(k) > kDefaultRankTol * s(0)) gap = std::min(gap, s(k) / s(0));
    }
    return gap;
}

NetworkGraph random_strongly_connected_graph(std::mt19937_64& rng, int nodes,
                                             double extra_edge_probability) {
    NetworkGraph g(nodes);
    if (nodes == 1) return g;
    const double weights[] = {0.5, 1.0, 1.5, 2.0};
    std::uniform_int_distribution<int> pick_weight(0, 3);
    std::bernoulli_distribution extra(extra_edge_probability);
    std::vector<int> order(nodes);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int k = 0; k < nodes; ++k) {
        g.set_edge(order[k], order[(k + 1) % nodes], weights[pick_weight(rng)]);
    }
    for (int i = 0; i < nodes; ++i) {
        for (int j = 0; j < nodes; ++j) {
            if (i != j && g.weight(j, i) == 0.0 && extra(rng)) {
                g.set_edge(i, j, weights[pick_weight(rng)]);
            }
        }
    }
    return g;
}

Problem random_problem(std::mt19937_64& rng, const RandomProblemOptions& opts) {
    std::uniform_int_distribution<int> pick_n(opts.min_state, opts.max_state);
    std::uniform_int_distribution<int> pick_nodes(opts.min_nodes, opts.max_nodes);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution deficient(opts.rank_deficient_probability);

    const int n = pick_n(rng);
    const int nodes = pick_nodes(rng);

    for (;;) {
        // Split the state into 1..3 blocks; each node watches a nonempty subset.
        std::uniform_int_distribution<int> pick_blocks(1, std::min(3, n));
        const int block_count = pick_blocks(rng);
        std::vector<int> sizes(block_count, 1);
        std::uniform_int_distribution<int> pick_block(0, block_count - 1);
        for (int k = block_count; k < n; ++k) ++sizes[pick_block(rng)];
        std::vector<int> starts(block_count, 0);
        for (int b = 1; b < block_count; ++b) starts[b] = starts[b - 1] + sizes[b - 1];

        Matrix a_tilde = Matrix::Zero(n, n);
        for (int b = 0; b < block_count; ++b) {
            for (int i = 0; i < sizes[b]; ++i)
                for (int j = 0; j < sizes[b]; ++j) a_tilde(starts[b] + i, starts[b] + j) = uniform(rng);
        }
        if (coin(rng)) {
            // Lower block-triangular coupling keeps the trailing blocks invariant.
            for (int b = 1; b < block_count; ++b)
                for (int i = 0; i < sizes[b]; ++i)
                    for (int j = 0; j < starts[b]; ++j) a_tilde(starts[b] + i, j) = 0.5 * uniform(rng);
        }

        Problem p;
        std::vector<Matrix> rows;
        for (int node = 0; node < nodes; ++node) {
            std::vector<bool> seen(block_count, false);
            bool any = false;
            while (!any) {
                for (int b = 0; b < block_count; ++b) {
                    seen[b] = coin(rng);
                    any = any || seen[b];
                }
            }
            const int m = coin(rng) ? 2 : 1;
            Matrix ci = Matrix::Zero(m, n);
            for (int b = 0; b < block_count; ++b) {
                if (!seen[b]) continue;
                for (int r = 0; r < m; ++r)
                    for (int k = 0; k < sizes[b]; ++k) ci(r, starts[b] + k) = uniform(rng);
            }
            if (m == 2 && deficient(rng)) ci.row(1) = (1.0 + uniform(rng)) * ci.row(0);
            rows.push_back(ci);
            p.plant.node_outputs.push_back(m);
        }
        Matrix c_tilde(std::accumulate(p.plant.node_outputs.begin(), p.plant.node_outputs.end(), 0), n);
        for (int node = 0, off = 0; node < nodes; ++node) {
            c_tilde.middleRows(off, rows[node].rows()) = rows[node];
            off += static_cast<int>(rows[node].rows());
        }
        if (observability_matrix_rank(a_tilde, c_tilde, 1e-7) < n) continue;
        if (opts.min_observability_gap > 0.0) {
            bool marginal = observability_gap(a_tilde, c_tilde) < opts.min_observability_gap;
            for (int node = 0; node < nodes && !marginal; ++node) {
                marginal = observability_gap(a_tilde, rows[node]) < opts.min_observability_gap;
            }
            if (marginal) continue;
        }

        const Matrix u = random_orthogonal(rng, n);
        p.plant.a = u * a_tilde * u.transpose();
        p.plant.c = c_tilde * u.transpose();
        p.graph = random_strongly_connected_graph(rng, nodes);
        p.params.alpha = opts.alpha;
        return p;
    }
}

}  // namespace distobs
