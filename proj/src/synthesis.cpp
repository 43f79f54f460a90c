#include "distobs/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace distobs {

namespace {

// Rethrows with the pipeline step index prepended to the message.
template <typename F>
auto run_step(int index, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.step(), "step " + std::to_string(index) + ": " + e.what());
    }
}

Matrix s_matrix(int n, int p) {
    Matrix s = Matrix::Zero(n, n - p);
    s.bottomRows(n - p).setIdentity();
    return s;
}

}  // namespace

std::vector<double> SynthesisParameters::resolved_g(int nodes) const {
    if (g_weights.empty()) return std::vector<double>(nodes, 1.0);
    if (static_cast<int>(g_weights.size()) != nodes) {
        throw Error("parameters", "g_weights must have one entry per node");
    }
    for (double g : g_weights) {
        if (!(g > 0.0) || !std::isfinite(g)) throw Error("parameters", "g_weights must be positive");
    }
    return g_weights;
}

void SynthesisParameters::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw Error("parameters", "alpha must be finite and nonnegative");
    }
    for (double g : g_weights) {
        if (!(g > 0.0) || !std::isfinite(g)) {
            throw Error("parameters", "g_weights must be positive");
        }
    }
    if (!(epsilon_fraction > 0.0 && epsilon_fraction < 1.0)) {
        throw Error("parameters", "epsilon_fraction must lie in (0, 1)");
    }
    if (!(gamma_safety > 1.0) || !std::isfinite(gamma_safety)) {
        throw Error("parameters", "gamma_safety must exceed 1");
    }
    if (!(rank_tol > 0.0 && rank_tol < 1.0)) {
        throw Error("parameters", "rank_tol must lie in (0, 1)");
    }
}

std::vector<NodeDesign> design_nodes(const Plant& plant, double rank_tol) {
    std::vector<NodeDesign> designs;
    designs.reserve(plant.node_count());
    for (int i = 0; i < plant.node_count(); ++i) {
        NodeDesign d;
        try {
            d.factor = run_step(1, [&] {
                return full_rank_factorize(plant.node_output_matrix(i), rank_tol);
            });
            d.decomp = run_step(2, [&] {
                return observability_decomposition(plant.a, d.factor.f_factor, rank_tol);
            });
        } catch (const Error& e) {
            throw Error(e.step(), std::string(e.what()) + " (node " + std::to_string(i + 1) + ")");
        }
        designs.push_back(std::move(d));
    }
    return designs;
}

Matrix epsilon_test_matrix(const std::vector<NodeDecomposition>& decomps,
                           const GraphSpectralData& spectral,
                           const std::vector<double>& g_weights) {
    const int nodes = static_cast<int>(decomps.size());
    if (nodes == 0 || spectral.mirror.rows() != nodes ||
        static_cast<int>(g_weights.size()) != nodes) {
        throw Error("epsilon", "node count mismatch");
    }
    const int n = decomps.front().n();
    std::vector<Matrix> t_blocks;
    std::vector<Matrix> g_blocks;
    for (int i = 0; i < nodes; ++i) {
        if (decomps[i].n() != n) throw Error("epsilon", "state dimension mismatch");
        t_blocks.push_back(decomps[i].t_orth);
        Matrix gi = Matrix::Zero(n, n);
        gi.topLeftCorner(decomps[i].v_dim, decomps[i].v_dim).diagonal().setConstant(g_weights[i]);
        g_blocks.push_back(gi);
    }
    const Matrix t = block_diagonal(t_blocks);
    Matrix kron = Matrix::Zero(nodes * n, nodes * n);
    for (int i = 0; i < nodes; ++i) {
        for (int j = 0; j < nodes; ++j) {
            kron.block(i * n, j * n, n, n).diagonal().setConstant(spectral.mirror(i, j));
        }
    }
    Matrix out = t.transpose() * kron * t + block_diagonal(g_blocks);
    return 0.5 * (out + out.transpose());
}

double compute_epsilon(const std::vector<NodeDecomposition>& decomps,
                       const GraphSpectralData& spectral,
                       const std::vector<double>& g_weights, double epsilon_fraction) {
    const Matrix m = epsilon_test_matrix(decomps, spectral, g_weights);
    const double lam = min_symmetric_eigenvalue(m);
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (!(lam > 1e-10 * scale)) {
        throw Error("epsilon", "joint observability violated or graph not strongly connected");
    }
    return epsilon_fraction * lam;
}

bool coupling_condition_holds(const NodeDecomposition& d, double beta) {
    if (d.unobservable_dim() == 0) return beta > 0.0;
    if (!(beta > 0.0)) return false;
    Matrix m = d.a_u + d.a_u.transpose() + d.a32 * d.a32.transpose() / beta;
    m = (0.5 * (m + m.transpose())).eval();
    return max_symmetric_eigenvalue(m) < beta;
}

double select_gamma(const std::vector<NodeDecomposition>& decomps, double epsilon, double alpha,
                    double gamma_safety, const std::vector<double>& g_weights) {
    if (!(epsilon > 0.0)) throw Error("gamma", "epsilon must be positive");
    if (!(alpha >= 0.0)) throw Error("gamma", "alpha must be nonnegative");
    if (!(gamma_safety > 1.0)) throw Error("gamma", "gamma_safety must exceed 1");

    auto feasible = [&](double beta) {
        return std::all_of(decomps.begin(), decomps.end(),
                           [&](const NodeDecomposition& d) { return coupling_condition_holds(d, beta); });
    };

    double beta = kMinBeta;
    if (!feasible(beta)) {
        double hi = 1.0;
        while (!feasible(hi)) hi *= 2.0;
        double lo = std::max(kMinBeta, hi / 2.0);
        if (hi == 1.0) lo = kMinBeta;
        while (hi - lo > 1e-6 * hi) {
            const double mid = 0.5 * (lo + hi);
            (feasible(mid) ? hi : lo) = mid;
        }
        beta = hi;
    }

    double gamma = (beta + 2.0 * alpha) / epsilon;
    // The Lyapunov forcing g_i gamma - 2 alpha must stay positive.
    double g_min = 1.0;
    if (!g_weights.empty()) g_min = *std::min_element(g_weights.begin(), g_weights.end());
    gamma = std::max(gamma, 2.0 * alpha / g_min);
    return gamma * gamma_safety;
}

Matrix place_injection(const Matrix& a22, const Matrix& ea12, double alpha) {
    const auto k = a22.rows();
    if (a22.cols() != k || ea12.cols() != k) {
        throw Error("injection", "dimension mismatch between A22 and E A12");
    }
    if (k == 0) return Matrix(0, ea12.rows());
    if (!is_observable(a22, ea12)) {
        throw Error("injection", "pair (E A12, A22) is not observable");
    }

    // Dual stabilization through the filter Riccati equation of the shifted
    // pair: with X stabilizing for
    //   (a22 + s I) X + X (a22 + s I)^T - X ea12^T ea12 X + I = 0
    // and H = X ea12^T, a22 + s I - H ea12 is Hurwitz, so every eigenvalue of
    // a22 - H ea12 lies left of -s.
    const Matrix g = ea12.transpose() * ea12;
    const Matrix ident = Matrix::Identity(k, k);
    const double shifts[] = {0.5, 1.0, 2.0, 3.0, 4.0, 5.0};
    for (double margin : shifts) {
        const double s = alpha + margin;
        Matrix x;
        try {
            x = solve_riccati((a22 + s * ident).transpose(), g, ident);
        } catch (const Error&) {
            continue;
        }
        const Matrix h = x * ea12.transpose();
        if (!h.allFinite()) continue;
        const double abscissa = spectral_abscissa(a22 - h * ea12);
        if (abscissa <= -(alpha + 0.5) + 1e-6 * (1.0 + alpha)) return h;
    }
    throw Error("injection", "could not place the injection spectrum left of -alpha");
}

Matrix solve_pie(const Matrix& a22, const Matrix& ea12, const Matrix& h, double gamma,
                 double alpha, double g) {
    const auto k = a22.rows();
    if (k == 0) return Matrix(0, 0);
    const double forcing = g * gamma - 2.0 * alpha;
    if (!(forcing > 0.0)) {
        throw Error("lyapunov", "gamma too small for positive definite Lyapunov forcing");
    }
    const Matrix closed = a22 - h * ea12;
    if (!(spectral_abscissa(closed) < -alpha)) {
        throw Error("lyapunov", "injection does not achieve the requested rate");
    }
    const Matrix shifted = closed + alpha * Matrix::Identity(k, k);
    return solve_lyapunov(shifted, forcing * Matrix::Identity(k, k));
}

NodeGains assemble_gains(const NodeDecomposition& d, const FullRankFactorization& frf,
                         const Matrix& h, const Matrix& pie) {
    const int n = d.n();
    const int p = d.p_dim;
    const int v = d.v_dim;
    const int r = n - p;
    const int q = v - p;
    const int u = n - v;
    if (frf.rank != p || frf.f_factor.cols() != n || h.rows() != q || h.cols() != p ||
        pie.rows() != q || pie.cols() != q) {
        throw Error("gains", "dimension mismatch while assembling gains");
    }

    const Matrix e_inv = d.e_mat.inverse();
    const Matrix d_pinv = frf.d_pinv();

    NodeGains g;
    g.p_dim = p;
    g.v_dim = v;
    g.h_inj = h;
    g.p_ie = pie;
    g.t_is = d.t_s();
    g.p_out = g.t_is;

    Matrix k_top(n, p);
    k_top << e_inv, h, Matrix::Zero(u, p);
    g.k_mat = k_top * d_pinv;
    g.q_out = d.t_orth * g.k_mat;

    if (q == 0) {
        // Injection block is void: N = A_u, L = A31 E^{-1} D^+, M = T_s^T.
        g.n_gain = d.a_u;
        g.l_gain = d.a31 * e_inv * d_pinv;
        g.m_gain = g.t_is.transpose();
        return g;
    }

    g.n_gain = Matrix::Zero(r, r);
    g.n_gain.topLeftCorner(q, q) = d.a22 - h * d.e_mat * d.a12;
    g.n_gain.bottomLeftCorner(u, q) = d.a32;
    g.n_gain.bottomRightCorner(u, u) = d.a_u;

    Matrix l_top(r, p);
    l_top << d.a21 - h * d.e_mat * d.a11, d.a31;
    g.l_gain = l_top * e_inv * d_pinv + g.n_gain * g.k_mat.bottomRows(r);

    Matrix scale = Matrix::Identity(r, r);
    scale.topLeftCorner(q, q) = pie.inverse();
    g.m_gain = scale * g.t_is.transpose();
    return g;
}

double verify_cancellation(const NodeGains& g, const NodeDecomposition& d,
                           const FullRankFactorization& frf) {
    const int n = d.n();
    const int p = d.p_dim;
    const Matrix s = s_matrix(n, p);
    const Matrix& t = d.t_orth;
    const Matrix dft = frf.d_factor * frf.f_factor * t;
    Matrix tat = Matrix::Zero(n, n);
    tat.topLeftCorner(d.v_dim, d.v_dim) = d.a_o();
    tat.bottomLeftCorner(n - d.v_dim, d.v_dim) = d.a_r();
    tat.bottomRightCorner(n - d.v_dim, n - d.v_dim) = d.a_u;
    const Matrix lhs = (s * g.l_gain - s * g.n_gain * s.transpose() * g.k_mat) * dft
                     + s * g.n_gain * s.transpose()
                     + (g.k_mat * dft - Matrix::Identity(n, n)) * tat;
    return lhs.norm();
}

Matrix lmi_th1_matrix(const LmiCandidate& c, const NodeDecomposition& d, double gamma,
                      double epsilon, double alpha, double g) {
    const int q = d.injection_dim();
    const int u = d.unobservable_dim();
    if (c.p_ie.rows() != q || c.p_ie.cols() != q || c.p_iu.rows() != u || c.p_iu.cols() != u ||
        c.w.rows() != q || c.w.cols() != d.p_dim) {
        throw Error("lmi", "candidate dimensions do not match the decomposition");
    }
    const Matrix ea12 = d.ea12();
    const Matrix phi = c.p_ie * d.a22 + d.a22.transpose() * c.p_ie - c.w * ea12 -
                       ea12.transpose() * c.w.transpose() + 2.0 * alpha * c.p_ie;
    Matrix m(q + u, q + u);
    m.topLeftCorner(q, q) = phi + gamma * g * Matrix::Identity(q, q);
    m.topRightCorner(q, u) = d.a32.transpose() * c.p_iu;
    m.bottomLeftCorner(u, q) = c.p_iu * d.a32;
    m.bottomRightCorner(u, u) =
        d.a_u.transpose() * c.p_iu + c.p_iu * d.a_u + 2.0 * alpha * c.p_iu;
    m -= gamma * epsilon * Matrix::Identity(q + u, q + u);
    return 0.5 * (m + m.transpose());
}

LmiCheck verify_lmi_th1(const std::vector<LmiCandidate>& candidates,
                        const std::vector<NodeDecomposition>& decomps, double gamma,
                        double epsilon, double alpha, const std::vector<double>& g_weights) {
    if (candidates.size() != decomps.size() ||
        (!g_weights.empty() && g_weights.size() != decomps.size())) {
        throw Error("lmi", "candidate count does not match node count");
    }
    LmiCheck out;
    for (std::size_t i = 0; i < decomps.size(); ++i) {
        const double g = g_weights.empty() ? 1.0 : g_weights[i];
        const Matrix m = lmi_th1_matrix(candidates[i], decomps[i], gamma, epsilon, alpha, g);
        const double top = max_symmetric_eigenvalue(m);
        out.max_eigenvalues.push_back(top);
        if (!(top < 0.0) && m.size() > 0) {
            if (out.pass) out.first_violation = static_cast<int>(i);
            out.pass = false;
        }
    }
    return out;
}

std::vector<LmiCandidate> constructive_candidates(const ObserverRealization& r) {
    std::vector<LmiCandidate> out;
    for (const auto& g : r.nodes) {
        const int u = r.state_dim - g.v_dim;
        out.push_back({g.p_ie, Matrix::Identity(u, u), g.p_ie * g.h_inj});
    }
    return out;
}

SynthesisResult synthesize(const Plant& plant, const NetworkGraph& graph,
                           const SynthesisParameters& params) {
    plant.validate();
    params.validate();
    if (graph.node_count() != plant.node_count()) {
        throw Error("plant", "graph node count does not match the output partition");
    }
    SynthesisResult res;
    res.g_weights = params.resolved_g(plant.node_count());

    if (!is_strongly_connected(graph)) {
        throw Error("graph", "communication graph is not strongly connected");
    }
    if (!is_observable(plant.a, plant.c, params.rank_tol)) {
        throw Error("observability", "the pair (C, A) is not observable");
    }

    res.designs = design_nodes(plant, params.rank_tol);
    std::vector<NodeDecomposition> decomps;
    for (const auto& d : res.designs) decomps.push_back(d.decomp);

    res.spectral = run_step(3, [&] { return spectral_data(graph); });
    const double epsilon = run_step(4, [&] {
        return compute_epsilon(decomps, res.spectral, res.g_weights, params.epsilon_fraction);
    });
    const double gamma = run_step(5, [&] {
        return select_gamma(decomps, epsilon, params.alpha, params.gamma_safety, res.g_weights);
    });

    ObserverRealization& real = res.realization;
    real.gamma = gamma;
    real.epsilon = epsilon;
    real.alpha = params.alpha;
    real.r_vector = res.spectral.perron_row;
    real.state_dim = plant.state_dim();

    for (int i = 0; i < plant.node_count(); ++i) {
        const NodeDesign& nd = res.designs[i];
        const NodeDecomposition& d = nd.decomp;
        const Matrix ea12 = d.ea12();
        const Matrix h = run_step(6, [&] { return place_injection(d.a22, ea12, params.alpha); });
        const Matrix pie = run_step(7, [&] {
            return solve_pie(d.a22, ea12, h, gamma, params.alpha, res.g_weights[i]);
        });
        real.nodes.push_back(run_step(8, [&] { return assemble_gains(d, nd.factor, h, pie); }));
        real.total_order += real.nodes.back().order();
    }
    return res;
}

}  // namespace distobs
