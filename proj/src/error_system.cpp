#include "distobs/error_system.hpp"

#include <limits>
#include <random>

#include <Eigen/QR>

namespace distobs {

Matrix complement_basis(const Matrix& t_is) {
    const auto n = t_is.rows();
    const auto k = t_is.cols();
    if (k == 0) return Matrix::Identity(n, n);
    Eigen::HouseholderQR<Matrix> qr(t_is);
    Matrix q = qr.householderQ() * Matrix::Identity(n, n);
    return q.rightCols(n - k);
}

GlobalErrorSystem build_error_system(const ObserverRealization& r,
                                     const GraphSpectralData& spectral) {
    const int nodes = static_cast<int>(r.nodes.size());
    const int n = r.state_dim;
    if (spectral.laplacian.rows() != nodes || r.r_vector.size() != nodes) {
        throw Error("error_system", "graph size does not match the realization");
    }
    std::vector<Matrix> ts, tp, mm, nn;
    for (const auto& g : r.nodes) {
        if (g.t_is.rows() != n || g.m_gain.cols() != n || g.n_gain.rows() != g.t_is.cols()) {
            throw Error("error_system", "node gain dimensions are inconsistent");
        }
        ts.push_back(g.t_is);
        tp.push_back(complement_basis(g.t_is));
        mm.push_back(g.m_gain);
        nn.push_back(g.n_gain);
    }
    GlobalErrorSystem sys;
    sys.t_s = block_diagonal(ts);
    sys.t_p = block_diagonal(tp);
    const Matrix m = block_diagonal(mm);
    const Matrix nb = block_diagonal(nn);

    const Matrix rl = r.r_vector.asDiagonal() * spectral.laplacian;
    Matrix coupling = Matrix::Zero(nodes * n, nodes * n);
    for (int i = 0; i < nodes; ++i) {
        for (int j = 0; j < nodes; ++j) {
            coupling.block(i * n, j * n, n, n).diagonal().setConstant(rl(i, j));
        }
    }
    const Matrix m_coupled = m * coupling;
    sys.full_matrix = sys.t_s * nb * sys.t_s.transpose() - r.gamma * sys.t_s * m_coupled;
    sys.restricted_matrix = nb - r.gamma * m_coupled * sys.t_s;
    return sys;
}

InvarianceResiduals invariance_residuals(const GlobalErrorSystem& sys) {
    InvarianceResiduals out;
    out.commutation =
        (sys.full_matrix * sys.t_s - sys.t_s * sys.restricted_matrix).norm();
    out.leakage = (sys.t_p.transpose() * sys.full_matrix * sys.t_s).norm();
    return out;
}

RateCertificate certify_rate(const GlobalErrorSystem& sys, double alpha) {
    RateCertificate out;
    out.abscissa = spectral_abscissa(sys.restricted_matrix);
    out.pass = out.abscissa < -alpha;
    return out;
}

Matrix lyapunov_weight(const ObserverRealization& r) {
    std::vector<Matrix> blocks;
    for (const auto& g : r.nodes) {
        const int reduced = g.order();
        const int q = g.v_dim - g.p_dim;
        Matrix inner = Matrix::Identity(reduced, reduced);
        inner.topLeftCorner(q, q) = g.p_ie;
        const Matrix tp = complement_basis(g.t_is);
        blocks.push_back(tp * tp.transpose() + g.t_is * inner * g.t_is.transpose());
    }
    return block_diagonal(blocks);
}

LyapunovDecrease lyapunov_decrease_check(const GlobalErrorSystem& sys,
                                         const ObserverRealization& r, double alpha,
                                         int samples, std::uint64_t seed) {
    const Matrix p = lyapunov_weight(r);
    const Matrix lambda = p * sys.full_matrix + sys.full_matrix.transpose() * p;
    Matrix reduced = sys.t_s.transpose() * (lambda + 2.0 * alpha * p) * sys.t_s;
    reduced = (0.5 * (reduced + reduced.transpose())).eval();

    LyapunovDecrease out;
    out.max_eigenvalue = max_symmetric_eigenvalue(reduced);
    out.pass = reduced.size() == 0 || out.max_eigenvalue < 0.0;

    out.max_sampled_ratio = -std::numeric_limits<double>::infinity();
    if (samples > 0 && reduced.rows() > 0) {
        const Matrix weight = sys.t_s.transpose() * p * sys.t_s;
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal;
        for (int s = 0; s < samples; ++s) {
            Vector z(reduced.rows());
            for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
            z.normalize();
            const double ratio = z.dot(reduced * z) / z.dot(weight * z);
            out.max_sampled_ratio = std::max(out.max_sampled_ratio, ratio);
        }
    }
    return out;
}

Certificate certify(const ObserverRealization& r, const std::vector<NodeDesign>& designs,
                    const GraphSpectralData& spectral, const Matrix& a,
                    const std::vector<double>& g_weights) {
    if (designs.size() != r.nodes.size()) {
        throw Error("certificate", "node count mismatch between gains and problem");
    }
    Certificate c;
    c.total_order = r.total_order;
    c.epsilon = r.epsilon;
    c.gamma = r.gamma;
    c.alpha = r.alpha;

    std::vector<NodeDecomposition> decomps;
    for (std::size_t i = 0; i < designs.size(); ++i) {
        const auto& d = designs[i];
        c.p_dims.push_back(d.decomp.p_dim);
        c.v_dims.push_back(d.decomp.v_dim);
        decomps.push_back(d.decomp);
        c.cancellation_residual_max = std::max(
            c.cancellation_residual_max, verify_cancellation(r.nodes[i], d.decomp, d.factor));
    }
    c.cancellation_bound = kCancellationTol * a.norm();
    c.cancellation_pass = c.cancellation_residual_max <= c.cancellation_bound;

    const LmiCheck lmi = verify_lmi_th1(constructive_candidates(r), decomps, r.gamma,
                                        r.epsilon, r.alpha, g_weights);
    c.lmi_max_eigenvalues = lmi.max_eigenvalues;
    c.lmi_pass = lmi.pass;

    const GlobalErrorSystem sys = build_error_system(r, spectral);
    const RateCertificate rate = certify_rate(sys, r.alpha);
    c.restricted_spectral_abscissa = rate.abscissa;
    c.rate_pass = rate.pass;

    const LyapunovDecrease lyap = lyapunov_decrease_check(sys, r, r.alpha);
    c.lyapunov_max_eigenvalue = lyap.max_eigenvalue;
    c.lyapunov_pass = lyap.pass;

    const InvarianceResiduals inv = invariance_residuals(sys);
    c.invariance_leakage = inv.leakage;
    c.invariance_commutation = inv.commutation;
    c.invariance_pass = inv.leakage <= kInvarianceTol && inv.commutation <= kInvarianceTol;
    return c;
}

}  // namespace distobs
