#include "distobs/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "distobs/error_system.hpp"

namespace distobs {

namespace {

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

double spectral_radius(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> eig(m, false);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

void check_dimensions(const ObserverRealization& r, const Plant& plant, const NetworkGraph& graph) {
    const int n = plant.state_dim();
    if (r.state_dim != n || static_cast<int>(r.nodes.size()) != plant.node_count() ||
        graph.node_count() != plant.node_count() || r.r_vector.size() != plant.node_count()) {
        throw Error("config", "realization, plant and graph sizes disagree");
    }
    for (int i = 0; i < plant.node_count(); ++i) {
        const auto& g = r.nodes[i];
        const int m = plant.node_outputs[i];
        const int k = g.order();
        if (g.n_gain.cols() != k || g.l_gain.rows() != k || g.l_gain.cols() != m ||
            g.m_gain.rows() != k || g.m_gain.cols() != n || g.p_out.rows() != n ||
            g.p_out.cols() != k || g.q_out.rows() != n || g.q_out.cols() != m) {
            throw Error("config", "gain dimensions of node " + std::to_string(i + 1) +
                                          " do not match the plant");
        }
    }
}

// Stacked state layout: x first, then z_1, ..., z_N.
class CoupledSystem {
public:
    CoupledSystem(const ObserverRealization& r, const Plant& plant, const NetworkGraph& graph)
        : r_(r), plant_(plant), adj_(graph.weights()) {
        offsets_.push_back(plant.state_dim());
        for (const auto& g : r.nodes) offsets_.push_back(offsets_.back() + g.order());
        for (int i = 0; i < plant.node_count(); ++i) c_.push_back(plant.node_output_matrix(i));
    }

    int size() const { return offsets_.back(); }
    int nodes() const { return static_cast<int>(r_.nodes.size()); }

    Vector x(const Vector& s) const { return s.head(plant_.state_dim()); }
    Vector z(const Vector& s, int i) const {
        return s.segment(offsets_[i], r_.nodes[i].order());
    }
    Vector y(const Vector& s, int i) const { return c_[i] * x(s); }

    Vector estimate(const Vector& s, int i) const {
        const auto& g = r_.nodes[i];
        return g.p_out * z(s, i) + g.q_out * y(s, i);
    }

    Vector derivative(const Vector& s) const {
        Vector ds(size());
        ds.head(plant_.state_dim()) = plant_.a * x(s);
        std::vector<Vector> xhat;
        for (int i = 0; i < nodes(); ++i) xhat.push_back(estimate(s, i));
        for (int i = 0; i < nodes(); ++i) {
            const auto& g = r_.nodes[i];
            Vector consensus = Vector::Zero(plant_.state_dim());
            for (int j = 0; j < nodes(); ++j) {
                if (adj_(i, j) > 0.0) consensus += adj_(i, j) * (xhat[j] - xhat[i]);
            }
            ds.segment(offsets_[i], g.order()) = g.n_gain * z(s, i) + g.l_gain * y(s, i) +
                                                 r_.gamma * r_.r_vector(i) * (g.m_gain * consensus);
        }
        return ds;
    }

private:
    const ObserverRealization& r_;
    const Plant& plant_;
    Matrix adj_;
    std::vector<Matrix> c_;
    std::vector<int> offsets_;
};

}  // namespace

double SimulationTrace::error_norm(std::size_t sample) const {
    double sq = 0.0;
    for (const auto& e : err.at(sample)) sq += e.squaredNorm();
    return std::sqrt(sq);
}

double SimulationTrace::node_error_norm(std::size_t sample, int node) const {
    return err.at(sample).at(node).norm();
}

double SimulationTrace::error_floor(std::size_t sample) const {
    const double scale = sample < x.size() ? x[sample].norm() : 0.0;
    return std::max(kErrorFloor, kRelativeErrorFloor * scale);
}

double default_step(const ObserverRealization& r, const Plant& plant,
                    const GraphSpectralData& spectral) {
    const GlobalErrorSystem sys = build_error_system(r, spectral);
    const double scale = spectral_radius(sys.restricted_matrix) + spectral_norm(plant.a) +
                         r.gamma * spectral_norm(spectral.laplacian);
    return scale > 0.0 ? 0.1 / scale : 0.1;
}

std::vector<Vector> consistent_initial_states(const ObserverRealization& r, const Plant& plant,
                                              const Vector& x0) {
    std::vector<Vector> out;
    for (int i = 0; i < plant.node_count(); ++i) {
        const auto& g = r.nodes[i];
        const Vector y = plant.node_output_matrix(i) * x0;
        out.push_back(g.t_is.transpose() * (x0 - g.q_out * y));
    }
    return out;
}

SimulationTrace simulate(const ObserverRealization& r, const Plant& plant,
                         const NetworkGraph& graph, const SimulationConfig& cfg) {
    check_dimensions(r, plant, graph);
    const int n = plant.state_dim();
    if (cfg.x0.size() != n) throw Error("config", "x0 has the wrong length");
    if (!(cfg.t_final > 0.0) || cfg.record_stride < 1) {
        throw Error("config", "t_final must be positive and record_stride at least 1");
    }
    if (cfg.dt > 0.0 && !(cfg.dt < cfg.t_final)) {
        throw Error("config", "dt must be smaller than t_final");
    }

    double dt = cfg.dt;
    if (dt <= 0.0) dt = default_step(r, plant, spectral_data(graph));
    const auto steps = static_cast<long>(std::ceil(cfg.t_final / dt - 1e-9));
    dt = cfg.t_final / static_cast<double>(std::max(steps, 1L));

    CoupledSystem sys(r, plant, graph);
    if (!cfg.z0.empty() && static_cast<int>(cfg.z0.size()) != sys.nodes()) {
        throw Error("config", "z0 needs one vector per node");
    }
    Vector s(sys.size());
    s.head(n) = cfg.x0;
    for (int i = 0, off = n; i < sys.nodes(); ++i) {
        const int k = r.nodes[i].order();
        if (!cfg.z0.empty() && cfg.z0[i].size() != k) {
            throw Error("config", "z0 has the wrong length for node " + std::to_string(i + 1));
        }
        s.segment(off, k) = cfg.z0.empty() ? Vector::Zero(k) : cfg.z0[i];
        off += k;
    }

    SimulationTrace trace;
    trace.dt = dt;
    for (const auto& g : r.nodes) trace.t_p.push_back(complement_basis(g.t_is));

    auto record = [&](double t) {
        trace.times.push_back(t);
        const Vector x = sys.x(s);
        trace.x.push_back(x);
        std::vector<Vector> zs, xh, es;
        std::vector<double> inv;
        for (int i = 0; i < sys.nodes(); ++i) {
            zs.push_back(sys.z(s, i));
            xh.push_back(sys.estimate(s, i));
            es.push_back(xh.back() - x);
            inv.push_back((trace.t_p[i].transpose() * es.back()).norm());
        }
        trace.z.push_back(std::move(zs));
        trace.xhat.push_back(std::move(xh));
        trace.err.push_back(std::move(es));
        trace.invariance_residuals.push_back(std::move(inv));
    };

    record(0.0);
    for (long step = 1; step <= steps; ++step) {
        const Vector k1 = sys.derivative(s);
        const Vector k2 = sys.derivative(s + 0.5 * dt * k1);
        const Vector k3 = sys.derivative(s + 0.5 * dt * k2);
        const Vector k4 = sys.derivative(s + dt * k3);
        s += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double t = dt * static_cast<double>(step);
        if (!s.allFinite()) {
            std::ostringstream msg;
            msg << "non-finite state at t = " << t;
            throw Error("simulation", msg.str());
        }
        if (step % cfg.record_stride == 0 || step == steps) record(t);
    }
    return trace;
}

RateEstimate estimate_rate(const SimulationTrace& trace, double window) {
    RateEstimate out;
    if (trace.size() == 0) {
        out.low_confidence = true;
        out.alpha_hat = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    std::vector<std::size_t> above;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        if (trace.error_norm(k) > trace.error_floor(k)) above.push_back(k);
    }
    if (trace.error_norm(trace.size() - 1) <= trace.error_floor(trace.size() - 1) &&
        above.size() < 10) {
        out.converged = true;
        return out;
    }
    window = std::clamp(window, 0.0, 1.0);
    std::size_t count = static_cast<std::size_t>(std::ceil(window * static_cast<double>(above.size())));
    count = std::max<std::size_t>(count, std::min<std::size_t>(10, above.size()));
    if (count < 2) {
        out.low_confidence = true;
        out.alpha_hat = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    const std::size_t first = above.size() - count;
    double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
    for (std::size_t k = first; k < above.size(); ++k) {
        const double t = trace.times[above[k]];
        const double l = std::log(trace.error_norm(above[k]));
        st += t;
        sl += l;
        stt += t * t;
        stl += t * l;
    }
    const double cnt = static_cast<double>(count);
    const double denom = cnt * stt - st * st;
    if (!(denom > 0.0)) {
        out.low_confidence = true;
        out.alpha_hat = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    const double slope = (cnt * stl - st * sl) / denom;
    out.alpha_hat = -slope;
    out.samples_used = count;
    const double drop = std::log(trace.error_norm(above[first])) -
                        std::log(trace.error_norm(above.back()));
    out.low_confidence = count < 10 || drop < 1.0;
    return out;
}

double check_invariance(const SimulationTrace& trace) {
    double worst = 0.0;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        for (std::size_t i = 0; i < trace.err[k].size(); ++i) {
            const Vector& e = trace.err[k][i];
            const double res = (trace.t_p[i].transpose() * e).norm();
            worst = std::max(worst, res / std::max(1.0, e.norm()));
        }
    }
    return worst;
}

}  // namespace distobs
