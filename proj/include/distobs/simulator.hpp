#pragma once

#include <limits>

#include "distobs/synthesis.hpp"

namespace distobs {

struct SimulationConfig {
    double t_final = 10.0;
    double dt = 0.0;             // 0 selects default_step()
    Vector x0;
    std::vector<Vector> z0;      // empty means z_i(0) = 0
    int record_stride = 1;
};

// Samples of the plant, the local observers and their errors. t_p holds the
// per-node T_ip bases used for the invariance residuals.
struct SimulationTrace {
    std::vector<double> times;
    std::vector<Vector> x;
    std::vector<std::vector<Vector>> z;     // [sample][node]
    std::vector<std::vector<Vector>> xhat;  // [sample][node]
    std::vector<std::vector<Vector>> err;   // [sample][node]
    std::vector<std::vector<double>> invariance_residuals;  // ||T_ip^T e_i||
    std::vector<Matrix> t_p;
    double dt = 0.0;

    std::size_t size() const { return times.size(); }
    double error_norm(std::size_t sample) const;
    double node_error_norm(std::size_t sample, int node) const;
    // Errors below this are rounding noise:
    // max(kErrorFloor, kRelativeErrorFloor * ||x||).
    double error_floor(std::size_t sample) const;
};

// 0.1 / (rho(restricted) + ||A||_2 + gamma ||L||_2), where rho is the spectral
// radius of the restricted error matrix.
double default_step(const ObserverRealization& r, const Plant& plant,
                    const GraphSpectralData& spectral);

// z_i(0) making xhat_i(0) = x(0), i.e. zero initial error.
std::vector<Vector> consistent_initial_states(const ObserverRealization& r, const Plant& plant,
                                              const Vector& x0);

// Classical RK4 on (x, z_1, ..., z_N); neighbour estimates are evaluated at
// the same stage as the local state.
SimulationTrace simulate(const ObserverRealization& r, const Plant& plant,
                         const NetworkGraph& graph, const SimulationConfig& cfg);

struct RateEstimate {
    double alpha_hat = std::numeric_limits<double>::infinity();
    bool converged = false;       // error already below the floor
    bool low_confidence = false;  // too few samples or less than one e-fold of decay
    std::size_t samples_used = 0;
};

inline constexpr double kErrorFloor = 1e-12;
// xhat - x cancels digits in proportion to ||x||, so unstable plants need a
// floor that grows with the state.
inline constexpr double kRelativeErrorFloor = 1e-10;

// Negated least-squares slope of log ||e(t)|| over the last `window` fraction
// of the samples above the error floor. The floor scales with ||x(t)|| so an
// unstable plant does not turn rounding noise into apparent error growth.
RateEstimate estimate_rate(const SimulationTrace& trace, double window = 0.5);

// max over samples and nodes of ||T_ip^T e_i|| / max(1, ||e_i||).
double check_invariance(const SimulationTrace& trace);

}  // namespace distobs
