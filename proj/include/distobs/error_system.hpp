#pragma once

#include <cstdint>

#include "distobs/synthesis.hpp"

namespace distobs {

// Stacked error e = col(e_1, ..., e_N) obeys e' = full_matrix * e, and every
// trajectory stays in im t_s, where it reduces to z' = restricted_matrix * z
// with e = t_s z.
struct GlobalErrorSystem {
    Matrix full_matrix;        // T_s N T_s^T - gamma T_s M (R L (x) I_n)
    Matrix restricted_matrix;  // N - gamma M (R L (x) I_n) T_s
    Matrix t_s;                // diag(T_1s, ..., T_Ns)
    Matrix t_p;                // diag(T_1p, ..., T_Np)
};

// Orthonormal basis of the complement of im t_is (the T_ip block).
Matrix complement_basis(const Matrix& t_is);

GlobalErrorSystem build_error_system(const ObserverRealization& r,
                                     const GraphSpectralData& spectral);

// ||full * T_s - T_s * restricted||_F and ||T_p^T * full * T_s||_F.
struct InvarianceResiduals {
    double commutation = 0.0;
    double leakage = 0.0;
};
InvarianceResiduals invariance_residuals(const GlobalErrorSystem& sys);

struct RateCertificate {
    double abscissa = 0.0;
    bool pass = false;
};
RateCertificate certify_rate(const GlobalErrorSystem& sys, double alpha);

// V(e) = e^T P e with P_i = T_i diag(I, P_ie, I) T_i^T.
Matrix lyapunov_weight(const ObserverRealization& r);

struct LyapunovDecrease {
    double max_eigenvalue = 0.0;     // of T_s^T (Lambda + 2 alpha P) T_s
    double max_sampled_ratio = 0.0;  // max over samples of (V' + 2 alpha V) / V
    bool pass = false;
};

// Lambda = P F + F^T P for F = sys.full_matrix.
LyapunovDecrease lyapunov_decrease_check(const GlobalErrorSystem& sys,
                                         const ObserverRealization& r, double alpha,
                                         int samples = 0, std::uint64_t seed = 1);

// Every numerical certificate for a synthesized observer in one place.
struct Certificate {
    int total_order = 0;
    std::vector<int> p_dims;
    std::vector<int> v_dims;
    double epsilon = 0.0;
    double gamma = 0.0;
    double alpha = 0.0;
    double restricted_spectral_abscissa = 0.0;
    double cancellation_residual_max = 0.0;
    double cancellation_bound = 0.0;  // 1e-9 ||A||_F
    std::vector<double> lmi_max_eigenvalues;
    double lyapunov_max_eigenvalue = 0.0;
    double invariance_leakage = 0.0;
    double invariance_commutation = 0.0;

    bool rate_pass = false;
    bool cancellation_pass = false;
    bool lmi_pass = false;
    bool lyapunov_pass = false;
    bool invariance_pass = false;

    bool all_pass() const {
        return rate_pass && cancellation_pass && lmi_pass && lyapunov_pass && invariance_pass;
    }
};

inline constexpr double kCancellationTol = 1e-9;  // relative to ||A||_F
inline constexpr double kInvarianceTol = 1e-9;

Certificate certify(const ObserverRealization& r, const std::vector<NodeDesign>& designs,
                    const GraphSpectralData& spectral, const Matrix& a,
                    const std::vector<double>& g_weights = {});

inline Certificate certify(const SynthesisResult& s, const Matrix& a) {
    return certify(s.realization, s.designs, s.spectral, a, s.g_weights);
}

}  // namespace distobs
