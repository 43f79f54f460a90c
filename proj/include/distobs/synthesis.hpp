#pragma once

#include <vector>

#include "distobs/graph.hpp"
#include "distobs/linalg.hpp"

namespace distobs {

struct SynthesisParameters {
    double alpha = 0.0;              // desired error decay rate
    std::vector<double> g_weights;   // empty means g_i = 1 for every node
    double epsilon_fraction = 0.9;
    double gamma_safety = 1.25;
    double rank_tol = kDefaultRankTol;

    // g_i for a network of `nodes` nodes, validated.
    std::vector<double> resolved_g(int nodes) const;
    void validate() const;
};

// Local observer at one node:
//   z' = N z + L y_i + gamma r_i M sum_j a_ij (xhat_j - xhat_i)
//   xhat = P z + Q y_i
// K is the output gain in the node's decomposition coordinates (Q = T K).
struct NodeGains {
    Matrix n_gain;  // (n-p) x (n-p)
    Matrix l_gain;  // (n-p) x m
    Matrix m_gain;  // (n-p) x n
    Matrix p_out;   // n x (n-p)
    Matrix q_out;   // n x m
    Matrix k_mat;   // n x m
    Matrix h_inj;   // (v-p) x p
    Matrix p_ie;    // (v-p) x (v-p), positive definite
    Matrix t_is;    // n x (n-p)
    int p_dim = 0;
    int v_dim = 0;

    int order() const { return static_cast<int>(n_gain.rows()); }
};

struct ObserverRealization {
    std::vector<NodeGains> nodes;
    double gamma = 0.0;
    double epsilon = 0.0;
    double alpha = 0.0;
    Vector r_vector;
    int total_order = 0;
    int state_dim = 0;
};

// Per-node output factorization and coordinate split.
struct NodeDesign {
    FullRankFactorization factor;
    NodeDecomposition decomp;
};

std::vector<NodeDesign> design_nodes(const Plant& plant, double rank_tol = kDefaultRankTol);

// T^T (mirror (x) I_n) T + G with T = diag(T_i), G_i = diag(g_i I_v, 0).
Matrix epsilon_test_matrix(const std::vector<NodeDecomposition>& decomps,
                           const GraphSpectralData& spectral,
                           const std::vector<double>& g_weights);

double compute_epsilon(const std::vector<NodeDecomposition>& decomps,
                       const GraphSpectralData& spectral,
                       const std::vector<double>& g_weights,
                       double epsilon_fraction = 0.9);

// Bisection never goes below this value of beta = gamma * epsilon - 2 alpha.
inline constexpr double kMinBeta = 1e-6;

// True iff A_u + A_u^T - beta I + A_32 A_32^T / beta < 0 (vacuous when the
// node has no unobservable part).
bool coupling_condition_holds(const NodeDecomposition& d, double beta);

double select_gamma(const std::vector<NodeDecomposition>& decomps, double epsilon,
                    double alpha, double gamma_safety = 1.25,
                    const std::vector<double>& g_weights = {});

// H with spectral_abscissa(a22 - H ea12) < -alpha. Returns a 0 x p matrix when
// a22 is empty.
Matrix place_injection(const Matrix& a22, const Matrix& ea12, double alpha);

// Solves (A_cl + alpha I)^T P + P (A_cl + alpha I) + (g gamma - 2 alpha) I = 0
// with A_cl = a22 - h ea12.
Matrix solve_pie(const Matrix& a22, const Matrix& ea12, const Matrix& h, double gamma,
                 double alpha, double g = 1.0);

NodeGains assemble_gains(const NodeDecomposition& decomp, const FullRankFactorization& frf,
                         const Matrix& h, const Matrix& pie);

// Frobenius norm of
//   (S L - S N S^T K) D F T + S N S^T + (K D F T - I) T^T A T
// which vanishes iff the error dynamics do not depend on the plant state.
double verify_cancellation(const NodeGains& gains, const NodeDecomposition& decomp,
                           const FullRankFactorization& frf);

struct LmiCandidate {
    Matrix p_ie;
    Matrix p_iu;
    Matrix w;
};

struct LmiCheck {
    bool pass = true;
    std::vector<double> max_eigenvalues;
    int first_violation = -1;
};

Matrix lmi_th1_matrix(const LmiCandidate& c, const NodeDecomposition& d, double gamma,
                      double epsilon, double alpha, double g);

LmiCheck verify_lmi_th1(const std::vector<LmiCandidate>& candidates,
                        const std::vector<NodeDecomposition>& decomps, double gamma,
                        double epsilon, double alpha,
                        const std::vector<double>& g_weights = {});

// P_iu = I, W_i = P_ie H_i.
std::vector<LmiCandidate> constructive_candidates(const ObserverRealization& r);

// Everything needed to run the design: plant, network and tuning knobs.
struct Problem {
    Plant plant;
    NetworkGraph graph{1};
    SynthesisParameters params;
};

struct SynthesisResult {
    ObserverRealization realization;
    std::vector<NodeDesign> designs;
    GraphSpectralData spectral;
    std::vector<double> g_weights;
};

SynthesisResult synthesize(const Plant& plant, const NetworkGraph& graph,
                           const SynthesisParameters& params);

inline SynthesisResult synthesize(const Problem& p) {
    return synthesize(p.plant, p.graph, p.params);
}

}  // namespace distobs
