#pragma once

#include "distobs/types.hpp"

namespace distobs {

// Singular values below kDefaultRankTol * sigma_max count as zero.
inline constexpr double kDefaultRankTol = 1e-9;

int numerical_rank(const Matrix& m, double tol = kDefaultRankTol);

// Orthonormal basis of im(m), columns ordered by decreasing singular value.
Matrix orthonormal_range(const Matrix& m, double tol = kDefaultRankTol);

// C_i = D_i F_i with D_i full column rank and F_i full row rank. When C_i
// already has full row rank the factorization is trivial: D_i = I, F_i = C_i.
struct FullRankFactorization {
    Matrix d_factor;
    Matrix f_factor;
    int rank = 0;

    // (D^T D)^{-1} D^T
    Matrix d_pinv() const;
};

FullRankFactorization full_rank_factorize(const Matrix& c, double tol = kDefaultRankTol);

// Orthogonal change of coordinates T = [T_p T_ie T_u] splitting the state
// space for the pair (F, A):
//
//   T^T A T = [ A11 A12 0  ]      F T = [ E 0 0 ]
//             [ A21 A22 0  ]
//             [ A31 A32 Au ]
//
// T_p spans im F^T (p columns), [T_p T_ie] spans the observable subspace
// (v columns) and T_u spans the unobservable subspace ker O_F.
struct NodeDecomposition {
    Matrix t_orth;
    Matrix a11, a12, a21, a22, a31, a32, a_u;
    Matrix e_mat;
    int v_dim = 0;
    int p_dim = 0;

    int n() const { return static_cast<int>(t_orth.rows()); }
    int reduced_dim() const { return n() - p_dim; }     // n - p
    int injection_dim() const { return v_dim - p_dim; }  // v - p
    int unobservable_dim() const { return n() - v_dim; } // n - v

    Matrix t_p() const { return t_orth.leftCols(p_dim); }
    Matrix t_s() const { return t_orth.rightCols(reduced_dim()); }
    Matrix t_observable() const { return t_orth.leftCols(v_dim); }
    Matrix t_unobservable() const { return t_orth.rightCols(unobservable_dim()); }

    Matrix a_o() const;  // [A11 A12; A21 A22]
    Matrix a_r() const;  // [A31 A32]
    Matrix f_o() const;  // [E 0]
    Matrix ea12() const { return e_mat * a12; }
};

NodeDecomposition observability_decomposition(const Matrix& a, const Matrix& f,
                                              double tol = kDefaultRankTol);

// Dimension of the observable subspace of (c, a), built as the smallest
// A^T-invariant subspace containing im c^T.
int observable_subspace_dim(const Matrix& a, const Matrix& c, double tol = kDefaultRankTol);

bool is_observable(const Matrix& a, const Matrix& c, double tol = kDefaultRankTol);

// Solves a^T P + P a + q = 0 for Hurwitz a (real Schur form, then
// block back-substitution).
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

// Stabilizing solution of a^T X + X a - X g X + q = 0 (g, q symmetric PSD),
// i.e. a - g X Hurwitz. Matrix sign iteration on the Hamiltonian followed by
// Newton refinement. Throws Error("riccati", ...) when no stabilizing
// solution is found.
Matrix solve_riccati(const Matrix& a, const Matrix& g, const Matrix& q);

// max Re(lambda); -inf for an empty matrix.
double spectral_abscissa(const Matrix& m);

// Eigenvalues of a symmetric matrix. The input must be symmetric to within
// 1e-10 (relative to its largest entry); it is symmetrized before solving.
double min_symmetric_eigenvalue(const Matrix& m);
double max_symmetric_eigenvalue(const Matrix& m);

// Strictly: max eigenvalue of (m + m^T)/2 below -margin.
bool is_negative_definite(const Matrix& m, double margin = 0.0);

Matrix block_diagonal(const std::vector<Matrix>& blocks);

}  // namespace distobs
