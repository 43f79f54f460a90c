#include "distobs/linalg.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace distobs {

namespace {

// Makes the first entry of each column that is clearly nonzero positive.
void fix_column_signs(Matrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (std::abs(m(i, j)) > 1e-12) {
                if (m(i, j) < 0.0) m.col(j) *= -1.0;
                break;
            }
        }
    }
}

void fix_row_signs(Matrix& m) {
    Matrix t = m.transpose();
    fix_column_signs(t);
    m = t.transpose();
}

// Orthonormal directions of im(w) whose singular values exceed `threshold`.
Matrix range_above(const Matrix& w, double threshold) {
    if (w.cols() == 0 || w.rows() == 0) return Matrix(w.rows(), 0);
    Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU);
    const Vector& s = svd.singularValues();
    int keep = 0;
    while (keep < s.size() && s(keep) > threshold) ++keep;
    return svd.matrixU().leftCols(keep);
}

// Basis of the smallest a^T-invariant subspace containing im(start), with
// `start` already orthonormal. The first columns of the result are `start`.
Matrix krylov_closure(const Matrix& a, const Matrix& start, double tol) {
    const auto n = a.rows();
    const double scale = std::max(a.norm(), 1.0);
    Matrix basis = start;
    Matrix frontier = start;
    while (frontier.cols() > 0 && basis.cols() < n) {
        Matrix w = a.transpose() * frontier;
        // Two passes of classical Gram-Schmidt keep the new block orthogonal.
        for (int pass = 0; pass < 2; ++pass) {
            w -= basis * (basis.transpose() * w);
        }
        frontier = range_above(w, tol * scale);
        if (frontier.cols() == 0) break;
        const auto old = basis.cols();
        const auto take = std::min<Eigen::Index>(frontier.cols(), n - old);
        frontier = frontier.leftCols(take).eval();
        // Re-orthogonalize against the basis once more after the SVD.
        frontier -= basis * (basis.transpose() * frontier);
        Eigen::HouseholderQR<Matrix> qr(frontier);
        frontier = qr.householderQ() * Matrix::Identity(frontier.rows(), take);
        basis.conservativeResize(n, old + take);
        basis.rightCols(take) = frontier;
    }
    return basis;
}

// Orthonormal basis of the orthogonal complement of im(basis), basis orthonormal.
Matrix orthogonal_complement(const Matrix& basis) {
    const auto n = basis.rows();
    const auto k = basis.cols();
    if (k == 0) return Matrix::Identity(n, n);
    Eigen::HouseholderQR<Matrix> qr(basis);
    Matrix q = qr.householderQ() * Matrix::Identity(n, n);
    return q.rightCols(n - k);
}

Matrix kron(const Matrix& x, const Matrix& y) {
    Matrix out(x.rows() * y.rows(), x.cols() * y.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
        }
    }
    return out;
}

Matrix checked_symmetric_part(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw Error("linalg", "matrix is not square");
    }
    if (m.size() == 0) return m;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw Error("linalg", "matrix is not symmetric");
    }
    return 0.5 * (m + m.transpose());
}

}  // namespace

int numerical_rank(const Matrix& m, double tol) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& s = svd.singularValues();
    if (s(0) == 0.0) return 0;
    int rank = 0;
    while (rank < s.size() && s(rank) > tol * s(0)) ++rank;
    return rank;
}

Matrix orthonormal_range(const Matrix& m, double tol) {
    if (m.size() == 0) return Matrix(m.rows(), 0);
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
    const double smax = svd.singularValues()(0);
    if (smax == 0.0) return Matrix(m.rows(), 0);
    return range_above(m, tol * smax);
}

Matrix FullRankFactorization::d_pinv() const {
    return (d_factor.transpose() * d_factor).ldlt().solve(d_factor.transpose());
}

FullRankFactorization full_rank_factorize(const Matrix& c, double tol) {
    if (c.size() == 0 || c.cwiseAbs().maxCoeff() == 0.0) {
        throw Error("factorization", "node has no effective output");
    }
    const int rank = numerical_rank(c, tol);
    FullRankFactorization out;
    out.rank = rank;
    if (rank == c.rows()) {
        out.d_factor = Matrix::Identity(c.rows(), c.rows());
        out.f_factor = c;
        return out;
    }
    Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Matrix f = svd.matrixV().leftCols(rank).transpose();
    fix_row_signs(f);
    // D = C F^T since the rows of F are orthonormal and span the row space.
    out.f_factor = f;
    out.d_factor = c * f.transpose();
    return out;
}

Matrix NodeDecomposition::a_o() const {
    Matrix out(v_dim, v_dim);
    out << a11, a12, a21, a22;
    return out;
}

Matrix NodeDecomposition::a_r() const {
    Matrix out(unobservable_dim(), v_dim);
    out << a31, a32;
    return out;
}

Matrix NodeDecomposition::f_o() const {
    Matrix out = Matrix::Zero(p_dim, v_dim);
    out.leftCols(p_dim) = e_mat;
    return out;
}

NodeDecomposition observability_decomposition(const Matrix& a, const Matrix& f, double tol) {
    const auto n = a.rows();
    if (a.cols() != n || f.cols() != n) {
        throw Error("decomposition", "dimension mismatch between A and F");
    }
    const auto p = f.rows();
    if (p == 0 || numerical_rank(f, tol) != p) {
        throw Error("decomposition", "F must have full row rank");
    }

    Eigen::HouseholderQR<Matrix> qr(f.transpose());
    Matrix t_p = qr.householderQ() * Matrix::Identity(n, p);
    fix_column_signs(t_p);

    Matrix observable = krylov_closure(a, t_p, tol);
    Matrix unobservable = orthogonal_complement(observable);

    Matrix t(n, n);
    t << observable, unobservable;
    Matrix rest = t.rightCols(n - p);
    fix_column_signs(rest);
    t.rightCols(n - p) = rest;

    NodeDecomposition d;
    d.t_orth = t;
    d.p_dim = static_cast<int>(p);
    d.v_dim = static_cast<int>(observable.cols());
    const int v = d.v_dim;
    const int ip = d.p_dim;
    const int nn = static_cast<int>(n);

    const Matrix at = t.transpose() * a * t;
    d.a11 = at.block(0, 0, ip, ip);
    d.a12 = at.block(0, ip, ip, v - ip);
    d.a21 = at.block(ip, 0, v - ip, ip);
    d.a22 = at.block(ip, ip, v - ip, v - ip);
    d.a31 = at.block(v, 0, nn - v, ip);
    d.a32 = at.block(v, ip, nn - v, v - ip);
    d.a_u = at.block(v, v, nn - v, nn - v);
    d.e_mat = f * t.leftCols(ip);

    if (numerical_rank(d.e_mat, tol) != ip) {
        throw Error("decomposition", "E block is singular");
    }
    return d;
}

int observable_subspace_dim(const Matrix& a, const Matrix& c, double tol) {
    if (a.rows() != a.cols() || c.cols() != a.rows()) {
        throw Error("observability", "dimension mismatch between A and C");
    }
    Matrix start = orthonormal_range(c.transpose(), tol);
    if (start.cols() == 0) return 0;
    return static_cast<int>(krylov_closure(a, start, tol).cols());
}

bool is_observable(const Matrix& a, const Matrix& c, double tol) {
    return observable_subspace_dim(a, c, tol) == a.rows();
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
    const auto k = a.rows();
    if (a.cols() != k || q.rows() != k || q.cols() != k) {
        throw Error("lyapunov", "dimension mismatch in Lyapunov equation");
    }
    if (k == 0) return Matrix(0, 0);
    if (!(spectral_abscissa(a) < 0.0)) {
        throw Error("lyapunov", "unstable coefficient matrix");
    }

    Eigen::RealSchur<Matrix> schur(a);
    const Matrix& u = schur.matrixU();
    const Matrix& s = schur.matrixT();
    const Matrix rhs = -(u.transpose() * q * u);

    // Diagonal blocks of the quasi-triangular factor: (start, size).
    std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;
    for (Eigen::Index i = 0; i < k;) {
        const Eigen::Index size = (i + 1 < k && s(i + 1, i) != 0.0) ? 2 : 1;
        blocks.emplace_back(i, size);
        i += size;
    }

    // s^T X + X s = rhs, solved block by block in increasing (row, col) order.
    Matrix x = Matrix::Zero(k, k);
    for (const auto& [si, ni] : blocks) {
        for (const auto& [sj, nj] : blocks) {
            Matrix c = rhs.block(si, sj, ni, nj);
            if (si > 0) {
                c -= s.block(0, si, si, ni).transpose() * x.block(0, sj, si, nj);
            }
            if (sj > 0) {
                c -= x.block(si, 0, ni, sj) * s.block(0, sj, sj, nj);
            }
            const Matrix sii_t = s.block(si, si, ni, ni).transpose();
            const Matrix sjj = s.block(sj, sj, nj, nj);
            const Matrix sys = kron(Matrix::Identity(nj, nj), sii_t)
                             + kron(sjj.transpose(), Matrix::Identity(ni, ni));
            const Vector vec_c = Eigen::Map<const Vector>(c.data(), c.size());
            const Vector vec_x = sys.fullPivLu().solve(vec_c);
            x.block(si, sj, ni, nj) = Eigen::Map<const Matrix>(vec_x.data(), ni, nj);
        }
    }

    Matrix p = u * x * u.transpose();
    return 0.5 * (p + p.transpose());
}

Matrix solve_riccati(const Matrix& a, const Matrix& g, const Matrix& q) {
    const auto k = a.rows();
    if (a.cols() != k || g.rows() != k || g.cols() != k || q.rows() != k || q.cols() != k) {
        throw Error("riccati", "dimension mismatch");
    }
    if (k == 0) return Matrix(0, 0);

    Matrix z(2 * k, 2 * k);
    z << a, -g, -q, -a.transpose();
    const double norm0 = z.lpNorm<1>();
    bool converged = false;
    for (int iter = 0; iter < 100 && !converged; ++iter) {
        Eigen::PartialPivLU<Matrix> lu(z);
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < 2 * k; ++i) log_det += std::log(std::abs(lu.matrixLU()(i, i)));
        if (!std::isfinite(log_det)) throw Error("riccati", "Hamiltonian has imaginary-axis eigenvalues");
        const double c = std::exp(log_det / static_cast<double>(2 * k));
        const Matrix next = 0.5 * (z / c + c * lu.inverse());
        converged = (next - z).lpNorm<1>() <= 1e-13 * std::max(1.0, next.lpNorm<1>());
        z = next;
    }
    if (!z.allFinite() || !(z.lpNorm<1>() < 1e12 * std::max(1.0, norm0))) {
        throw Error("riccati", "sign iteration diverged");
    }
    Matrix lhs(2 * k, k), rhs(2 * k, k);
    lhs << z.topRightCorner(k, k), z.bottomRightCorner(k, k) + Matrix::Identity(k, k);
    rhs << z.topLeftCorner(k, k) + Matrix::Identity(k, k), z.bottomLeftCorner(k, k);
    Matrix x = lhs.colPivHouseholderQr().solve(-rhs);
    x = (0.5 * (x + x.transpose())).eval();

    auto residual = [&](const Matrix& xx) {
        return (a.transpose() * xx + xx * a - xx * g * xx + q).norm();
    };
    // Newton steps: (a - g X)^T X+ + X+ (a - g X) + q + X g X = 0.
    double res = residual(x);
    for (int step = 0; step < 3 && res > 0.0; ++step) {
        const Matrix closed = a - g * x;
        Matrix next;
        try {
            next = solve_lyapunov(closed, q + x * g * x);
        } catch (const Error&) {
            break;
        }
        const double r_next = residual(next);
        if (!(r_next < res)) break;
        x = next;
        res = r_next;
    }
    if (!x.allFinite() || !(spectral_abscissa(a - g * x) < 0.0)) {
        throw Error("riccati", "no stabilizing solution");
    }
    return x;
}

double spectral_abscissa(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw Error("linalg", "spectral abscissa needs a square matrix");
    }
    if (m.size() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::EigenSolver<Matrix> eig(m, false);
    return eig.eigenvalues().real().maxCoeff();
}

double min_symmetric_eigenvalue(const Matrix& m) {
    const Matrix sym = checked_symmetric_part(m);
    if (sym.size() == 0) return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(0);
}

double max_symmetric_eigenvalue(const Matrix& m) {
    const Matrix sym = checked_symmetric_part(m);
    if (sym.size() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(sym.rows() - 1);
}

bool is_negative_definite(const Matrix& m, double margin) {
    if (m.rows() != m.cols()) {
        throw Error("linalg", "definiteness test needs a square matrix");
    }
    if (m.size() == 0) return true;
    const Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(sym.rows() - 1) < -margin;
}

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    Matrix out = Matrix::Zero(rows, cols);
    Eigen::Index r = 0;
    Eigen::Index c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

}  // namespace distobs
