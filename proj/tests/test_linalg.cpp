#include "doctest.h"

#include <cmath>
#include <random>

#include "distobs/instances.hpp"
#include "distobs/linalg.hpp"
#include "oracles.hpp"

using namespace distobs;

namespace {

Matrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
}

Matrix random_stable(std::mt19937_64& rng, int k) {
    Matrix a = random_matrix(rng, k, k);
    const double shift = oracle::max_real_part(a) + 0.5;
    return a - shift * Matrix::Identity(k, k);
}

}  // namespace

TEST_CASE("full rank factorization examples") {
    Matrix c1(2, 2);
    c1 << 1, 0, 2, 0;
    const auto f1 = full_rank_factorize(c1);
    CHECK(f1.rank == 1);
    CHECK((f1.d_factor * f1.f_factor - c1).norm() < 1e-12);
    CHECK(std::abs(f1.d_factor(1, 0) - 2.0 * f1.d_factor(0, 0)) < 1e-12);
    CHECK(std::abs(f1.f_factor(0, 1)) < 1e-12);

    const auto f2 = full_rank_factorize(Matrix::Identity(2, 2));
    CHECK(f2.rank == 2);
    CHECK(f2.d_factor == Matrix::Identity(2, 2));
    CHECK(f2.f_factor == Matrix::Identity(2, 2));

    Matrix c3(3, 3);
    c3 << 1, 1, 0, 2, 2, 0, 0, 0, 3;
    const auto f3 = full_rank_factorize(c3);
    CHECK(f3.rank == 2);
    CHECK((f3.d_factor * f3.f_factor - c3).norm() <= 1e-10);

    CHECK_THROWS_AS(full_rank_factorize(Matrix::Zero(1, 3)), Error);
}

TEST_CASE("full rank factorization on random shapes") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int rows = 1 + trial % 4;
        const int cols = 1 + (trial / 4) % 6;
        const int inner = 1 + trial % std::min(rows, cols);
        const Matrix c = random_matrix(rng, rows, inner) * random_matrix(rng, inner, cols);
        const auto f = full_rank_factorize(c);
        CAPTURE(trial);
        CHECK((f.d_factor * f.f_factor - c).norm() <= 1e-10 * c.norm());
        CHECK(f.rank == oracle::svd_rank(c, kDefaultRankTol));
        CHECK(f.d_factor.cols() == f.rank);
        CHECK(f.f_factor.rows() == f.rank);
        CHECK(oracle::svd_rank(f.d_factor, kDefaultRankTol) == f.rank);
        CHECK(oracle::svd_rank(f.f_factor, kDefaultRankTol) == f.rank);
        CHECK((f.d_pinv() * f.d_factor - Matrix::Identity(f.rank, f.rank)).norm() < 1e-9);
    }
}

TEST_CASE("observability decomposition examples") {
    Matrix a(2, 2);
    a << 0, 1, 0, 0;
    Matrix f(1, 2);
    f << 1, 0;
    const auto d = observability_decomposition(a, f);
    CHECK(d.v_dim == 2);
    CHECK(d.p_dim == 1);
    CHECK((d.t_orth - Matrix::Identity(2, 2)).norm() < 1e-12);
    CHECK(d.e_mat(0, 0) == doctest::Approx(1.0));
    CHECK(d.a11(0, 0) == doctest::Approx(0.0));
    CHECK(d.a12(0, 0) == doctest::Approx(1.0));
    CHECK(d.a21(0, 0) == doctest::Approx(0.0));
    CHECK(d.a22(0, 0) == doctest::Approx(0.0));
    CHECK(d.a_u.size() == 0);

    Matrix b = Matrix::Zero(2, 2);
    b(0, 0) = 1;
    b(1, 1) = 2;
    const auto db = observability_decomposition(b, f);
    CHECK(db.v_dim == 1);
    REQUIRE(db.a_u.rows() == 1);
    CHECK(db.a_u(0, 0) == doctest::Approx(2.0));
    CHECK(std::abs(db.e_mat(0, 0)) == doctest::Approx(1.0));

    Matrix deficient(2, 2);
    deficient << 1, 0, 2, 0;
    CHECK_THROWS_AS(observability_decomposition(b, deficient), Error);
}

TEST_CASE("observability decomposition structure on random pairs") {
    std::mt19937_64 rng(5);
    RandomProblemOptions opts;
    for (int trial = 0; trial < 150; ++trial) {
        CAPTURE(trial);
        Matrix a, f;
        if (trial < 50) {
            // Random A with F taken from a random orthogonal matrix.
            a = random_matrix(rng, 5, 5);
            f = random_orthogonal(rng, 5).topRows(2);
        } else {
            const Problem p = random_problem(rng, opts);
            a = p.plant.a;
            f = full_rank_factorize(p.plant.node_output_matrix(0)).f_factor;
        }
        const auto d = observability_decomposition(a, f);
        const int n = static_cast<int>(a.rows());
        const double scale = a.norm();
        CHECK(d.v_dim == oracle::svd_rank(oracle::observability_matrix(a, f), 1e-9));
        CHECK((d.t_orth.transpose() * d.t_orth - Matrix::Identity(n, n)).norm() <= 1e-12);

        const Matrix at = d.t_orth.transpose() * a * d.t_orth;
        const int v = d.v_dim, u = n - v, p = d.p_dim;
        CHECK(at.topRightCorner(v, u).norm() <= 1e-10 * scale);
        CHECK((at.topLeftCorner(p, p) - d.a11).norm() <= 1e-10 * scale);
        CHECK((at.block(p, 0, v - p, p) - d.a21).norm() <= 1e-10 * scale);
        CHECK((at.bottomRightCorner(u, u) - d.a_u).norm() <= 1e-10 * scale);
        const Matrix ft = f * d.t_orth;
        CHECK(ft.rightCols(n - p).norm() <= 1e-10 * f.norm());
        CHECK((ft.leftCols(p) - d.e_mat).norm() <= 1e-10 * f.norm());

        CHECK(oracle::svd_rank(oracle::observability_matrix(d.a_o(), d.f_o()), 1e-9) == v);
        if (v > p) {
            CHECK(oracle::svd_rank(oracle::observability_matrix(d.a22, d.ea12()), 1e-9) == v - p);
        }
    }
}

TEST_CASE("lyapunov solver examples") {
    const Matrix p1 = solve_lyapunov(-Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    CHECK((p1 - 0.5 * Matrix::Identity(2, 2)).norm() < 1e-14);

    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = -1;
    a(1, 1) = -2;
    const Matrix p2 = solve_lyapunov(a, Matrix::Identity(2, 2));
    CHECK(p2(0, 0) == doctest::Approx(0.5));
    CHECK(p2(1, 1) == doctest::Approx(0.25));
    CHECK(std::abs(p2(0, 1)) < 1e-14);

    Matrix unstable = Matrix::Identity(2, 2);
    unstable(0, 1) = 3;
    CHECK_THROWS_WITH_AS(solve_lyapunov(unstable, Matrix::Identity(2, 2)),
                         "unstable coefficient matrix", Error);
}

TEST_CASE("lyapunov solver against substitution and the integral formula") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 60; ++trial) {
        const int k = 1 + trial % 6;
        const Matrix a = random_stable(rng, k);
        const Matrix q = Matrix::Identity(k, k);
        const Matrix p = solve_lyapunov(a, q);
        CAPTURE(trial);
        const double residual = (a.transpose() * p + p * a + q).norm();
        CHECK(residual <= 1e-9 * (a.norm() * p.norm() + q.norm()));
        CHECK((p - p.transpose()).norm() <= 1e-10 * std::max(1.0, p.norm()));
        CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(p).eigenvalues().minCoeff() > 0.0);
        if (k == 4) {
            const double decay = -oracle::max_real_part(a);
            const Matrix ref = oracle::lyapunov_integral(a, q, 40.0 / decay, 4000);
            CHECK((p - ref).norm() <= 1e-6 * p.norm());
        }
    }
}

TEST_CASE("spectral abscissa examples and similarity invariance") {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = -1;
    d(1, 1) = -3;
    CHECK(spectral_abscissa(d) == doctest::Approx(-1.0));
    Matrix rot(2, 2);
    rot << 0, 1, -1, 0;
    CHECK(std::abs(spectral_abscissa(rot)) < 1e-14);
    Matrix comp(2, 2);
    comp << 0, 1, -2, -3;
    CHECK(spectral_abscissa(comp) == doctest::Approx(-1.0).epsilon(1e-12));

    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 1 + trial % 6;
        const Matrix m = random_matrix(rng, k, k);
        // Well-conditioned similarity: orthogonal times a mild diagonal.
        Vector scale(k);
        std::uniform_real_distribution<double> u(0.5, 2.0);
        for (int i = 0; i < k; ++i) scale(i) = u(rng);
        const Matrix s = random_orthogonal(rng, k) * scale.asDiagonal();
        const Matrix similar = s * m * s.inverse();
        CAPTURE(trial);
        CHECK(std::abs(spectral_abscissa(m) - spectral_abscissa(similar)) <= 1e-8);
        CHECK(std::abs(spectral_abscissa(m) - oracle::max_real_part(m)) <= 1e-8);
    }
}

TEST_CASE("symmetric eigenvalue helpers") {
    CHECK(min_symmetric_eigenvalue(Matrix::Identity(3, 3)) == doctest::Approx(1.0));
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 2;
    d(1, 1) = -5;
    CHECK(min_symmetric_eigenvalue(d) == doctest::Approx(-5.0));
    Matrix mirror(3, 3);
    mirror << 2, -1, -1, -1, 2, -1, -1, -1, 2;
    CHECK(std::abs(min_symmetric_eigenvalue(mirror)) <= 1e-10);

    Matrix skew = Matrix::Identity(2, 2);
    skew(0, 1) = 1e-3;
    CHECK_THROWS_AS(min_symmetric_eigenvalue(skew), Error);

    CHECK(is_negative_definite(-Matrix::Identity(2, 2), 0.0));
    Matrix almost = Matrix::Zero(2, 2);
    almost(0, 0) = -1;
    almost(1, 1) = 1e-3;
    CHECK_FALSE(is_negative_definite(almost, 0.0));
    Matrix two(2, 2);
    two << -2, 1, 1, -2;
    CHECK(is_negative_definite(two, 0.5));
    CHECK_FALSE(is_negative_definite(two, 1.5));
}

TEST_CASE("observability test matches the rank oracle") {
    std::mt19937_64 rng(17);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + trial % 5;
        // Diagonal A with repeated entries makes unobservable pairs common.
        Matrix a = Matrix::Zero(n, n);
        std::uniform_int_distribution<int> pick(-2, 2);
        for (int i = 0; i < n; ++i) a(i, i) = pick(rng);
        Matrix c = Matrix::Zero(1, n);
        for (int i = 0; i < n; ++i)
            if (coin(rng)) c(0, i) = 1.0;
        if (c.isZero()) c(0, 0) = 1.0;
        const Matrix u = random_orthogonal(rng, n);
        const Matrix ar = u * a * u.transpose();
        const Matrix cr = c * u.transpose();
        CAPTURE(trial);
        CHECK(observable_subspace_dim(ar, cr) ==
              oracle::svd_rank(oracle::observability_matrix(ar, cr), 1e-8));
    }
}

TEST_CASE("riccati solver: scalar and random residuals") {
    // a = 1, g = 1, q = 1: 2x - x^2 + 1 = 0, stabilizing root 1 + sqrt(2).
    const Matrix x1 = solve_riccati(Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1));
    CHECK(x1(0, 0) == doctest::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-12));

    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 30; ++trial) {
        const int k = 1 + trial % 5;
        const Matrix a = random_matrix(rng, k, k);
        const Matrix b = random_matrix(rng, k, 1 + trial % 2);
        const Matrix g = b * b.transpose();
        const Matrix q = Matrix::Identity(k, k);
        const Matrix x = solve_riccati(a, g, q);
        const Matrix res = a.transpose() * x + x * a - x * g * x + q;
        CHECK(res.norm() <= 1e-8 * (1.0 + x.norm() * x.norm() * g.norm()));
        CHECK((x - x.transpose()).norm() <= 1e-10 * (1.0 + x.norm()));
        CHECK(oracle::max_real_part(a - g * x) < 0.0);
    }
}

TEST_CASE("riccati solver rejects an unstabilizable pair") {
    // Unstable mode with no input direction.
    Matrix a = Matrix::Identity(2, 2);
    Matrix g = Matrix::Zero(2, 2);
    g(0, 0) = 1.0;
    CHECK_THROWS_AS(solve_riccati(a, g, Matrix::Identity(2, 2)), Error);
}

TEST_CASE("observability gap") {
    Matrix a(2, 2);
    a << 0, 1, 0, 0;
    Matrix c(1, 2);
    c << 1, 0;
    CHECK(observability_gap(a, c) > 0.1);

    // Output nearly orthogonal to the second mode of a diagonal plant.
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = 1.0 + 1e-6;
    Matrix cw(1, 2);
    cw << 1, 1;
    CHECK(observability_gap(d, cw) < 1e-5);
}
