#include "doctest.h"

#include <algorithm>
#include <complex>
#include <random>

#include "distobs/error_system.hpp"
#include "distobs/instances.hpp"
#include "oracles.hpp"

using namespace distobs;

namespace {

std::vector<std::complex<double>> sorted_eigenvalues(const Matrix& m) {
    std::vector<std::complex<double>> out;
    if (m.size() == 0) return out;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(m.cast<std::complex<double>>());
    for (Eigen::Index k = 0; k < ces.eigenvalues().size(); ++k) out.push_back(ces.eigenvalues()(k));
    return out;
}

// Greedy multiset matching; returns the worst pairing distance.
double multiset_distance(std::vector<std::complex<double>> a, std::vector<std::complex<double>> b) {
    if (a.size() != b.size()) return INFINITY;
    double worst = 0.0;
    for (const auto& x : a) {
        auto best = std::min_element(b.begin(), b.end(), [&](const auto& l, const auto& r) {
            return std::abs(l - x) < std::abs(r - x);
        });
        worst = std::max(worst, std::abs(*best - x));
        b.erase(best);
    }
    return worst;
}

}  // namespace

TEST_CASE("single node: no coupling term") {
    Problem p = standard_problem(1.0);
    p.plant.node_outputs = {3};
    p.graph = NetworkGraph(1);
    const SynthesisResult res = synthesize(p);
    const auto sys = build_error_system(res.realization, res.spectral);
    const auto& g = res.realization.nodes[0];
    CHECK((sys.restricted_matrix - g.n_gain).norm() < 1e-14);
    CHECK((sys.full_matrix - g.t_is * g.n_gain * g.t_is.transpose()).norm() < 1e-14);
    CHECK(certify_rate(sys, 1.0).abscissa == doctest::Approx(spectral_abscissa(g.n_gain)));
}

TEST_CASE("zero coupling gain decouples the nodes") {
    const SynthesisResult res = synthesize(standard_problem(1.0));
    ObserverRealization r = res.realization;
    r.gamma = 0.0;
    const auto sys = build_error_system(r, res.spectral);
    std::vector<Matrix> blocks;
    for (const auto& g : r.nodes) blocks.push_back(g.n_gain);
    CHECK((sys.restricted_matrix - block_diagonal(blocks)).norm() < 1e-14);
}

TEST_CASE("rate certificate fails without coupling when a hidden mode is unstable") {
    // Node 1 cannot see the unstable second mode and has no coupling to help.
    Plant p;
    p.a = Matrix::Zero(2, 2);
    p.a(0, 0) = -1.0;
    p.a(1, 1) = 0.5;
    p.c = Matrix::Identity(2, 2);
    p.node_outputs = {1, 1};
    NetworkGraph two(2);
    two.set_edge(0, 1, 1.0);
    two.set_edge(1, 0, 1.0);
    SynthesisParameters params;
    params.alpha = 0.2;
    const SynthesisResult res = synthesize(p, two, params);
    CHECK(certify_rate(build_error_system(res.realization, res.spectral), 0.2).pass);
    ObserverRealization r = res.realization;
    r.gamma = 0.0;
    const auto cert = certify_rate(build_error_system(r, res.spectral), 0.2);
    CHECK_FALSE(cert.pass);
    CHECK(cert.abscissa == doctest::Approx(0.5));
}

TEST_CASE("invariance algebra, spectrum split and Lyapunov agreement") {
    std::mt19937_64 rng(41);
    RandomProblemOptions opts;
    opts.max_state = 5;
    opts.max_nodes = 3;
    for (int trial = 0; trial < 60; ++trial) {
        opts.alpha = 0.5 * (trial % 3);
        const Problem p = random_problem(rng, opts);
        const SynthesisResult res = synthesize(p);
        const auto sys = build_error_system(res.realization, res.spectral);
        CAPTURE(trial);
        const auto inv = invariance_residuals(sys);
        CHECK(inv.leakage <= 1e-9);
        CHECK(inv.commutation <= 1e-9 * std::max(1.0, sys.full_matrix.norm()));

        // Full spectrum = restricted spectrum plus sum(p_i) zeros.
        int zeros = 0;
        for (const auto& g : res.realization.nodes) zeros += g.p_dim;
        auto expected = sorted_eigenvalues(sys.restricted_matrix);
        for (int k = 0; k < zeros; ++k) expected.emplace_back(0.0, 0.0);
        const double scale = std::max(1.0, sys.full_matrix.norm());
        CHECK(multiset_distance(sorted_eigenvalues(sys.full_matrix), expected) <= 1e-8 * scale);

        const auto rate = certify_rate(sys, opts.alpha);
        const auto lyap = lyapunov_decrease_check(sys, res.realization, opts.alpha, 200, trial);
        CHECK(rate.pass);
        CHECK(lyap.pass);
        CHECK(lyap.max_eigenvalue < 0.0);
        CHECK(lyap.max_sampled_ratio < 0.0);
        if (sys.restricted_matrix.rows() > 0) CHECK(std::isfinite(lyap.max_sampled_ratio));
    }
}

TEST_CASE("Lyapunov check fails once alpha exceeds the certified rate") {
    const SynthesisResult res = synthesize(standard_problem(1.0));
    const auto sys = build_error_system(res.realization, res.spectral);
    CHECK(lyapunov_decrease_check(sys, res.realization, 1.0).pass);
    const double beyond = -spectral_abscissa(sys.restricted_matrix) + 0.5;
    const auto fail = lyapunov_decrease_check(sys, res.realization, beyond);
    CHECK_FALSE(fail.pass);
    CHECK(fail.max_eigenvalue > 0.0);
}

TEST_CASE("certificate bundle on the standard problem") {
    const Problem p = standard_problem(1.0);
    const SynthesisResult res = synthesize(p);
    const Certificate c = certify(res, p.plant.a);
    CHECK(c.all_pass());
    CHECK(c.total_order == 9);
    CHECK(c.p_dims == std::vector<int>{1, 1, 1});
    CHECK(c.restricted_spectral_abscissa < -1.0);
}
