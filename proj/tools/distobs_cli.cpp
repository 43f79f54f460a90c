// distobs: synthesize, simulate and verify reduced-order distributed observers.
//
// Exit codes: 0 ok, 1 I/O, parse or config error, 2 infeasible input or violated
// assumption, 3 simulation diverged or failed to converge, 4 certificate failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "distobs/error_system.hpp"
#include "distobs/instances.hpp"
#include "distobs/io.hpp"
#include "distobs/simulator.hpp"
#include "distobs/synthesis.hpp"

namespace {

using distobs::Error;
using distobs::Matrix;
using distobs::Vector;
using distobs::io::Json;

enum ExitCode { kOk = 0, kIoError = 1, kInfeasible = 2, kDiverged = 3, kCertificateFailure = 4 };

int report_error(const std::string& step, const std::string& message, int code) {
    Json err = {{"error", {{"step", step}, {"message", message}}}};
    std::cerr << err.dump() << "\n";
    return code;
}

int exit_code_for(const Error& e) {
    const std::string& s = e.step();
    if (s == "io" || s == "parse" || s == "config") return kIoError;
    if (s == "simulation") return kDiverged;
    return kInfeasible;
}

struct TuningFlags {
    double rank_tol = 0.0;
    double epsilon_fraction = 0.0;
    double gamma_safety = 0.0;

    void apply(distobs::SynthesisParameters& p) const {
        if (rank_tol > 0.0) p.rank_tol = rank_tol;
        if (epsilon_fraction > 0.0) p.epsilon_fraction = epsilon_fraction;
        if (gamma_safety > 0.0) p.gamma_safety = gamma_safety;
    }
};

Vector parse_vector(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            values.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw Error("parse", "cannot parse number \"" + item + "\"");
        }
    }
    return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string pass_text(bool ok) { return ok ? "PASS" : "FAIL"; }

void print_certificate(std::ostream& out, const distobs::Certificate& c) {
    char line[160];
    out << "total observer order: " << c.total_order << "\n";
    for (std::size_t i = 0; i < c.p_dims.size(); ++i) {
        out << "  node " << i + 1 << ": p = " << c.p_dims[i] << ", v = " << c.v_dims[i] << "\n";
    }
    std::snprintf(line, sizeof(line), "epsilon = %.6g, gamma = %.6g, alpha = %.6g\n", c.epsilon,
                  c.gamma, c.alpha);
    out << line;
    std::snprintf(line, sizeof(line), "  %-14s %-5s %s = %.3e\n", "rate", pass_text(c.rate_pass).c_str(),
                  "restricted abscissa", c.restricted_spectral_abscissa);
    out << line;
    std::snprintf(line, sizeof(line), "  %-14s %-5s %s = %.3e (bound %.3e)\n", "cancellation",
                  pass_text(c.cancellation_pass).c_str(), "max residual",
                  c.cancellation_residual_max, c.cancellation_bound);
    out << line;
    double worst = -INFINITY;
    for (double x : c.lmi_max_eigenvalues) worst = std::max(worst, x);
    std::snprintf(line, sizeof(line), "  %-14s %-5s %s = %.3e\n", "lmi", pass_text(c.lmi_pass).c_str(),
                  "worst eigenvalue", worst);
    out << line;
    std::snprintf(line, sizeof(line), "  %-14s %-5s %s = %.3e\n", "lyapunov",
                  pass_text(c.lyapunov_pass).c_str(), "max eigenvalue", c.lyapunov_max_eigenvalue);
    out << line;
    std::snprintf(line, sizeof(line), "  %-14s %-5s %s = %.3e\n", "invariance",
                  pass_text(c.invariance_pass).c_str(), "leakage", c.invariance_leakage);
    out << line;
}

distobs::Problem load_problem(const std::string& path, const TuningFlags& flags) {
    distobs::Problem p = distobs::io::parse_problem(distobs::io::read_json_file(path));
    flags.apply(p.params);
    try {
        p.params.validate();
    } catch (const Error& e) {
        throw Error("parse", e.what());
    }
    return p;
}

int cmd_synthesize(const std::string& input, const std::string& output, const TuningFlags& flags,
                   bool json) {
    try {
        const distobs::Problem problem = load_problem(input, flags);
        const distobs::SynthesisResult res = distobs::synthesize(problem);
        const distobs::Certificate cert = distobs::certify(res, problem.plant.a);
        const Json doc = distobs::io::realization_to_json(res.realization, &cert);
        distobs::io::write_text_file(output, doc.dump(2) + "\n");
        if (json) {
            std::cout << distobs::io::certificate_to_json(cert).dump(2) << "\n";
        } else {
            print_certificate(std::cout, cert);
        }
        if (!cert.all_pass()) {
            return report_error("certificate", "synthesized observer failed its certificates",
                                kCertificateFailure);
        }
        return kOk;
    } catch (const Error& e) {
        return report_error(e.step(), e.what(), exit_code_for(e));
    }
}

int cmd_simulate(const std::string& gains_path, const std::string& problem_path,
                 double t_final, double dt, const std::string& x0_text, const std::string& z0_text,
                 int stride, unsigned long seed, const std::string& trace_out,
                 const std::string& summary_out) {
    distobs::Problem problem;
    distobs::ObserverRealization real;
    distobs::SimulationConfig cfg;
    try {
        problem = load_problem(problem_path, {});
        real = distobs::io::realization_from_json(distobs::io::read_json_file(gains_path),
                                                  problem.plant);
        const int n = problem.plant.state_dim();
        if (x0_text.empty()) {
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> normal;
            cfg.x0 = Vector(n);
            for (int k = 0; k < n; ++k) cfg.x0(k) = normal(rng);
        } else {
            cfg.x0 = parse_vector(x0_text);
        }
        if (cfg.x0.size() != n) throw Error("parse", "--x0 must have " + std::to_string(n) + " entries");
        if (z0_text == "consistent") {
            cfg.z0 = distobs::consistent_initial_states(real, problem.plant, cfg.x0);
        } else if (!z0_text.empty()) {
            std::stringstream ss(z0_text);
            std::string part;
            while (std::getline(ss, part, ';')) cfg.z0.push_back(parse_vector(part));
            if (cfg.z0.size() != real.nodes.size()) {
                throw Error("parse", "--z0 needs one ';'-separated vector per node");
            }
            for (std::size_t i = 0; i < cfg.z0.size(); ++i) {
                if (cfg.z0[i].size() != real.nodes[i].order()) {
                    throw Error("parse", "--z0 entry " + std::to_string(i + 1) + " has the wrong length");
                }
            }
        }
    } catch (const Error& e) {
        return report_error(e.step(), e.what(), kIoError);
    }

    cfg.t_final = t_final > 0.0 ? t_final : 10.0 / std::max(real.alpha, 0.5);
    cfg.dt = dt;
    cfg.record_stride = stride;

    try {
        const distobs::SimulationTrace trace =
            distobs::simulate(real, problem.plant, problem.graph, cfg);
        const distobs::RateEstimate rate = distobs::estimate_rate(trace);
        const Json summary = distobs::io::simulation_summary(trace, rate);
        if (!trace_out.empty()) {
            std::ostringstream csv;
            distobs::io::write_trace_csv(csv, trace);
            distobs::io::write_text_file(trace_out, csv.str());
        }
        if (!summary_out.empty()) distobs::io::write_text_file(summary_out, summary.dump(2) + "\n");
        std::cout << summary.dump(2) << "\n";

        // Omniscience: no node's error may grow, and once the horizon covers
        // six decades at the fitted rate every node must have decayed by 1e-6.
        double initial_max = 0.0;
        for (std::size_t i = 0; i < real.nodes.size(); ++i) {
            initial_max = std::max(initial_max, trace.node_error_norm(0, static_cast<int>(i)));
        }
        const std::size_t last = trace.size() - 1;
        const double floor = trace.error_floor(last);
        const bool long_enough = !rate.low_confidence && !rate.converged && rate.alpha_hat > 0.0 &&
                                 cfg.t_final >= std::log(1e6) / rate.alpha_hat;
        for (std::size_t i = 0; i < real.nodes.size(); ++i) {
            const int node = static_cast<int>(i);
            const double e0 = trace.node_error_norm(0, node);
            const double eT = trace.node_error_norm(last, node);
            const bool grew = eT > std::max(e0, initial_max) * (1.0 + 1e-9) + floor;
            const bool slow = long_enough && eT > 1e-6 * initial_max + floor;
            if (grew || slow) {
                return report_error("omniscience",
                                    "estimate of node " + std::to_string(i + 1) +
                                        " did not converge by t_final",
                                    kDiverged);
            }
        }
        return kOk;
    } catch (const Error& e) {
        const int code = e.step() == "io" ? kIoError : (e.step() == "simulation" ? kDiverged : kIoError);
        return report_error(e.step(), e.what(), code);
    }
}

int cmd_verify(const std::string& gains_path, const std::string& problem_path, int samples,
               unsigned long seed, bool json) {
    distobs::Problem problem;
    distobs::ObserverRealization real;
    std::vector<distobs::NodeDesign> designs;
    distobs::GraphSpectralData spectral;
    try {
        problem = load_problem(problem_path, {});
        real = distobs::io::realization_from_json(distobs::io::read_json_file(gains_path),
                                                  problem.plant);
        designs = distobs::design_nodes(problem.plant, problem.params.rank_tol);
        for (std::size_t i = 0; i < designs.size(); ++i) {
            if (designs[i].decomp.p_dim != real.nodes[i].p_dim ||
                designs[i].decomp.v_dim != real.nodes[i].v_dim) {
                throw Error("parse", "node " + std::to_string(i + 1) +
                                         ": gains do not match the problem's decomposition");
            }
        }
        spectral = distobs::spectral_data(problem.graph);
    } catch (const Error& e) {
        return report_error(e.step(), e.what(), e.step() == "parse" || e.step() == "io" ? kIoError : kInfeasible);
    }

    try {
        const std::vector<double> g = problem.params.resolved_g(problem.plant.node_count());
        distobs::Certificate cert = distobs::certify(real, designs, spectral, problem.plant.a, g);

        std::vector<distobs::NodeDecomposition> decomps;
        for (const auto& d : designs) decomps.push_back(d.decomp);
        const Matrix key = distobs::epsilon_test_matrix(decomps, spectral, g);
        const double key_margin = distobs::min_symmetric_eigenvalue(key) - real.epsilon;
        const bool key_pass = real.epsilon > 0.0 && key_margin > 0.0;

        double sampled = -INFINITY;
        if (samples > 0) {
            const auto sys = distobs::build_error_system(real, spectral);
            sampled = distobs::lyapunov_decrease_check(sys, real, real.alpha, samples, seed)
                          .max_sampled_ratio;
        }

        struct Row {
            const char* name;
            bool pass;
        };
        const Row rows[] = {
            {"cancellation", cert.cancellation_pass}, {"key_lemma", key_pass},
            {"lmi", cert.lmi_pass},                   {"rate", cert.rate_pass},
            {"lyapunov", cert.lyapunov_pass},         {"invariance", cert.invariance_pass},
        };
        if (json) {
            Json doc = distobs::io::certificate_to_json(cert);
            doc["key_lemma_margin"] = key_margin;
            doc["pass"]["key_lemma"] = key_pass;
            if (samples > 0) doc["lyapunov_sampled_max_ratio"] = sampled;
            std::cout << doc.dump(2) << "\n";
        } else {
            print_certificate(std::cout, cert);
            char line[120];
            std::snprintf(line, sizeof(line), "  %-14s %-5s %s = %.3e\n", "key_lemma",
                          pass_text(key_pass).c_str(), "margin", key_margin);
            std::cout << line;
        }
        for (const Row& r : rows) {
            if (!r.pass) {
                return report_error(r.name, std::string("certificate failed: ") + r.name,
                                    kCertificateFailure);
            }
        }
        return kOk;
    } catch (const Error& e) {
        return report_error(e.step(), e.what(), kCertificateFailure);
    }
}

int cmd_example(const std::string& output, double alpha) {
    try {
        const Json doc = distobs::io::problem_to_json(distobs::standard_problem(alpha));
        if (output.empty()) {
            std::cout << doc.dump(2) << "\n";
        } else {
            distobs::io::write_text_file(output, doc.dump(2) + "\n");
        }
        return kOk;
    } catch (const Error& e) {
        return report_error(e.step(), e.what(), kIoError);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reduced-order distributed observer synthesis and verification"};
    app.require_subcommand(1);

    TuningFlags tuning;
    std::string problem_path, gains_path, output_path = "gains.json";
    bool json = false;
    unsigned long seed = 1;

    auto* synth = app.add_subcommand("synthesize", "design observer gains for a problem file");
    synth->add_option("problem", problem_path, "problem JSON")->required()->check(CLI::ExistingFile);
    synth->add_option("-o,--output", output_path, "gains JSON to write");
    synth->add_option("--rank-tol", tuning.rank_tol, "relative singular value threshold for ranks");
    synth->add_option("--epsilon-fraction", tuning.epsilon_fraction, "fraction of the key-lemma bound used as epsilon");
    synth->add_option("--gamma-safety", tuning.gamma_safety, "factor applied to the minimal coupling gain");
    synth->add_flag("--json", json, "print the certificate as JSON");
    synth->add_option("--seed", seed, "seed for randomized checks");

    double t_final = 0.0, dt = 0.0;
    int stride = 1, samples = 0;
    std::string x0_text, z0_text, trace_out, summary_out;
    auto* sim = app.add_subcommand("simulate", "simulate plant and observers");
    sim->add_option("gains", gains_path, "gains JSON")->required();
    sim->add_option("problem", problem_path, "problem JSON")->required();
    sim->add_option("--tfinal", t_final, "final time (default 10 / max(alpha, 0.5))");
    sim->add_option("--dt", dt, "integration step (default from the system's stiffness)");
    sim->add_option("--x0", x0_text, "initial plant state, comma separated (default: random from --seed)");
    sim->add_option("--z0", z0_text, "observer states 'a,b;c;...' per node, or 'consistent'");
    sim->add_option("--stride", stride, "record every k-th step")->check(CLI::PositiveNumber);
    sim->add_option("--seed", seed, "seed for the default x0");
    sim->add_option("--trace-out", trace_out, "CSV trace to write");
    sim->add_option("--summary-out", summary_out, "JSON summary to write");

    auto* ver = app.add_subcommand("verify", "re-check the certificates of a gains file");
    ver->add_option("gains", gains_path, "gains JSON")->required();
    ver->add_option("problem", problem_path, "problem JSON")->required();
    ver->add_option("--samples", samples, "random directions for the sampled Lyapunov check");
    ver->add_option("--seed", seed, "seed for randomized checks");
    ver->add_flag("--json", json, "print the report as JSON");

    double example_alpha = 1.0;
    std::string example_out;
    auto* ex = app.add_subcommand("example", "write the built-in 4-state, 3-node problem");
    ex->add_option("-o,--output", example_out, "file to write (default stdout)");
    ex->add_option("--alpha", example_alpha, "desired decay rate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kIoError;
    }

    if (*synth) return cmd_synthesize(problem_path, output_path, tuning, json);
    if (*sim) {
        return cmd_simulate(gains_path, problem_path, t_final, dt, x0_text, z0_text, stride, seed,
                            trace_out, summary_out);
    }
    if (*ver) return cmd_verify(gains_path, problem_path, samples, seed, json);
    return cmd_example(example_out, example_alpha);
}
