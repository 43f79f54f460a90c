#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace distobs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Raised by every library routine on invalid input or a violated standing
// assumption. `step` names the pipeline stage ("graph", "observability",
// "factorization", ...) so front ends can report where synthesis stopped.
class Error : public std::runtime_error {
public:
    Error(std::string step, const std::string& message)
        : std::runtime_error(message), step_(std::move(step)) {}

    const std::string& step() const noexcept { return step_; }

private:
    std::string step_;
};

// Autonomous LTI plant x' = Ax, y = Cx with the rows of C split into
// contiguous per-node blocks.
struct Plant {
    Matrix a;
    Matrix c;
    std::vector<int> node_outputs;  // m_1, ..., m_N

    int state_dim() const { return static_cast<int>(a.rows()); }
    int node_count() const { return static_cast<int>(node_outputs.size()); }
    int row_offset(int node) const;
    Matrix node_output_matrix(int node) const;

    // Throws Error("plant", ...) on any shape or finiteness problem.
    void validate() const;
};

}  // namespace distobs
