#include "distobs/types.hpp"

#include <numeric>

namespace distobs {

int Plant::row_offset(int node) const {
    return std::accumulate(node_outputs.begin(), node_outputs.begin() + node, 0);
}

Matrix Plant::node_output_matrix(int node) const {
    return c.middleRows(row_offset(node), node_outputs.at(node));
}

void Plant::validate() const {
    if (a.rows() == 0 || a.rows() != a.cols()) {
        throw Error("plant", "state matrix A must be square and nonempty");
    }
    if (c.cols() != a.cols()) {
        throw Error("plant", "output matrix C must have as many columns as A");
    }
    if (!a.allFinite() || !c.allFinite()) {
        throw Error("plant", "plant matrices contain non-finite entries");
    }
    if (node_outputs.empty()) {
        throw Error("plant", "at least one node is required");
    }
    int total = 0;
    for (int m : node_outputs) {
        if (m <= 0) {
            throw Error("plant", "every node must receive at least one output row");
        }
        total += m;
    }
    if (total != c.rows()) {
        throw Error("plant", "node output sizes do not sum to the row count of C");
    }
}

}  // namespace distobs
