#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "can/tensor.hpp"

namespace can {

using Edge = std::pair<int, int>;  // src -> dst

bool is_dag(int n, const std::set<Edge>& edges);

/// Directed acyclic graph over n nodes; acyclicity is enforced on construction.
class CausalGraph {
public:
    CausalGraph(int n, std::set<Edge> edges);

    int n() const { return n_; }
    const std::set<Edge>& edges() const { return edges_; }
    bool has_edge(int src, int dst) const { return edges_.count({src, dst}) > 0; }

    std::vector<std::vector<int>> adjacency() const;

private:
    int n_ = 0;
    std::set<Edge> edges_;
};

/// Kahn order; ties broken by node index so the result is deterministic.
/// Throws ContractViolation when the edge set is cyclic.
std::vector<int> topological_order(int n, const std::set<Edge>& edges);
std::vector<int> topological_order(const CausalGraph& g);

/// Proper descendants of node i (i itself excluded).
std::set<int> descendants(const CausalGraph& g, int i);

/// Binarise a weighted adjacency: edge i->j iff |A[i][j]| > tau.
/// Throws CyclicAfterThreshold when the surviving support contains a cycle.
CausalGraph extract_graph(const Tensor& a, double tau);

// ---- exports ----------------------------------------------------------------

/// One "src -> dst" line per edge, in edge-set order.
std::string to_edge_list(const CausalGraph& g, const std::vector<std::string>& names);

std::string to_dot(const CausalGraph& g, const std::vector<std::string>& names);

/// CSV matrix with a header row of node names; row i column j = A[i][j].
std::string adjacency_csv(const Tensor& a, const std::vector<std::string>& names);

}  // namespace can
