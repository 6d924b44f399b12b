#include "can/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "can/errors.hpp"

namespace can {

namespace {

void check_nodes(int n, const std::set<Edge>& edges) {
    for (const auto& [src, dst] : edges) {
        if (src < 0 || dst < 0 || src >= n || dst >= n) {
            throw ContractViolation("edge (" + std::to_string(src) + "," +
                                    std::to_string(dst) + ") out of range for n=" +
                                    std::to_string(n));
        }
        if (src == dst) {
            throw ContractViolation("self-loop on node " + std::to_string(src));
        }
    }
}

std::vector<std::string> default_names(int n, const std::vector<std::string>& names) {
    if (!names.empty()) {
        if (static_cast<int>(names.size()) != n) {
            throw ContractViolation("expected " + std::to_string(n) + " node names, got " +
                                    std::to_string(names.size()));
        }
        return names;
    }
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back("x" + std::to_string(i));
    return out;
}

}  // namespace

std::vector<int> topological_order(int n, const std::set<Edge>& edges) {
    check_nodes(n, edges);
    std::vector<std::vector<int>> out_edges(static_cast<std::size_t>(n));
    std::vector<int> indeg(static_cast<std::size_t>(n), 0);
    for (const auto& [src, dst] : edges) {
        out_edges[static_cast<std::size_t>(src)].push_back(dst);
        ++indeg[static_cast<std::size_t>(dst)];
    }
    // Smallest-index-first Kahn: a deterministic order regardless of set layout.
    std::set<int> ready;
    for (int v = 0; v < n; ++v) {
        if (indeg[static_cast<std::size_t>(v)] == 0) ready.insert(v);
    }
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n));
    while (!ready.empty()) {
        const int v = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(v);
        for (int w : out_edges[static_cast<std::size_t>(v)]) {
            if (--indeg[static_cast<std::size_t>(w)] == 0) ready.insert(w);
        }
    }
    if (static_cast<int>(order.size()) != n) {
        throw ContractViolation("graph contains a directed cycle");
    }
    return order;
}

bool is_dag(int n, const std::set<Edge>& edges) {
    try {
        topological_order(n, edges);
        return true;
    } catch (const ContractViolation&) {
        return false;
    }
}

CausalGraph::CausalGraph(int n, std::set<Edge> edges) : n_(n), edges_(std::move(edges)) {
    if (n_ < 0) throw ContractViolation("negative node count");
    topological_order(n_, edges_);  // validates range, self-loops, acyclicity
}

std::vector<std::vector<int>> CausalGraph::adjacency() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_));
    for (const auto& [src, dst] : edges_) adj[static_cast<std::size_t>(src)].push_back(dst);
    return adj;
}

std::vector<int> topological_order(const CausalGraph& g) {
    return topological_order(g.n(), g.edges());
}

std::set<int> descendants(const CausalGraph& g, int i) {
    if (i < 0 || i >= g.n()) {
        throw ContractViolation("node " + std::to_string(i) + " out of range");
    }
    const auto adj = g.adjacency();
    std::set<int> seen;
    std::vector<int> stack = {i};
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : adj[static_cast<std::size_t>(v)]) {
            if (seen.insert(w).second) stack.push_back(w);
        }
    }
    return seen;
}

CausalGraph extract_graph(const Tensor& a, double tau) {
    if (a.rows() != a.cols()) {
        throw ContractViolation("adjacency must be square, got " + a.shape_str());
    }
    if (!(tau > 0.0)) {
        throw ContractViolation("threshold must be positive");
    }
    const int n = static_cast<int>(a.rows());
    std::set<Edge> edges;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i != j && std::abs(a.at(static_cast<std::size_t>(i),
                                        static_cast<std::size_t>(j))) > tau) {
                edges.insert({i, j});
            }
        }
    }
    if (!is_dag(n, edges)) {
        throw CyclicAfterThreshold("threshold " + std::to_string(tau) +
                                   " leaves a directed cycle");
    }
    return CausalGraph(n, std::move(edges));
}

std::string to_edge_list(const CausalGraph& g, const std::vector<std::string>& names) {
    const auto labels = default_names(g.n(), names);
    std::ostringstream out;
    for (const auto& [src, dst] : g.edges()) {
        out << labels[static_cast<std::size_t>(src)] << " -> "
            << labels[static_cast<std::size_t>(dst)] << "\n";
    }
    return out.str();
}

std::string to_dot(const CausalGraph& g, const std::vector<std::string>& names) {
    const auto labels = default_names(g.n(), names);
    std::ostringstream out;
    out << "digraph causal {\n";
    for (int v = 0; v < g.n(); ++v) {
        out << "  \"" << labels[static_cast<std::size_t>(v)] << "\";\n";
    }
    for (const auto& [src, dst] : g.edges()) {
        out << "  \"" << labels[static_cast<std::size_t>(src)] << "\" -> \""
            << labels[static_cast<std::size_t>(dst)] << "\";\n";
    }
    out << "}\n";
    return out.str();
}

std::string adjacency_csv(const Tensor& a, const std::vector<std::string>& names) {
    if (a.rows() != a.cols()) {
        throw ContractViolation("adjacency must be square, got " + a.shape_str());
    }
    const auto labels = default_names(static_cast<int>(a.rows()), names);
    std::ostringstream out;
    out.precision(17);
    for (std::size_t j = 0; j < labels.size(); ++j) {
        out << labels[j] << (j + 1 < labels.size() ? "," : "\n");
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out << a.at(i, j) << (j + 1 < a.cols() ? "," : "\n");
        }
    }
    return out.str();
}

}  // namespace can
