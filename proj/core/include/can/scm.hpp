#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "can/graph.hpp"
#include "can/tape.hpp"
#include "can/tensor.hpp"

namespace can {

/// Weighted adjacency of a linear structural model: A[i][j] is the weight of
/// edge i -> j in X = A^T X + Z. Diagonal must be identically zero and all
/// entries finite.
struct WeightedAdjacency {
    Tensor a;

    explicit WeightedAdjacency(Tensor m);
    std::size_t n() const { return a.rows(); }
};

/// do()-style assignments: node index -> clamped value, one per node at most.
struct InterventionSpec {
    std::vector<std::pair<int, double>> assignments;
};

/// Mask/value pair driving the masked transform. alpha_i = 1 leaves node i
/// observational; alpha_i = 0 severs its incoming edges and clamps it to c_i.
/// NOTE: the source text describing this mechanism contradicts its own
/// formula about which value of alpha marks an intervention; this library
/// follows the formula: 1 = observational, 0 = intervened.
struct CompiledIntervention {
    Tensor alpha;  // 1 x n in {0,1}
    Tensor c;      // 1 x n
};

CompiledIntervention compile_intervention(const InterventionSpec& spec, std::size_t n);

/// tr[(I + beta * A o A)^n] - n: zero (to 1e-9) exactly when the support of A
/// is acyclic, positive otherwise.
double acyclicity_penalty(const Tensor& a, double beta);
inline double acyclicity_penalty(const WeightedAdjacency& wa, double beta) {
    return acyclicity_penalty(wa.a, beta);
}

/// Closed form 2 * beta * n * [(I + beta * A o A)^(n-1)]^T o A.
Tensor acyclicity_gradient(const Tensor& a, double beta);
inline Tensor acyclicity_gradient(const WeightedAdjacency& wa, double beta) {
    return acyclicity_gradient(wa.a, beta);
}

/// Same penalty as a differentiable tape node (used inside the generator loss).
diff::Var acyclicity_penalty_node(diff::Var a, double beta);

/// Masked linear-model transform: solves (I - diag(alpha) A^T) x = u row-wise
/// for u = alpha o z + (1 - alpha) o c. Intervened coordinates come out as
/// exactly c_i; on an acyclic support the solve is a topological substitution,
/// so coordinates outside descendants(i) u {i} are bit-identical across
/// different clamped values.
Tensor scm_transform(const Tensor& a, const Tensor& z, const Tensor& alpha,
                     const Tensor& c);

/// Differentiable version; c may be 1 x n (shared) or batch-sized m x n.
diff::Var scm_transform_node(diff::Var a, diff::Var z, const Tensor& alpha,
                             diff::Var c);
diff::Var scm_transform_node(diff::Var a, diff::Var z, const Tensor& alpha,
                             const Tensor& c);

}  // namespace can
