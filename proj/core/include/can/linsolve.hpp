#pragma once

#include "can/tensor.hpp"

namespace can::detail {

/// Solves X * K = U for X, with K square (n x n) and U batched (m x n).
///
/// When the off-diagonal support of K admits a topological order (the SCM
/// case: K = I - alpha (.) A^T with acyclic masked support), the solve runs
/// as sequential substitution in that order. Coordinates then depend only on
/// their ancestors in the support graph, so values outside an intervened
/// node's cone of influence are bit-for-bit unaffected by it. Otherwise a
/// dense LU with partial pivoting is used; a 1-norm condition estimate guards
/// against (near-)singular systems and raises SingularSystem.
Tensor solve_right(const Tensor& k, const Tensor& u);

/// Solves X * K^T = U for X. Same path selection as solve_right.
Tensor solve_right_transposed(const Tensor& k, const Tensor& u);

}  // namespace can::detail
