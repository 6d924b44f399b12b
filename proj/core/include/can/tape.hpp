#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "can/tensor.hpp"

namespace can::diff {

class Tape;

/// Lightweight handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    std::int32_t id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    double item() const { return value().item(); }
};

enum class Op : std::uint8_t {
    kLeaf,
    kConstant,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kNeg,
    kScale,
    kAddScalar,
    kMatMul,
    kTranspose,
    kRelu,
    kLeakyRelu,
    kTanh,
    kExp,
    kSigmoid,
    kSoftplus,
    kPowSafe,
    kRowSum,
    kColSum,
    kSumAll,
    kBroadcastCols,
    kBroadcastRows,
    kBroadcastAll,
    kSliceCols,
    kConcatCols,
    kSolveRight,
    kSolveRightT,
};

struct Node {
    Op op = Op::kConstant;
    bool requires_grad = false;
    double p0 = 0.0;           // scale factor / slope / exponent / added scalar
    bool trans_a = false;      // matmul flags
    bool trans_b = false;
    std::size_t s0 = 0;        // slice bounds, broadcast extents
    std::size_t s1 = 0;
    std::vector<std::int32_t> inputs;
    Tensor value;
};

/// Define-by-run reverse-mode differentiation over an append-only node arena.
///
/// Every operation evaluates eagerly and records a node. gradients() builds
/// the adjoint pass out of the same primitive operations, so the result is
/// itself differentiable: calling gradients() on a function of a gradient
/// yields exact second-order derivatives. This is what the gradient-penalty
/// term relies on.
///
/// A tape has a single writer. Parameters live outside the tape (see
/// ParameterStore) and are bound as leaves per step; clear() drops all nodes.
class Tape {
public:
    Var leaf(Tensor value);
    Var constant(Tensor value);

    const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
    const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    /// Gradients of a scalar loss w.r.t. each listed var, as new tape nodes.
    /// Vars the loss does not depend on yield zero tensors of matching shape.
    /// Throws ContractViolation if the loss is not scalar.
    std::vector<Var> gradients(Var loss, std::span<const Var> wrt);

    Var emit(Node n);

private:
    void backprop_node(std::int32_t id, Var upstream, std::vector<Var>& adjoint);
    static void accumulate(std::vector<Var>& adjoint, std::int32_t id, Var grad);

    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

// ---- primitive operations ------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
Var transpose(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var tanh_v(Var a);
Var exp_v(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
/// x^p for x > 0, exactly 0 (with zero derivative of every order) for x <= 0.
Var pow_safe(Var a, double p);
Var row_sum(Var a);
Var col_sum(Var a);
Var sum_all(Var a);
Var broadcast_cols(Var a, std::size_t cols);
Var broadcast_rows(Var a, std::size_t rows);
Var broadcast_all(Var a, std::size_t rows, std::size_t cols);
Var slice_cols(Var a, std::size_t c0, std::size_t c1);
Var concat_cols(std::span<const Var> parts);
/// X with X K = U.
Var solve_right(Var k, Var u);
/// X with X K^T = U.
Var solve_right_t(Var k, Var u);

// ---- composites ------------------------------------------------------------

/// Copy of the value with the gradient path cut.
Var detach(Var a);
Var square(Var a);
Var mean_all(Var a);
/// Numerically stable row softmax (shift by detached row max).
Var softmax_rows(Var a);
/// Per-row Euclidean norm, subgradient 0 at the origin.
Var l2norm_rows(Var a);

}  // namespace can::diff
