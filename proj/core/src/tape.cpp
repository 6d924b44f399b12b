#include "can/tape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "can/errors.hpp"
#include "can/linsolve.hpp"

namespace can::diff {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

ConstMapMat as_eigen(const Tensor& t) {
    return ConstMapMat(t.data(), static_cast<Eigen::Index>(t.rows()),
                       static_cast<Eigen::Index>(t.cols()));
}

MapMat as_eigen(Tensor& t) {
    return MapMat(t.data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

Tape* same_tape(Var a, Var b) {
    if (!a.valid() || !b.valid() || a.tape != b.tape) {
        throw ContractViolation("operands must live on the same tape");
    }
    return a.tape;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ContractViolation(std::string(what) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
    }
}

Tensor map_unary(const Tensor& a, double (*fn)(double)) {
    Tensor out = a;
    for (double& v : out.raw()) v = fn(v);
    return out;
}

Tensor zip_binary(const Tensor& a, const Tensor& b, double (*fn)(double, double)) {
    Tensor out = a;
    const DoubleVec& bv = b.raw();
    DoubleVec& ov = out.raw();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = fn(ov[i], bv[i]);
    return out;
}

bool any_requires_grad(const Tape& tape, const std::vector<std::int32_t>& ids) {
    for (std::int32_t id : ids) {
        if (tape.node(id).requires_grad) return true;
    }
    return false;
}

Node make_node(Op op, std::vector<std::int32_t> inputs, Tensor value) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    return n;
}

double sigmoid_scalar(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_scalar(double x) {
    // log(1 + e^x) without overflow for large |x|.
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

Var Tape::emit(Node n) {
    n.requires_grad = n.op == Op::kLeaf ||
                      (n.op != Op::kConstant && any_requires_grad(*this, n.inputs));
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Tensor value) {
    return emit(make_node(Op::kLeaf, {}, std::move(value)));
}

Var Tape::constant(Tensor value) {
    return emit(make_node(Op::kConstant, {}, std::move(value)));
}

// ---- primitive forward definitions -----------------------------------------

Var add(Var a, Var b) {
    Tape* t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "add");
    return t->emit(make_node(Op::kAdd, {a.id, b.id},
                             zip_binary(a.value(), b.value(),
                                        +[](double x, double y) { return x + y; })));
}

Var sub(Var a, Var b) {
    Tape* t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "sub");
    return t->emit(make_node(Op::kSub, {a.id, b.id},
                             zip_binary(a.value(), b.value(),
                                        +[](double x, double y) { return x - y; })));
}

Var mul(Var a, Var b) {
    Tape* t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "mul");
    return t->emit(make_node(Op::kMul, {a.id, b.id},
                             zip_binary(a.value(), b.value(),
                                        +[](double x, double y) { return x * y; })));
}

Var div(Var a, Var b) {
    Tape* t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "div");
    return t->emit(make_node(Op::kDiv, {a.id, b.id},
                             zip_binary(a.value(), b.value(),
                                        +[](double x, double y) { return x / y; })));
}

Var neg(Var a) {
    return a.tape->emit(make_node(Op::kNeg, {a.id},
                                  map_unary(a.value(), +[](double x) { return -x; })));
}

Var scale(Var a, double c) {
    Tensor out = a.value();
    for (double& v : out.raw()) v *= c;
    Node n = make_node(Op::kScale, {a.id}, std::move(out));
    n.p0 = c;
    return a.tape->emit(std::move(n));
}

Var add_scalar(Var a, double c) {
    Tensor out = a.value();
    for (double& v : out.raw()) v += c;
    Node n = make_node(Op::kAddScalar, {a.id}, std::move(out));
    n.p0 = c;
    return a.tape->emit(std::move(n));
}

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
    Tape* t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t m = trans_a ? av.cols() : av.rows();
    const std::size_t k = trans_a ? av.rows() : av.cols();
    const std::size_t kb = trans_b ? bv.cols() : bv.rows();
    const std::size_t n = trans_b ? bv.rows() : bv.cols();
    if (k != kb) {
        throw ContractViolation("matmul: inner dimension mismatch " + av.shape_str() +
                                (trans_a ? "^T" : "") + " x " + bv.shape_str() +
                                (trans_b ? "^T" : ""));
    }
    Tensor out = Tensor::zeros(m, n);
    auto ea = as_eigen(av);
    auto eb = as_eigen(bv);
    auto eo = as_eigen(out);
    if (!trans_a && !trans_b) {
        eo.noalias() = ea * eb;
    } else if (trans_a && !trans_b) {
        eo.noalias() = ea.transpose() * eb;
    } else if (!trans_a && trans_b) {
        eo.noalias() = ea * eb.transpose();
    } else {
        eo.noalias() = ea.transpose() * eb.transpose();
    }
    Node node = make_node(Op::kMatMul, {a.id, b.id}, std::move(out));
    node.trans_a = trans_a;
    node.trans_b = trans_b;
    return t->emit(std::move(node));
}

Var transpose(Var a) {
    const Tensor& av = a.value();
    Tensor out = Tensor::zeros(av.cols(), av.rows());
    as_eigen(out) = as_eigen(av).transpose();
    return a.tape->emit(make_node(Op::kTranspose, {a.id}, std::move(out)));
}

Var relu(Var a) {
    return a.tape->emit(make_node(
        Op::kRelu, {a.id},
        map_unary(a.value(), +[](double x) { return x > 0.0 ? x : 0.0; })));
}

Var leaky_relu(Var a, double slope) {
    Tensor out = a.value();
    for (double& v : out.raw()) v = v > 0.0 ? v : slope * v;
    Node n = make_node(Op::kLeakyRelu, {a.id}, std::move(out));
    n.p0 = slope;
    return a.tape->emit(std::move(n));
}

Var tanh_v(Var a) {
    return a.tape->emit(make_node(Op::kTanh, {a.id},
                                  map_unary(a.value(), +[](double x) { return std::tanh(x); })));
}

Var exp_v(Var a) {
    return a.tape->emit(make_node(Op::kExp, {a.id},
                                  map_unary(a.value(), +[](double x) { return std::exp(x); })));
}

Var sigmoid(Var a) {
    return a.tape->emit(
        make_node(Op::kSigmoid, {a.id}, map_unary(a.value(), &sigmoid_scalar)));
}

Var softplus(Var a) {
    return a.tape->emit(
        make_node(Op::kSoftplus, {a.id}, map_unary(a.value(), &softplus_scalar)));
}

Var pow_safe(Var a, double p) {
    Tensor out = a.value();
    for (double& v : out.raw()) v = v > 0.0 ? std::pow(v, p) : 0.0;
    Node n = make_node(Op::kPowSafe, {a.id}, std::move(out));
    n.p0 = p;
    return a.tape->emit(std::move(n));
}

Var row_sum(Var a) {
    const Tensor& av = a.value();
    Tensor out = Tensor::zeros(av.rows(), 1);
    as_eigen(out) = as_eigen(av).rowwise().sum();
    return a.tape->emit(make_node(Op::kRowSum, {a.id}, std::move(out)));
}

Var col_sum(Var a) {
    const Tensor& av = a.value();
    Tensor out = Tensor::zeros(1, av.cols());
    as_eigen(out) = as_eigen(av).colwise().sum();
    return a.tape->emit(make_node(Op::kColSum, {a.id}, std::move(out)));
}

Var sum_all(Var a) {
    const Tensor& av = a.value();
    double s = 0.0;
    for (double v : av.raw()) s += v;
    return a.tape->emit(make_node(Op::kSumAll, {a.id}, Tensor::scalar(s)));
}

Var broadcast_cols(Var a, std::size_t cols) {
    const Tensor& av = a.value();
    if (av.cols() != 1) {
        throw ContractViolation("broadcast_cols: expected a column, got " + av.shape_str());
    }
    Tensor out = Tensor::zeros(av.rows(), cols);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = av.at(r, 0);
    }
    Node n = make_node(Op::kBroadcastCols, {a.id}, std::move(out));
    n.s0 = cols;
    return a.tape->emit(std::move(n));
}

Var broadcast_rows(Var a, std::size_t rows) {
    const Tensor& av = a.value();
    if (av.rows() != 1) {
        throw ContractViolation("broadcast_rows: expected a row, got " + av.shape_str());
    }
    Tensor out = Tensor::zeros(rows, av.cols());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < av.cols(); ++c) out.at(r, c) = av.at(0, c);
    }
    Node n = make_node(Op::kBroadcastRows, {a.id}, std::move(out));
    n.s0 = rows;
    return a.tape->emit(std::move(n));
}

Var broadcast_all(Var a, std::size_t rows, std::size_t cols) {
    const double v = a.value().item();
    Node n = make_node(Op::kBroadcastAll, {a.id}, Tensor::full(rows, cols, v));
    n.s0 = rows;
    n.s1 = cols;
    return a.tape->emit(std::move(n));
}

Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Tensor& av = a.value();
    if (c0 > c1 || c1 > av.cols()) {
        throw ContractViolation("slice_cols: bounds [" + std::to_string(c0) + "," +
                                std::to_string(c1) + ") out of range for " + av.shape_str());
    }
    Tensor out = Tensor::zeros(av.rows(), c1 - c0);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        for (std::size_t c = c0; c < c1; ++c) out.at(r, c - c0) = av.at(r, c);
    }
    Node n = make_node(Op::kSliceCols, {a.id}, std::move(out));
    n.s0 = c0;
    n.s1 = c1;
    return a.tape->emit(std::move(n));
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) {
        throw ContractViolation("concat_cols: nothing to concatenate");
    }
    Tape* t = parts[0].tape;
    std::size_t rows = parts[0].value().rows();
    std::size_t cols = 0;
    std::vector<std::int32_t> ids;
    ids.reserve(parts.size());
    for (Var p : parts) {
        same_tape(parts[0], p);
        if (p.value().rows() != rows) {
            throw ContractViolation("concat_cols: row count mismatch " +
                                    parts[0].value().shape_str() + " vs " +
                                    p.value().shape_str());
        }
        cols += p.value().cols();
        ids.push_back(p.id);
    }
    Tensor out = Tensor::zeros(rows, cols);
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& pv = p.value();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < pv.cols(); ++c) out.at(r, off + c) = pv.at(r, c);
        }
        off += pv.cols();
    }
    return t->emit(make_node(Op::kConcatCols, std::move(ids), std::move(out)));
}

Var solve_right(Var k, Var u) {
    Tape* t = same_tape(k, u);
    return t->emit(make_node(Op::kSolveRight, {k.id, u.id},
                             detail::solve_right(k.value(), u.value())));
}

Var solve_right_t(Var k, Var u) {
    Tape* t = same_tape(k, u);
    return t->emit(make_node(Op::kSolveRightT, {k.id, u.id},
                             detail::solve_right_transposed(k.value(), u.value())));
}

// ---- reverse pass -----------------------------------------------------------

void Tape::accumulate(std::vector<Var>& adjoint, std::int32_t id, Var grad) {
    Var& slot = adjoint[static_cast<std::size_t>(id)];
    slot = slot.valid() ? add(slot, grad) : grad;
}

void Tape::backprop_node(std::int32_t id, Var g, std::vector<Var>& adjoint) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    Var out{this, id};
    auto wants = [&](std::size_t input_index) {
        return nodes_[static_cast<std::size_t>(n.inputs[input_index])].requires_grad;
    };
    auto input = [&](std::size_t input_index) {
        return Var{this, n.inputs[input_index]};
    };

    switch (n.op) {
        case Op::kLeaf:
        case Op::kConstant:
            break;
        case Op::kAdd:
            if (wants(0)) accumulate(adjoint, n.inputs[0], g);
            if (wants(1)) accumulate(adjoint, n.inputs[1], g);
            break;
        case Op::kSub:
            if (wants(0)) accumulate(adjoint, n.inputs[0], g);
            if (wants(1)) accumulate(adjoint, n.inputs[1], neg(g));
            break;
        case Op::kMul:
            if (wants(0)) accumulate(adjoint, n.inputs[0], mul(g, input(1)));
            if (wants(1)) accumulate(adjoint, n.inputs[1], mul(g, input(0)));
            break;
        case Op::kDiv:
            if (wants(0)) accumulate(adjoint, n.inputs[0], div(g, input(1)));
            if (wants(1)) {
                // d(a/b)/db = -a / b^2 = -(a/b) / b
                accumulate(adjoint, n.inputs[1], neg(div(mul(g, out), input(1))));
            }
            break;
        case Op::kNeg:
            if (wants(0)) accumulate(adjoint, n.inputs[0], neg(g));
            break;
        case Op::kScale:
            if (wants(0)) accumulate(adjoint, n.inputs[0], scale(g, n.p0));
            break;
        case Op::kAddScalar:
            if (wants(0)) accumulate(adjoint, n.inputs[0], g);
            break;
        case Op::kMatMul: {
            Var a = input(0);
            Var b = input(1);
            if (wants(0)) {
                Var ga = n.trans_a ? matmul(b, g, n.trans_b, true)
                                   : matmul(g, b, false, !n.trans_b);
                accumulate(adjoint, n.inputs[0], ga);
            }
            if (wants(1)) {
                Var gb = n.trans_b ? matmul(g, a, true, n.trans_a)
                                   : matmul(a, g, !n.trans_a, false);
                accumulate(adjoint, n.inputs[1], gb);
            }
            break;
        }
        case Op::kTranspose:
            if (wants(0)) accumulate(adjoint, n.inputs[0], transpose(g));
            break;
        case Op::kRelu:
        case Op::kLeakyRelu: {
            if (!wants(0)) break;
            // The activation is piecewise linear, so the local slope pattern is
            // locally constant in the input and enters the graph as a constant.
            const Tensor& x = input(0).value();
            Tensor mask = x;
            const double lo = n.op == Op::kRelu ? 0.0 : n.p0;
            for (double& v : mask.raw()) v = v > 0.0 ? 1.0 : lo;
            accumulate(adjoint, n.inputs[0], mul(g, constant(std::move(mask))));
            break;
        }
        case Op::kTanh:
            if (wants(0)) {
                accumulate(adjoint, n.inputs[0],
                           mul(g, add_scalar(neg(mul(out, out)), 1.0)));
            }
            break;
        case Op::kExp:
            if (wants(0)) accumulate(adjoint, n.inputs[0], mul(g, out));
            break;
        case Op::kSigmoid:
            if (wants(0)) {
                accumulate(adjoint, n.inputs[0],
                           mul(g, mul(out, add_scalar(neg(out), 1.0))));
            }
            break;
        case Op::kSoftplus:
            if (wants(0)) accumulate(adjoint, n.inputs[0], mul(g, sigmoid(input(0))));
            break;
        case Op::kPowSafe:
            if (wants(0)) {
                accumulate(adjoint, n.inputs[0],
                           mul(g, scale(pow_safe(input(0), n.p0 - 1.0), n.p0)));
            }
            break;
        case Op::kRowSum:
            if (wants(0)) {
                accumulate(adjoint, n.inputs[0], broadcast_cols(g, input(0).value().cols()));
            }
            break;
        case Op::kColSum:
            if (wants(0)) {
                accumulate(adjoint, n.inputs[0], broadcast_rows(g, input(0).value().rows()));
            }
            break;
        case Op::kSumAll:
            if (wants(0)) {
                const Tensor& x = input(0).value();
                accumulate(adjoint, n.inputs[0], broadcast_all(g, x.rows(), x.cols()));
            }
            break;
        case Op::kBroadcastCols:
            if (wants(0)) accumulate(adjoint, n.inputs[0], row_sum(g));
            break;
        case Op::kBroadcastRows:
            if (wants(0)) accumulate(adjoint, n.inputs[0], col_sum(g));
            break;
        case Op::kBroadcastAll:
            if (wants(0)) accumulate(adjoint, n.inputs[0], sum_all(g));
            break;
        case Op::kSliceCols: {
            if (!wants(0)) break;
            const Tensor& x = input(0).value();
            std::vector<Var> parts;
            if (n.s0 > 0) parts.push_back(constant(Tensor::zeros(x.rows(), n.s0)));
            parts.push_back(g);
            if (n.s1 < x.cols()) {
                parts.push_back(constant(Tensor::zeros(x.rows(), x.cols() - n.s1)));
            }
            accumulate(adjoint, n.inputs[0],
                       parts.size() == 1 ? parts[0] : concat_cols(parts));
            break;
        }
        case Op::kConcatCols: {
            std::size_t off = 0;
            for (std::size_t i = 0; i < n.inputs.size(); ++i) {
                const std::size_t w = input(i).value().cols();
                if (wants(i)) {
                    accumulate(adjoint, n.inputs[i], slice_cols(g, off, off + w));
                }
                off += w;
            }
            break;
        }
        case Op::kSolveRight: {
            // X K = U.  dX = (dU - X dK) K^{-1}
            Var k = input(0);
            Var gu = solve_right_t(k, g);
            if (wants(1)) accumulate(adjoint, n.inputs[1], gu);
            if (wants(0)) accumulate(adjoint, n.inputs[0], neg(matmul(out, gu, true, false)));
            break;
        }
        case Op::kSolveRightT: {
            // X K^T = U.  dX = (dU - X dK^T) K^{-T}
            Var k = input(0);
            Var gu = solve_right(k, g);
            if (wants(1)) accumulate(adjoint, n.inputs[1], gu);
            if (wants(0)) accumulate(adjoint, n.inputs[0], neg(matmul(gu, out, true, false)));
            break;
        }
    }
}

std::vector<Var> Tape::gradients(Var loss, std::span<const Var> wrt) {
    if (!loss.valid() || loss.tape != this) {
        throw ContractViolation("gradients: loss is not on this tape");
    }
    const Tensor& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ContractViolation("gradients: loss must be scalar, got " + lv.shape_str());
    }
    std::vector<Var> adjoint(static_cast<std::size_t>(loss.id) + 1);
    adjoint[static_cast<std::size_t>(loss.id)] = constant(Tensor::scalar(1.0));

    for (std::int32_t id = loss.id; id >= 0; --id) {
        Var g = adjoint[static_cast<std::size_t>(id)];
        if (!g.valid()) continue;
        if (!nodes_[static_cast<std::size_t>(id)].requires_grad) continue;
        backprop_node(id, g, adjoint);
    }

    std::vector<Var> out;
    out.reserve(wrt.size());
    for (Var v : wrt) {
        if (!v.valid() || v.tape != this) {
            throw ContractViolation("gradients: target is not on this tape");
        }
        Var g = v.id <= loss.id ? adjoint[static_cast<std::size_t>(v.id)] : Var{};
        if (!g.valid()) {
            const Tensor& x = value(v);
            g = constant(Tensor::zeros(x.rows(), x.cols()));
        }
        out.push_back(g);
    }
    return out;
}

// ---- composites --------------------------------------------------------------

Var detach(Var a) { return a.tape->constant(a.value()); }

Var square(Var a) { return mul(a, a); }

Var mean_all(Var a) {
    const Tensor& v = a.value();
    return scale(sum_all(a), 1.0 / static_cast<double>(v.rows() * v.cols()));
}

Var softmax_rows(Var a) {
    const Tensor& v = a.value();
    Tensor mx = Tensor::zeros(v.rows(), 1);
    for (std::size_t r = 0; r < v.rows(); ++r) {
        double m = v.at(r, 0);
        for (std::size_t c = 1; c < v.cols(); ++c) m = std::max(m, v.at(r, c));
        mx.at(r, 0) = m;
    }
    // Shift by the (constant) row max: softmax is shift-invariant, so the
    // derivative is untouched while exp() stays in range.
    Var shifted = sub(a, broadcast_cols(a.tape->constant(std::move(mx)), v.cols()));
    Var e = exp_v(shifted);
    return div(e, broadcast_cols(row_sum(e), v.cols()));
}

Var l2norm_rows(Var a) { return pow_safe(row_sum(square(a)), 0.5); }

}  // namespace can::diff
