#include "can/scm.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "can/errors.hpp"
#include "can/linsolve.hpp"

namespace can {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_square(const Tensor& a) {
    if (a.rows() != a.cols()) {
        throw ContractViolation("adjacency must be square, got " + a.shape_str());
    }
}

void check_mask(const Tensor& alpha, std::size_t n, const char* what) {
    if (alpha.rows() != 1 || alpha.cols() != n) {
        throw ContractViolation(std::string(what) + ": mask must be 1x" +
                                std::to_string(n) + ", got " + alpha.shape_str());
    }
    for (double v : alpha.raw()) {
        if (v != 0.0 && v != 1.0) {
            throw ContractViolation(std::string(what) + ": mask entries must be 0 or 1");
        }
    }
}

// I + beta * A o A, then the (n-1)-th additional power applied in place.
RowMat penalty_base(const Tensor& a, double beta) {
    const auto n = static_cast<Eigen::Index>(a.rows());
    Eigen::Map<const RowMat> ea(a.data(), n, n);
    RowMat b = (beta * ea.array().square()).matrix();
    b += RowMat::Identity(n, n);
    return b;
}

// K = I - diag(alpha) A^T.
Tensor masked_system(const Tensor& a, const Tensor& alpha) {
    const std::size_t n = a.rows();
    Tensor k = Tensor::identity(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ai = alpha.at(0, i);
        if (ai == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) k.at(i, j) -= ai * a.at(j, i);
        }
    }
    return k;
}

}  // namespace

WeightedAdjacency::WeightedAdjacency(Tensor m) : a(std::move(m)) {
    check_square(a);
    if (!a.all_finite()) {
        throw ContractViolation("adjacency contains non-finite weights");
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        if (a.at(i, i) != 0.0) {
            throw ContractViolation("adjacency diagonal must be zero");
        }
    }
}

CompiledIntervention compile_intervention(const InterventionSpec& spec, std::size_t n) {
    CompiledIntervention out{Tensor::full(1, n, 1.0), Tensor::zeros(1, n)};
    for (const auto& [node, value] : spec.assignments) {
        if (node < 0 || static_cast<std::size_t>(node) >= n) {
            throw ContractViolation("intervention on node " + std::to_string(node) +
                                    " out of range for n=" + std::to_string(n));
        }
        if (out.alpha.at(0, static_cast<std::size_t>(node)) == 0.0) {
            throw ContractViolation("node " + std::to_string(node) +
                                    " assigned more than once");
        }
        out.alpha.at(0, static_cast<std::size_t>(node)) = 0.0;
        out.c.at(0, static_cast<std::size_t>(node)) = value;
    }
    return out;
}

double acyclicity_penalty(const Tensor& a, double beta) {
    check_square(a);
    if (!(beta > 0.0)) throw ContractViolation("beta must be positive");
    const auto n = static_cast<Eigen::Index>(a.rows());
    if (n == 0) return 0.0;
    RowMat b = penalty_base(a, beta);
    RowMat p = b;
    for (Eigen::Index k = 1; k < n; ++k) p = p * b;
    return p.trace() - static_cast<double>(n);
}

Tensor acyclicity_gradient(const Tensor& a, double beta) {
    check_square(a);
    if (!(beta > 0.0)) throw ContractViolation("beta must be positive");
    const auto n = static_cast<Eigen::Index>(a.rows());
    Tensor out = Tensor::zeros(a.rows(), a.cols());
    if (n == 0) return out;
    RowMat b = penalty_base(a, beta);
    RowMat p = RowMat::Identity(n, n);
    for (Eigen::Index k = 1; k < n; ++k) p = p * b;  // B^(n-1)
    Eigen::Map<const RowMat> ea(a.data(), n, n);
    Eigen::Map<RowMat> eo(out.data(), n, n);
    eo = (2.0 * beta * static_cast<double>(n)) *
         (p.transpose().array() * ea.array()).matrix();
    return out;
}

diff::Var acyclicity_penalty_node(diff::Var a, double beta) {
    using namespace diff;
    const Tensor& av = a.value();
    check_square(av);
    if (!(beta > 0.0)) throw ContractViolation("beta must be positive");
    const std::size_t n = av.rows();
    Tape& tape = *a.tape;
    Var eye = tape.constant(Tensor::identity(n));
    Var b = add(eye, scale(mul(a, a), beta));
    Var p = b;
    for (std::size_t k = 1; k < n; ++k) p = matmul(p, b);
    // trace via a diagonal mask; sum of a masked product.
    Var tr = sum_all(mul(p, eye));
    return add_scalar(tr, -static_cast<double>(n));
}

Tensor scm_transform(const Tensor& a, const Tensor& z, const Tensor& alpha,
                     const Tensor& c) {
    check_square(a);
    const std::size_t n = a.rows();
    check_mask(alpha, n, "scm_transform");
    if (z.cols() != n) {
        throw ContractViolation("noise batch " + z.shape_str() +
                                " does not match n=" + std::to_string(n));
    }
    if (!(c.cols() == n && (c.rows() == 1 || c.rows() == z.rows()))) {
        throw ContractViolation("clamp values " + c.shape_str() +
                                " must be 1x" + std::to_string(n) + " or match the batch");
    }
    Tensor k = masked_system(a, alpha);
    Tensor u = Tensor::zeros(z.rows(), n);
    for (std::size_t r = 0; r < z.rows(); ++r) {
        const std::size_t cr = c.rows() == 1 ? 0 : r;
        for (std::size_t j = 0; j < n; ++j) {
            const double aj = alpha.at(0, j);
            u.at(r, j) = aj == 1.0 ? z.at(r, j) : c.at(cr, j);
        }
    }
    Tensor x = detail::solve_right_transposed(k, u);
    // Clamped coordinates are definitionally c_i; pin them even when the dense
    // fallback solved the system inexactly.
    for (std::size_t j = 0; j < n; ++j) {
        if (alpha.at(0, j) == 1.0) continue;
        for (std::size_t r = 0; r < z.rows(); ++r) {
            x.at(r, j) = c.at(c.rows() == 1 ? 0 : r, j);
        }
    }
    return x;
}

diff::Var scm_transform_node(diff::Var a, diff::Var z, const Tensor& alpha,
                             diff::Var c) {
    using namespace diff;
    const Tensor& av = a.value();
    check_square(av);
    const std::size_t n = av.rows();
    check_mask(alpha, n, "scm_transform");
    const std::size_t m = z.value().rows();
    if (z.value().cols() != n) {
        throw ContractViolation("noise batch " + z.value().shape_str() +
                                " does not match n=" + std::to_string(n));
    }
    Tape& tape = *a.tape;

    bool any_intervened = false;
    Tensor alpha_col = Tensor::zeros(n, 1);
    Tensor keep = Tensor::zeros(1, n);   // alpha as a row
    Tensor clamp = Tensor::zeros(1, n);  // 1 - alpha
    for (std::size_t i = 0; i < n; ++i) {
        alpha_col.at(i, 0) = alpha.at(0, i);
        keep.at(0, i) = alpha.at(0, i);
        clamp.at(0, i) = 1.0 - alpha.at(0, i);
        any_intervened = any_intervened || alpha.at(0, i) == 0.0;
    }

    if (!any_intervened) {
        Var k = sub(tape.constant(Tensor::identity(n)), transpose(a));
        return solve_right_t(k, z);
    }

    Var masked_rows = mul(transpose(a), broadcast_cols(tape.constant(alpha_col), n));
    Var k = sub(tape.constant(Tensor::identity(n)), masked_rows);

    Var keep_b = broadcast_rows(tape.constant(keep), m);
    Var clamp_b = broadcast_rows(tape.constant(clamp), m);
    Var c_batch = c.value().rows() == 1 ? broadcast_rows(c, m) : c;
    if (c_batch.value().rows() != m || c_batch.value().cols() != n) {
        throw ContractViolation("clamp values " + c.value().shape_str() +
                                " must be 1x" + std::to_string(n) + " or match the batch");
    }
    Var u = add(mul(z, keep_b), mul(c_batch, clamp_b));
    Var x = solve_right_t(k, u);
    // Pin clamped coordinates to c exactly (the solve already made them c up
    // to round-off; this removes the round-off and routes their gradient to c).
    return add(mul(x, keep_b), mul(c_batch, clamp_b));
}

diff::Var scm_transform_node(diff::Var a, diff::Var z, const Tensor& alpha,
                             const Tensor& c) {
    return scm_transform_node(a, z, alpha, a.tape->constant(c));
}

}  // namespace can
