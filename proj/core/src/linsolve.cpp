#include "can/linsolve.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "can/errors.hpp"

namespace can::detail {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SubstitutionPlan {
    // Unknowns in dependency order; deps[j] lists (i, coefficient) pairs with
    // i ascending, so each x_j is an identical float expression no matter
    // which other rows of the system change.
    std::vector<std::size_t> order;
    std::vector<std::vector<std::pair<std::size_t, double>>> deps;
    std::vector<double> diag;
};

// coeff(j, i): weight of x_i in the equation that determines x_j.
//   X K   = U  ->  sum_i x_i K(i,j) = u_j  ->  coeff(j,i) = K(i,j)
//   X K^T = U  ->  sum_i x_i K(j,i) = u_j  ->  coeff(j,i) = K(j,i)
std::optional<SubstitutionPlan> plan_substitution(const Tensor& k, bool transposed) {
    const std::size_t n = k.rows();
    SubstitutionPlan plan;
    plan.deps.resize(n);
    plan.diag.resize(n);
    std::vector<std::vector<std::size_t>> dependents(n);
    std::vector<std::size_t> pending(n, 0);

    for (std::size_t j = 0; j < n; ++j) {
        plan.diag[j] = k.at(j, j);
        if (plan.diag[j] == 0.0) return std::nullopt;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j) continue;
            const double c = transposed ? k.at(j, i) : k.at(i, j);
            if (c != 0.0) {
                plan.deps[j].emplace_back(i, c);
                dependents[i].push_back(j);
                ++pending[j];
            }
        }
    }

    std::vector<std::size_t> ready;
    for (std::size_t j = 0; j < n; ++j) {
        if (pending[j] == 0) ready.push_back(j);
    }
    plan.order.reserve(n);
    for (std::size_t head = 0; head < ready.size(); ++head) {
        const std::size_t j = ready[head];
        plan.order.push_back(j);
        for (std::size_t d : dependents[j]) {
            if (--pending[d] == 0) ready.push_back(d);
        }
    }
    if (plan.order.size() != n) return std::nullopt;  // cyclic support
    return plan;
}

Tensor solve_by_substitution(const SubstitutionPlan& plan, const Tensor& u) {
    Tensor x = Tensor::zeros(u.rows(), u.cols());
    for (std::size_t r = 0; r < u.rows(); ++r) {
        for (std::size_t j : plan.order) {
            double acc = 0.0;
            for (const auto& [i, c] : plan.deps[j]) acc += c * x.at(r, i);
            x.at(r, j) = (u.at(r, j) - acc) / plan.diag[j];
        }
    }
    return x;
}

Tensor solve_by_lu(const Tensor& k, const Tensor& u, bool transposed) {
    const auto n = static_cast<Eigen::Index>(k.rows());
    Eigen::Map<const RowMat> ek(k.data(), n, n);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(ek);
    const double rcond = lu.rcond();
    if (!std::isfinite(rcond) || rcond < 1e-12) {
        const double cond = rcond > 0.0 ? 1.0 / rcond
                                        : std::numeric_limits<double>::infinity();
        throw SingularSystem("masked system is numerically singular", cond);
    }
    // X K = U is K^T X^T = U^T; X K^T = U is K X^T = U^T.
    Eigen::Map<const RowMat> eu(u.data(), static_cast<Eigen::Index>(u.rows()),
                                static_cast<Eigen::Index>(u.cols()));
    Tensor x = Tensor::zeros(u.rows(), u.cols());
    Eigen::Map<RowMat> ex(x.data(), static_cast<Eigen::Index>(u.rows()),
                          static_cast<Eigen::Index>(u.cols()));
    Eigen::MatrixXd xt;
    if (transposed) {
        xt = lu.solve(eu.transpose());
    } else {
        xt = lu.transpose().solve(eu.transpose());
    }
    ex = xt.transpose();
    return x;
}

Tensor solve_dispatch(const Tensor& k, const Tensor& u, bool transposed) {
    if (k.rows() != k.cols()) {
        throw ContractViolation("solve: coefficient matrix must be square, got " +
                                k.shape_str());
    }
    if (u.cols() != k.rows()) {
        throw ContractViolation("solve: right-hand side " + u.shape_str() +
                                " does not match system size " + k.shape_str());
    }
    if (auto plan = plan_substitution(k, transposed)) {
        return solve_by_substitution(*plan, u);
    }
    return solve_by_lu(k, u, transposed);
}

}  // namespace

Tensor solve_right(const Tensor& k, const Tensor& u) {
    return solve_dispatch(k, u, /*transposed=*/false);
}

Tensor solve_right_transposed(const Tensor& k, const Tensor& u) {
    return solve_dispatch(k, u, /*transposed=*/true);
}

}  // namespace can::detail
