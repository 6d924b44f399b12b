#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace can {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Data does not match the declared schema (widths, names, cardinalities).
struct SchemaMismatch : Error {
    using Error::Error;
};

/// A documented precondition was violated by the caller.
struct ContractViolation : Error {
    using Error::Error;
};

/// Malformed input file; carries the 1-based row/column of the offending cell.
struct ParseError : Error {
    std::size_t row = 0;
    std::size_t col = 0;
    ParseError(const std::string& msg, std::size_t row_, std::size_t col_)
        : Error(msg + " (row " + std::to_string(row_) + ", column " + std::to_string(col_) + ")"),
          row(row_),
          col(col_) {}
};

/// A loss value became NaN or infinite during training.
struct NonFiniteLoss : Error {
    using Error::Error;
};

/// A gradient handed to an optimizer was NaN or infinite.
struct NonFiniteGradient : Error {
    using Error::Error;
};

/// The masked linear system of the SCM transform is (near-)singular.
struct SingularSystem : Error {
    double condition_estimate = 0.0;
    SingularSystem(const std::string& msg, double cond)
        : Error(msg + " (condition estimate " + std::to_string(cond) + ")"),
          condition_estimate(cond) {}
};

/// Thresholding the weighted adjacency left a directed cycle.
struct CyclicAfterThreshold : Error {
    using Error::Error;
};

/// Rejection sampling ran out of budget; carries what was collected so far.
struct BudgetExhausted : Error {
    std::vector<std::vector<int>> partial;
    double acceptance_rate = 0.0;
    BudgetExhausted(const std::string& msg, std::vector<std::vector<int>> partial_, double rate)
        : Error(msg + " (acceptance rate " + std::to_string(rate) + ")"),
          partial(std::move(partial_)),
          acceptance_rate(rate) {}
};

}  // namespace can
