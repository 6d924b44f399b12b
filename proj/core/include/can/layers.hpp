#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "can/optim.hpp"
#include "can/rng.hpp"
#include "can/tape.hpp"
#include "can/tensor.hpp"

namespace can {

enum class Mode { kTrain, kEval };

struct LayerSpec {
    enum class Kind { kDense, kRelu, kLeakyRelu, kTanh, kSoftmaxHead, kBatchNorm };

    Kind kind = Kind::kDense;
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    double slope = 0.2;                  // leaky-relu
    std::vector<std::size_t> segments;   // softmax-head; empty = one head, full width

    static LayerSpec dense(std::size_t fan_in, std::size_t fan_out) {
        return {Kind::kDense, fan_in, fan_out, 0.2, {}};
    }
    static LayerSpec relu() { return {Kind::kRelu, 0, 0, 0.2, {}}; }
    static LayerSpec leaky_relu(double slope = 0.2) {
        return {Kind::kLeakyRelu, 0, 0, slope, {}};
    }
    static LayerSpec tanh() { return {Kind::kTanh, 0, 0, 0.2, {}}; }
    static LayerSpec softmax_head(std::vector<std::size_t> segments = {}) {
        return {Kind::kSoftmaxHead, 0, 0, 0.2, std::move(segments)};
    }
    static LayerSpec batch_norm(std::size_t width) {
        return {Kind::kBatchNorm, width, width, 0.2, {}};
    }
};

/// Binds parameters from a store onto a tape, once each. Trainable parameters
/// become leaves when `trainable` is set (their gradients are wanted) and
/// constants otherwise (e.g. the generator while the critic trains); buffers
/// always bind as constants.
class Binder {
public:
    Binder(diff::Tape& tape, ParameterStore& store, bool trainable)
        : tape_(&tape), store_(&store), trainable_(trainable) {}

    diff::Var operator()(const std::string& name);

    diff::Tape& tape() { return *tape_; }
    ParameterStore& store() { return *store_; }
    bool trainable() const { return trainable_; }

    /// Names and vars in first-bound order (deterministic).
    const std::vector<std::pair<std::string, diff::Var>>& bound() const { return bound_; }

private:
    diff::Tape* tape_;
    ParameterStore* store_;
    bool trainable_;
    std::vector<std::pair<std::string, diff::Var>> bound_;
};

/// An ordered stack of layers with a parameter-name prefix. The network holds
/// no tensors itself; parameters live in a ParameterStore so several networks
/// can share one store, one checkpoint, and one optimizer pass.
class Network {
public:
    Network() = default;
    Network(std::string prefix, std::vector<LayerSpec> layers);

    const std::string& prefix() const { return prefix_; }
    const std::vector<LayerSpec>& layers() const { return layers_; }
    bool has_batch_norm() const;

    /// Registers dense weights/biases and batch-norm parameters + buffers,
    /// drawing initial weights from rng in layer order.
    void init_params(ParameterStore& store, Rng& rng) const;

    /// Trainable parameter names in layer order.
    std::vector<std::string> param_names() const;

    /// Runs the stack. Train mode uses batch statistics in batch-norm layers
    /// and updates their running buffers in the store; eval mode reads the
    /// buffers and is a pure function of (params, input).
    diff::Var forward(Binder& binder, diff::Var input, Mode mode) const;

private:
    std::string prefix_;
    std::vector<LayerSpec> layers_;
};

/// x_hat = eps*x_real + (1-eps)*x_fake with eps ~ U[0,1] drawn once per row.
Tensor interpolate(const Tensor& x_real, const Tensor& x_fake, Rng& rng);
/// Deterministic variant: eps supplied as an m x 1 column.
Tensor interpolate(const Tensor& x_real, const Tensor& x_fake, const Tensor& eps);

/// lambda * mean over rows of (||d disc(x_hat) / d x_hat||_2 - 1)^2, built so a
/// further backward pass w.r.t. the critic parameters is exact. Requires a
/// batch-norm-free critic: per-row input gradients are read off a summed
/// output, which is only valid when rows do not interact.
diff::Var gradient_penalty(const Network& disc, Binder& binder, const Tensor& x_hat,
                           double lambda, Mode mode = Mode::kTrain);

/// Same penalty for a critic given as a callable (e.g. a shared trunk
/// followed by a scalar head). The callable must keep rows independent;
/// batch-norm inside it silently breaks the penalty, so excluding it is on
/// the caller.
using CriticFn = std::function<diff::Var(Binder&, diff::Var)>;
diff::Var gradient_penalty(const CriticFn& critic, Binder& binder, const Tensor& x_hat,
                           double lambda);

/// Gradients of `loss` for every trainable parameter bound through `binder`,
/// keyed by name, in first-bound order.
GradientMap trainable_gradients(diff::Tape& tape, diff::Var loss, const Binder& binder,
                                ParameterStore& store);

}  // namespace can
