#include "can/optim.hpp"

#include <cmath>

#include "can/errors.hpp"

namespace can {

Tensor& ParameterStore::create(const std::string& name, Tensor init, bool trainable) {
    if (contains(name)) {
        throw ContractViolation("parameter '" + name + "' already registered");
    }
    if (!init.all_finite()) {
        throw ContractViolation("parameter '" + name + "' initialized with non-finite values");
    }
    ParamEntry entry;
    entry.m = Tensor::zeros(init.rows(), init.cols());
    entry.v = Tensor::zeros(init.rows(), init.cols());
    entry.value = std::move(init);
    entry.trainable = trainable;
    order_.push_back(name);
    return map_.emplace(name, std::move(entry)).first->second.value;
}

ParamEntry& ParameterStore::entry(const std::string& name) {
    auto it = map_.find(name);
    if (it == map_.end()) {
        throw ContractViolation("unknown parameter '" + name + "'");
    }
    return it->second;
}

const ParamEntry& ParameterStore::entry(const std::string& name) const {
    auto it = map_.find(name);
    if (it == map_.end()) {
        throw ContractViolation("unknown parameter '" + name + "'");
    }
    return it->second;
}

std::vector<std::string> ParameterStore::trainable_names() const {
    std::vector<std::string> out;
    for (const std::string& name : order_) {
        if (map_.at(name).trainable) out.push_back(name);
    }
    return out;
}

namespace {

ParamEntry& checked_entry(ParameterStore& store, const std::string& name,
                          const Tensor& grad) {
    ParamEntry& e = store.entry(name);
    if (!e.trainable) {
        throw ContractViolation("parameter '" + name + "' is a buffer, not trainable");
    }
    if (grad.shape() != e.value.shape()) {
        throw ContractViolation("gradient for '" + name + "' has shape " +
                                grad.shape_str() + ", parameter is " +
                                e.value.shape_str());
    }
    if (!grad.all_finite()) {
        throw NonFiniteGradient("non-finite gradient for '" + name + "'");
    }
    return e;
}

}  // namespace

void adam_step(ParameterStore& store, const GradientMap& grads, const AdamConfig& cfg) {
    for (const auto& [name, grad] : grads) {
        ParamEntry& e = checked_entry(store, name, grad);
        e.step += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(e.step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(e.step));
        for (std::size_t i = 0; i < grad.raw().size(); ++i) {
            const double g = grad.raw()[i];
            double& m = e.m.raw()[i];
            double& v = e.v.raw()[i];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            e.value.raw()[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

void rmsprop_step(ParameterStore& store, const GradientMap& grads,
                  const RmspropConfig& cfg) {
    for (const auto& [name, grad] : grads) {
        ParamEntry& e = checked_entry(store, name, grad);
        e.step += 1;
        for (std::size_t i = 0; i < grad.raw().size(); ++i) {
            const double g = grad.raw()[i];
            double& s = e.m.raw()[i];
            s = cfg.decay * s + (1.0 - cfg.decay) * g * g;
            e.value.raw()[i] -= cfg.lr * g / (std::sqrt(s) + cfg.eps);
        }
    }
}

}  // namespace can
