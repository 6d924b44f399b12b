#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "can/tensor.hpp"

namespace can {

/// A named tensor with its optimizer state. Buffers (trainable = false) hold
/// quantities like batch-norm running statistics: persisted and restored with
/// the model but never touched by an optimizer step.
struct ParamEntry {
    Tensor value;
    Tensor m;  // first moment (adam) / mean-square accumulator (rmsprop)
    Tensor v;  // second moment (adam)
    std::int64_t step = 0;
    bool trainable = true;
};

/// Registration-ordered map of parameters; the order fixes gradient and
/// serialization order, which keeps runs reproducible.
class ParameterStore {
public:
    Tensor& create(const std::string& name, Tensor init, bool trainable = true);
    bool contains(const std::string& name) const { return map_.count(name) > 0; }

    ParamEntry& entry(const std::string& name);
    const ParamEntry& entry(const std::string& name) const;
    Tensor& value(const std::string& name) { return entry(name).value; }
    const Tensor& value(const std::string& name) const { return entry(name).value; }

    const std::vector<std::string>& names() const { return order_; }
    std::vector<std::string> trainable_names() const;

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, ParamEntry> map_;
};

using GradientMap = std::vector<std::pair<std::string, Tensor>>;

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected adaptive-moment update, applied in place.
void adam_step(ParameterStore& store, const GradientMap& grads, const AdamConfig& cfg);

struct RmspropConfig {
    double lr = 0.001;
    double decay = 0.9;
    double eps = 1e-8;
};

/// Running mean-square update, applied in place.
void rmsprop_step(ParameterStore& store, const GradientMap& grads,
                  const RmspropConfig& cfg);

}  // namespace can
