#include "can/layers.hpp"

#include <cmath>

#include "can/errors.hpp"

namespace can {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

std::string layer_name(const std::string& prefix, std::size_t idx, const char* field) {
    return prefix + ".l" + std::to_string(idx) + "." + field;
}

void require_width(const Tensor& x, std::size_t width, const std::string& prefix,
                   std::size_t idx) {
    if (x.cols() != width) {
        throw SchemaMismatch("layer " + std::to_string(idx) + " of '" + prefix +
                             "' expects width " + std::to_string(width) + ", got " +
                             x.shape_str());
    }
}

}  // namespace

diff::Var Binder::operator()(const std::string& name) {
    for (const auto& [n, v] : bound_) {
        if (n == name) return v;
    }
    const ParamEntry& e = store_->entry(name);
    diff::Var v = trainable_ && e.trainable ? tape_->leaf(e.value)
                                            : tape_->constant(e.value);
    bound_.emplace_back(name, v);
    return v;
}

Network::Network(std::string prefix, std::vector<LayerSpec> layers)
    : prefix_(std::move(prefix)), layers_(std::move(layers)) {
    if (prefix_.empty()) throw ContractViolation("network prefix must be non-empty");
    for (const LayerSpec& l : layers_) {
        if (l.kind == LayerSpec::Kind::kDense && (l.fan_in == 0 || l.fan_out == 0)) {
            throw ContractViolation("dense layer needs positive fan-in/fan-out");
        }
        if (l.kind == LayerSpec::Kind::kBatchNorm && l.fan_in == 0) {
            throw ContractViolation("batch-norm layer needs a width");
        }
        if (l.kind == LayerSpec::Kind::kLeakyRelu && l.slope <= 0.0) {
            throw ContractViolation("leaky-relu slope must be positive");
        }
    }
}

bool Network::has_batch_norm() const {
    for (const LayerSpec& l : layers_) {
        if (l.kind == LayerSpec::Kind::kBatchNorm) return true;
    }
    return false;
}

void Network::init_params(ParameterStore& store, Rng& rng) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& l = layers_[i];
        switch (l.kind) {
            case LayerSpec::Kind::kDense: {
                const double bound =
                    std::sqrt(6.0 / static_cast<double>(l.fan_in + l.fan_out));
                Tensor w = Tensor::zeros(l.fan_in, l.fan_out);
                for (double& v : w.raw()) v = bound * (2.0 * rng.uniform() - 1.0);
                store.create(layer_name(prefix_, i, "w"), std::move(w));
                store.create(layer_name(prefix_, i, "b"), Tensor::zeros(1, l.fan_out));
                break;
            }
            case LayerSpec::Kind::kBatchNorm:
                store.create(layer_name(prefix_, i, "gamma"), Tensor::full(1, l.fan_in, 1.0));
                store.create(layer_name(prefix_, i, "beta"), Tensor::zeros(1, l.fan_in));
                store.create(layer_name(prefix_, i, "mean"), Tensor::zeros(1, l.fan_in),
                             /*trainable=*/false);
                store.create(layer_name(prefix_, i, "var"), Tensor::full(1, l.fan_in, 1.0),
                             /*trainable=*/false);
                break;
            default:
                break;
        }
    }
}

std::vector<std::string> Network::param_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        switch (layers_[i].kind) {
            case LayerSpec::Kind::kDense:
                out.push_back(layer_name(prefix_, i, "w"));
                out.push_back(layer_name(prefix_, i, "b"));
                break;
            case LayerSpec::Kind::kBatchNorm:
                out.push_back(layer_name(prefix_, i, "gamma"));
                out.push_back(layer_name(prefix_, i, "beta"));
                break;
            default:
                break;
        }
    }
    return out;
}

diff::Var Network::forward(Binder& binder, diff::Var input, Mode mode) const {
    using namespace diff;
    Var x = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& l = layers_[i];
        switch (l.kind) {
            case LayerSpec::Kind::kDense: {
                require_width(x.value(), l.fan_in, prefix_, i);
                Var w = binder(layer_name(prefix_, i, "w"));
                Var b = binder(layer_name(prefix_, i, "b"));
                x = add(matmul(x, w), broadcast_rows(b, x.value().rows()));
                break;
            }
            case LayerSpec::Kind::kRelu:
                x = relu(x);
                break;
            case LayerSpec::Kind::kLeakyRelu:
                x = leaky_relu(x, l.slope);
                break;
            case LayerSpec::Kind::kTanh:
                x = tanh_v(x);
                break;
            case LayerSpec::Kind::kSoftmaxHead: {
                const std::size_t width = x.value().cols();
                if (l.segments.empty()) {
                    x = softmax_rows(x);
                    break;
                }
                std::size_t total = 0;
                for (std::size_t s : l.segments) total += s;
                if (total != width) {
                    throw SchemaMismatch("softmax head segments sum to " +
                                         std::to_string(total) + ", input width is " +
                                         std::to_string(width));
                }
                std::vector<Var> heads;
                heads.reserve(l.segments.size());
                std::size_t off = 0;
                for (std::size_t s : l.segments) {
                    heads.push_back(softmax_rows(slice_cols(x, off, off + s)));
                    off += s;
                }
                x = concat_cols(heads);
                break;
            }
            case LayerSpec::Kind::kBatchNorm: {
                require_width(x.value(), l.fan_in, prefix_, i);
                Tape& tape = binder.tape();
                ParameterStore& store = binder.store();
                Var gamma = binder(layer_name(prefix_, i, "gamma"));
                Var beta = binder(layer_name(prefix_, i, "beta"));
                const std::size_t m = x.value().rows();
                const std::size_t d = l.fan_in;
                if (mode == Mode::kTrain) {
                    if (m < 2) {
                        throw ContractViolation(
                            "batch-norm in train mode needs at least 2 rows");
                    }
                    const double inv_m = 1.0 / static_cast<double>(m);
                    Var mean = scale(col_sum(x), inv_m);
                    Var centred = sub(x, broadcast_rows(mean, m));
                    Var var_b = scale(col_sum(square(centred)), inv_m);
                    Var inv_std = pow_safe(add_scalar(var_b, kBnEps), -0.5);
                    Var xhat = mul(centred, broadcast_rows(inv_std, m));
                    x = add(mul(xhat, broadcast_rows(gamma, m)),
                            broadcast_rows(beta, m));
                    // Update running statistics (values only, not on the tape);
                    // the variance buffer keeps the unbiased estimate.
                    Tensor& rmean = store.value(layer_name(prefix_, i, "mean"));
                    Tensor& rvar = store.value(layer_name(prefix_, i, "var"));
                    const double unbias =
                        static_cast<double>(m) / static_cast<double>(m - 1);
                    for (std::size_t c = 0; c < d; ++c) {
                        rmean.at(0, c) = (1.0 - kBnMomentum) * rmean.at(0, c) +
                                         kBnMomentum * tape.value(mean).at(0, c);
                        rvar.at(0, c) = (1.0 - kBnMomentum) * rvar.at(0, c) +
                                        kBnMomentum * unbias * tape.value(var_b).at(0, c);
                    }
                } else {
                    // Fold the frozen statistics into one affine map.
                    const Tensor& rmean = store.value(layer_name(prefix_, i, "mean"));
                    const Tensor& rvar = store.value(layer_name(prefix_, i, "var"));
                    Tensor inv_std = Tensor::zeros(1, d);
                    for (std::size_t c = 0; c < d; ++c) {
                        inv_std.at(0, c) = 1.0 / std::sqrt(rvar.at(0, c) + kBnEps);
                    }
                    Var scale_v = mul(gamma, tape.constant(inv_std));
                    Var shift_v = sub(beta, mul(scale_v, tape.constant(rmean)));
                    x = add(mul(x, broadcast_rows(scale_v, m)),
                            broadcast_rows(shift_v, m));
                }
                break;
            }
        }
    }
    return x;
}

Tensor interpolate(const Tensor& x_real, const Tensor& x_fake, const Tensor& eps) {
    if (x_real.shape() != x_fake.shape()) {
        throw SchemaMismatch("interpolate: shape mismatch " + x_real.shape_str() +
                             " vs " + x_fake.shape_str());
    }
    if (eps.rows() != x_real.rows() || eps.cols() != 1) {
        throw SchemaMismatch("interpolate: eps must be " +
                             std::to_string(x_real.rows()) + "x1, got " +
                             eps.shape_str());
    }
    Tensor out = Tensor::zeros(x_real.rows(), x_real.cols());
    for (std::size_t r = 0; r < out.rows(); ++r) {
        const double e = eps.at(r, 0);
        for (std::size_t c = 0; c < out.cols(); ++c) {
            out.at(r, c) = e * x_real.at(r, c) + (1.0 - e) * x_fake.at(r, c);
        }
    }
    return out;
}

Tensor interpolate(const Tensor& x_real, const Tensor& x_fake, Rng& rng) {
    Tensor eps = Tensor::zeros(x_real.rows(), 1);
    for (double& v : eps.raw()) v = rng.uniform();
    return interpolate(x_real, x_fake, eps);
}

diff::Var gradient_penalty(const Network& disc, Binder& binder, const Tensor& x_hat,
                           double lambda, Mode mode) {
    if (disc.has_batch_norm()) {
        throw ContractViolation(
            "gradient penalty requires a batch-norm-free critic (rows must not interact)");
    }
    return gradient_penalty(
        [&disc, mode](Binder& b, diff::Var x) { return disc.forward(b, x, mode); }, binder,
        x_hat, lambda);
}

diff::Var gradient_penalty(const CriticFn& critic, Binder& binder, const Tensor& x_hat,
                           double lambda) {
    using namespace diff;
    if (lambda < 0.0) throw ContractViolation("penalty weight must be >= 0");
    Tape& tape = binder.tape();
    Var xh = tape.leaf(x_hat);
    Var score = critic(binder, xh);
    if (score.value().cols() != 1) {
        throw ContractViolation("critic must produce one score per row, got " +
                                score.value().shape_str());
    }
    Var g = tape.gradients(sum_all(score), std::vector<Var>{xh})[0];
    Var norm = l2norm_rows(g);
    return scale(mean_all(square(add_scalar(norm, -1.0))), lambda);
}

GradientMap trainable_gradients(diff::Tape& tape, diff::Var loss, const Binder& binder,
                                ParameterStore& store) {
    std::vector<std::string> names;
    std::vector<diff::Var> vars;
    for (const auto& [name, var] : binder.bound()) {
        if (!store.entry(name).trainable) continue;
        names.push_back(name);
        vars.push_back(var);
    }
    std::vector<diff::Var> grads = tape.gradients(loss, vars);
    GradientMap out;
    out.reserve(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) out.emplace_back(names[i], grads[i].value());
    return out;
}

}  // namespace can
