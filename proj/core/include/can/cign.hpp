#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "can/data.hpp"
#include "can/layers.hpp"
#include "can/lgn.hpp"
#include "can/rng.hpp"
#include "can/tape.hpp"

namespace can {

/// Shape and optimization hyper-parameters of the conditional image
/// generator. One struct so a run is fully described by (schema, image
/// shape, config, seed).
struct CignConfig {
    // architecture
    std::size_t noise_width = 16;     // exogenous coordinates appended to labels
    std::size_t decoder_width = 256;  // two hidden decoder layers of this width
    std::size_t critic_width = 256;   // shared discriminator trunk width
    std::size_t trunk_layers = 2;     // hidden layers in the shared trunk
    // optimization
    std::size_t epochs = 300;
    std::size_t batch_size = 64;
    std::size_t critic_steps = 5;  // critic updates per generator update
    double lr_g = 0.001;
    double lr_d = 0.0002;
    double rms_decay = 0.9;
    double lambda_gp = 10.0;  // gradient-penalty coefficient
    double cls_weight = 1.0;  // classification term weight, both sides
    double beta = 1.0;        // acyclicity curvature
    double rho0 = 1.0;
    double rho_growth = 10.0;
    double rho_cap = 1e6;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Conditional image generator with an embedded linear structural model over
/// the concatenated (labels, noise) vector: labels enter as intervened root
/// coordinates (indices 0..k-1), noise drives the remaining d coordinates,
/// and the mixed structural vector feeds a dense decoder that emits tanh
/// pixels. The discriminator shares one trunk between an adversarial scalar
/// head and a k-way per-label classification head. Owns its parameters.
struct CignModel {
    VariableSchema schema;  // k binary label variables
    std::size_t height = 0;
    std::size_t width = 0;
    CignConfig config;
    Network decoder;
    Network trunk;     // batch-norm-free: the penalty needs independent rows
    Network adv_head;  // scalar critic score
    Network cls_head;  // k per-label logits
    ParameterStore store;
    LagrangianState lag;

    std::size_t k() const { return schema.size(); }
    std::size_t d() const { return config.noise_width; }
    std::size_t n() const { return k() + d(); }
    std::size_t pixels() const { return height * width; }
    std::vector<std::string> generator_param_names() const;  // adjacency first
    std::vector<std::string> discriminator_param_names() const;
    /// Current adjacency with its diagonal masked to zero.
    Tensor adjacency() const;
};

/// Name of the adjacency parameter inside the store.
inline constexpr const char* kCignAdjacencyParam = "cign.A";

/// `noise_width` overrides config.noise_width in the stored config, so the
/// model carries a single authoritative copy.
CignModel build_cign(const VariableSchema& schema, std::size_t noise_width,
                     std::size_t height, std::size_t width, const CignConfig& config);

/// Labels (m x k, entries 0/1) are clamped root coordinates of the masked
/// transform; z (m x d) supplies the exogenous coordinates. Returns the
/// decoded batch of tanh pixels in [-1, 1], one image per row.
diff::Var cign_generate_node(const CignModel& model, Binder& binder,
                             const Tensor& labels, diff::Var z, Mode mode);

/// Convenience: run the generator on plain tensors, no gradients.
ImageBatch cign_generate(const CignModel& model, const Tensor& labels, const Tensor& z,
                         Mode mode);

/// Per-label sigmoid cross-entropy of the classification head on one batch:
/// mean over rows of the summed per-label negated log-likelihood, so the
/// value is >= 0 and a perfect classifier scores 0.
diff::Var classification_term(const CignModel& model, Binder& disc_binder, diff::Var x,
                              const Tensor& labels);

/// Classification cross-entropy accumulated over the real and the generated
/// batch (one mean per batch, summed).
diff::Var classification_loss(const CignModel& model, Binder& disc_binder,
                              const Tensor& real, const Tensor& real_labels,
                              diff::Var fake, const Tensor& fake_labels);

/// E[D(fake)] - E[D(real)] + lambda_gp * gradient penalty at interpolates
/// + cls_weight * classification loss on both batches.
diff::Var cign_discriminator_loss(const CignModel& model, Binder& disc_binder,
                                  const Tensor& real, const Tensor& real_labels,
                                  const Tensor& fake, const Tensor& fake_labels,
                                  Rng& rng);

/// -E[D(G(labels, Z))] + cls_weight * classification on the generated batch
/// + lambda_bar * h(A) + (rho / 2) * h(A)^2.
diff::Var cign_generator_loss(const CignModel& model, Binder& gen_binder,
                              Binder& disc_binder, const Tensor& labels, const Tensor& z,
                              const LagrangianState& lag);

struct CignTrainResult {
    CignModel model;
    std::vector<EpochStats> history;
};

/// Alternating critic/generator loop (RMSprop on both sides) with the
/// augmented-Lagrangian dual update once per epoch. Generated batches are
/// conditioned on the real batch's labels. Deterministic given
/// (dataset, config, seed).
CignTrainResult train_cign(const ImageBatch& data, const CignConfig& config);

void save_cign(const std::string& path, const CignModel& model);
CignModel load_cign(const std::string& path);

/// Serialization of the run configuration (used in checkpoints and run logs).
std::string cign_config_to_json(const CignConfig& config);
CignConfig cign_config_from_json(const std::string& text);

}  // namespace can
