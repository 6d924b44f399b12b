#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "can/data.hpp"
#include "can/layers.hpp"
#include "can/optim.hpp"
#include "can/rng.hpp"
#include "can/scm.hpp"
#include "can/tape.hpp"

namespace can {

enum class NoisePrior { kNormal, kUniform };
enum class DecodeMode { kArgmax, kSample };

/// Everything needed to rebuild and train a label-generation model: network
/// shape plus optimization hyper-parameters. One struct so a run is fully
/// described by (schema, config, seed).
struct LgnConfig {
    // architecture
    bool structured_heads = true;   // per-variable heads; false = shared trunk
    std::size_t hidden_width = 100; // trunk and critic width
    std::size_t head_width = 16;    // structured per-variable head width
    std::size_t g_hidden_layers = 4;
    std::size_t d_hidden_layers = 5;
    NoisePrior noise_prior = NoisePrior::kNormal;
    // optimization
    std::size_t epochs = 250;
    std::size_t batch_size = 64;
    std::size_t critic_steps = 5;  // critic updates per generator update
    double lr_g = 0.001;
    double lr_d = 0.001;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    double lambda_gp = 1.0;  // gradient-penalty coefficient
    double beta = 1.0;       // acyclicity curvature
    double rho0 = 1.0;
    double rho_growth = 10.0;
    double rho_cap = 1e6;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Augmented-Lagrangian bookkeeping for the acyclicity constraint.
struct LagrangianState {
    double lambda_bar = 0.0;
    double rho = 1.0;
    double last_h = -1.0;  // negative = no update has happened yet
};

/// lambda_bar' = lambda_bar + rho * h. rho multiplies by `growth` (capped)
/// whenever h failed to drop below a quarter of its value at the previous
/// update. h below -1e-9 is impossible for the trace penalty and rejected.
LagrangianState lagrangian_update(const LagrangianState& lag, double h,
                                  double growth = 10.0, double cap = 1e6);

/// Adversarially trained label generator with an embedded linear structural
/// model: noise Z flows through the masked linear-model transform, then one
/// softmax head per categorical variable. The critic scores one-hot (real)
/// or soft (generated) encodings. Owns its parameters.
struct LgnModel {
    VariableSchema schema;
    LgnConfig config;
    std::vector<Network> heads;  // structured mode: heads[i] reads coordinate i
    Network trunk;               // shared-trunk mode
    Network disc;
    ParameterStore store;
    LagrangianState lag;

    std::size_t n() const { return schema.size(); }
    std::size_t encoded_width() const { return schema.total_width(); }
    bool structured() const { return config.structured_heads; }
    std::vector<std::string> generator_param_names() const;  // adjacency first
    std::vector<std::string> discriminator_param_names() const;
    /// Current adjacency with its diagonal masked to zero.
    Tensor adjacency() const;
};

/// Name of the adjacency parameter inside the store.
inline constexpr const char* kAdjacencyParam = "lgn.A";

LgnModel build_lgn(const VariableSchema& schema, const LgnConfig& config);

/// Label-level assignments: variable index -> category index.
using LabelAssignments = std::vector<std::pair<int, int>>;

/// Category index normalized to [0, 1] (index / (cardinality - 1)) becomes
/// the clamped pre-network coordinate.
CompiledIntervention compile_label_intervention(const VariableSchema& schema,
                                                const LabelAssignments& labels);

/// Z batch from the configured noise prior.
Tensor draw_noise(const LgnConfig& config, std::size_t m, std::size_t n, Rng& rng);

/// Masked linear-model transform followed by the head stack; returns the
/// concatenated per-variable probabilities (each block sums to 1).
diff::Var generator_forward(const LgnModel& model, Binder& binder, diff::Var z,
                            const CompiledIntervention& iv, Mode mode);

/// Convenience: run the generator on plain tensors, no gradients.
Tensor generator_sample(const LgnModel& model, const Tensor& z,
                        const CompiledIntervention& iv, Mode mode);

/// E[D(fake)] - E[D(real)] + lambda * gradient penalty at interpolates.
diff::Var discriminator_loss(const LgnModel& model, Binder& disc_binder,
                             const Tensor& real, const Tensor& fake, double lambda,
                             Rng& rng);

/// -E[D(G(Z))] + lambda_bar * h(A) + (rho / 2) * h(A)^2.
diff::Var generator_loss(const LgnModel& model, Binder& gen_binder,
                         Binder& disc_binder, const Tensor& z,
                         const LagrangianState& lag, double beta);

struct EpochStats {
    std::size_t epoch = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double h = 0.0;
    double lambda_bar = 0.0;
    double rho = 0.0;
};

struct LgnTrainResult {
    LgnModel model;
    std::vector<EpochStats> history;
};

/// Alternating critic/generator loop with the augmented-Lagrangian dual
/// update once per epoch. Deterministic given (dataset, config, seed).
LgnTrainResult train_lgn(const CategoricalDataset& data, const LgnConfig& config);

std::vector<std::vector<int>> sample_observational(const LgnModel& model,
                                                   std::size_t m, Rng& rng,
                                                   DecodeMode decode = DecodeMode::kArgmax);

/// Intervened labels are clamped to their assigned categories in every row.
std::vector<std::vector<int>> sample_interventional(const LgnModel& model,
                                                    const LabelAssignments& labels,
                                                    std::size_t m, Rng& rng,
                                                    DecodeMode decode = DecodeMode::kArgmax);

/// Rejection sampling: draws observational rows, keeps those matching all
/// conditions, until m rows or the draw budget is spent (BudgetExhausted
/// carrying the partial batch and acceptance rate).
std::vector<std::vector<int>> sample_conditional(const LgnModel& model,
                                                 const LabelAssignments& conditions,
                                                 std::size_t m, std::size_t budget,
                                                 Rng& rng,
                                                 DecodeMode decode = DecodeMode::kArgmax);

/// Outcome of a conditional draw, successful or not: the kept rows (fewer
/// than requested when the budget ran out), the number of observational rows
/// inspected before stopping, and their ratio.
struct ConditionalDraw {
    std::vector<std::vector<int>> rows;
    std::size_t requested = 0;
    std::size_t drawn = 0;
    double acceptance_rate = 0.0;

    bool exhausted() const { return rows.size() < requested; }
};

/// Same sampling process as sample_conditional (identical row stream for an
/// equally seeded rng) but never throws BudgetExhausted: callers that need
/// the acceptance rate or the partial batch read them off the result.
ConditionalDraw sample_conditional_stats(const LgnModel& model,
                                         const LabelAssignments& conditions,
                                         std::size_t m, std::size_t budget, Rng& rng,
                                         DecodeMode decode = DecodeMode::kArgmax);

void save_lgn(const std::string& path, const LgnModel& model);
LgnModel load_lgn(const std::string& path);

/// Serialization of the run configuration (used in checkpoints and run logs).
std::string lgn_config_to_json(const LgnConfig& config);
LgnConfig lgn_config_from_json(const std::string& text);

}  // namespace can
