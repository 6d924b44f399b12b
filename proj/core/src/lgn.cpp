#include "can/lgn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include <json.hpp>

#include "can/checkpoint.hpp"
#include "can/errors.hpp"

namespace can {

using diff::Tape;
using diff::Var;
using nlohmann::json;

void LgnConfig::validate() const {
    if (hidden_width < 1 || head_width < 1 || g_hidden_layers < 1 || d_hidden_layers < 1)
        throw ContractViolation("network sizes must be positive");
    if (epochs < 1 || batch_size < 2 || critic_steps < 1)
        throw ContractViolation("epochs, batch size and critic steps must be positive "
                                "(batches of at least 2 rows)");
    if (!(lr_g > 0.0) || !(lr_d > 0.0))
        throw ContractViolation("learning rates must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
        !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ContractViolation("adam decay rates must lie in [0, 1)");
    if (!(lambda_gp >= 0.0)) throw ContractViolation("penalty coefficient must be >= 0");
    if (!(beta > 0.0)) throw ContractViolation("acyclicity curvature must be positive");
    if (!(rho0 > 0.0) || !(rho_growth >= 1.0) || !(rho_cap >= rho0))
        throw ContractViolation("dual-update schedule must have rho0 > 0, growth >= 1, "
                                "cap >= rho0");
}

LagrangianState lagrangian_update(const LagrangianState& lag, double h, double growth,
                                  double cap) {
    if (h < -1e-9)
        throw ContractViolation("acyclicity value " + std::to_string(h) +
                                " is negative; the trace penalty cannot be");
    if (!(lag.rho > 0.0)) throw ContractViolation("rho must stay positive");
    h = std::max(h, 0.0);
    LagrangianState next = lag;
    next.lambda_bar = lag.lambda_bar + lag.rho * h;
    if (lag.last_h >= 0.0 && h > 0.25 * lag.last_h)
        next.rho = std::min(lag.rho * growth, cap);
    next.last_h = h;
    return next;
}

// ---- model construction -----------------------------------------------------

namespace {

std::vector<LayerSpec> head_layers(std::size_t head_width, std::size_t card) {
    return {LayerSpec::dense(1, head_width), LayerSpec::relu(),
            LayerSpec::dense(head_width, head_width), LayerSpec::relu(),
            LayerSpec::dense(head_width, card), LayerSpec::softmax_head()};
}

std::vector<LayerSpec> trunk_layers(const VariableSchema& schema,
                                    const LgnConfig& cfg) {
    std::vector<LayerSpec> layers;
    std::size_t in = schema.size();
    for (std::size_t l = 0; l < cfg.g_hidden_layers; ++l) {
        layers.push_back(LayerSpec::dense(in, cfg.hidden_width));
        layers.push_back(LayerSpec::relu());
        layers.push_back(LayerSpec::batch_norm(cfg.hidden_width));
        in = cfg.hidden_width;
    }
    layers.push_back(LayerSpec::dense(in, schema.total_width()));
    layers.push_back(LayerSpec::softmax_head(schema.cards));
    return layers;
}

std::vector<LayerSpec> critic_layers(std::size_t input, std::size_t width,
                                     std::size_t depth) {
    std::vector<LayerSpec> layers;
    std::size_t in = input;
    for (std::size_t l = 0; l < depth; ++l) {
        layers.push_back(LayerSpec::dense(in, width));
        layers.push_back(LayerSpec::leaky_relu(0.2));
        in = width;
    }
    layers.push_back(LayerSpec::dense(in, 1));
    return layers;
}

Tensor offdiag_mask(std::size_t n) {
    Tensor m = Tensor::full(n, n, 1.0);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 0.0;
    return m;
}

/// The adjacency leaf with its diagonal forced to zero inside the graph, so
/// no optimizer step can introduce self-loops.
Var bound_adjacency(const LgnModel& model, Binder& binder) {
    Var raw = binder(kAdjacencyParam);
    return mul(raw, binder.tape().constant(offdiag_mask(model.n())));
}

}  // namespace

std::vector<std::string> LgnModel::generator_param_names() const {
    std::vector<std::string> names{kAdjacencyParam};
    if (structured()) {
        for (const Network& head : heads)
            for (const std::string& p : head.param_names()) names.push_back(p);
    } else {
        for (const std::string& p : trunk.param_names()) names.push_back(p);
    }
    return names;
}

std::vector<std::string> LgnModel::discriminator_param_names() const {
    return disc.param_names();
}

Tensor LgnModel::adjacency() const {
    Tensor a = store.value(kAdjacencyParam);
    for (std::size_t i = 0; i < a.rows(); ++i) a.at(i, i) = 0.0;
    return a;
}

LgnModel build_lgn(const VariableSchema& schema, const LgnConfig& config) {
    if (schema.size() == 0) throw ContractViolation("schema must be nonempty");
    config.validate();

    LgnModel model;
    model.schema = schema;
    model.config = config;
    model.lag = LagrangianState{0.0, config.rho0, -1.0};

    const std::size_t n = schema.size();
    Rng rng(config.seed);
    model.store.create(kAdjacencyParam, Tensor::zeros(n, n));
    if (config.structured_heads) {
        for (std::size_t i = 0; i < n; ++i) {
            model.heads.emplace_back("lgn.g.h" + std::to_string(i),
                                     head_layers(config.head_width, schema.cards[i]));
            model.heads.back().init_params(model.store, rng);
        }
    } else {
        model.trunk = Network("lgn.g.trunk", trunk_layers(schema, config));
        model.trunk.init_params(model.store, rng);
    }
    model.disc = Network("lgn.d", critic_layers(schema.total_width(),
                                                config.hidden_width,
                                                config.d_hidden_layers));
    model.disc.init_params(model.store, rng);
    return model;
}

CompiledIntervention compile_label_intervention(const VariableSchema& schema,
                                                const LabelAssignments& labels) {
    InterventionSpec spec;
    for (const auto& [var, category] : labels) {
        if (var < 0 || static_cast<std::size_t>(var) >= schema.size())
            throw ContractViolation("intervention on unknown variable index " +
                                    std::to_string(var));
        const std::size_t card = schema.cards[static_cast<std::size_t>(var)];
        if (category < 0 || static_cast<std::size_t>(category) >= card)
            throw ContractViolation("intervention category " + std::to_string(category) +
                                    " out of range for cardinality " +
                                    std::to_string(card));
        spec.assignments.emplace_back(
            var, static_cast<double>(category) / static_cast<double>(card - 1));
    }
    return compile_intervention(spec, schema.size());
}

Tensor draw_noise(const LgnConfig& config, std::size_t m, std::size_t n, Rng& rng) {
    Tensor z = Tensor::zeros(m, n);
    for (double& v : z.raw())
        v = config.noise_prior == NoisePrior::kNormal ? rng.normal()
                                                      : 2.0 * rng.uniform() - 1.0;
    return z;
}

diff::Var generator_forward(const LgnModel& model, Binder& binder, diff::Var z,
                            const CompiledIntervention& iv, Mode mode) {
    const std::size_t n = model.n();
    if (z.value().cols() != n)
        throw SchemaMismatch("noise width " + std::to_string(z.value().cols()) +
                             " does not match variable count " + std::to_string(n));
    Var a = bound_adjacency(model, binder);
    Var x = scm_transform_node(a, z, iv.alpha, iv.c);
    if (model.structured()) {
        std::vector<Var> blocks;
        blocks.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            Var xi = slice_cols(x, i, i + 1);
            blocks.push_back(model.heads[i].forward(binder, xi, mode));
        }
        return concat_cols(blocks);
    }
    return model.trunk.forward(binder, x, mode);
}

Tensor generator_sample(const LgnModel& model, const Tensor& z,
                        const CompiledIntervention& iv, Mode mode) {
    Tape tape;
    // Binding as constants only; eval mode does not touch the store.
    Binder binder(tape, const_cast<ParameterStore&>(model.store), /*trainable=*/false);
    return generator_forward(model, binder, tape.constant(z), iv, mode).value();
}

diff::Var discriminator_loss(const LgnModel& model, Binder& disc_binder,
                             const Tensor& real, const Tensor& fake, double lambda,
                             Rng& rng) {
    if (real.cols() != model.encoded_width() || fake.cols() != model.encoded_width())
        throw SchemaMismatch("batch width does not match the one-hot encoding width " +
                             std::to_string(model.encoded_width()));
    if (real.rows() != fake.rows())
        throw SchemaMismatch("real and fake batches differ in size");
    Tape& tape = disc_binder.tape();
    Var real_scores = model.disc.forward(disc_binder, tape.constant(real), Mode::kTrain);
    Var fake_scores = model.disc.forward(disc_binder, tape.constant(fake), Mode::kTrain);
    Var loss = sub(mean_all(fake_scores), mean_all(real_scores));
    if (lambda > 0.0) {
        const Tensor x_hat = interpolate(real, fake, rng);
        loss = add(loss, gradient_penalty(model.disc, disc_binder, x_hat, lambda));
    }
    if (!loss.value().all_finite())
        throw NonFiniteLoss("critic loss is not finite");
    return loss;
}

diff::Var generator_loss(const LgnModel& model, Binder& gen_binder,
                         Binder& disc_binder, const Tensor& z,
                         const LagrangianState& lag, double beta) {
    Tape& tape = gen_binder.tape();
    const CompiledIntervention obs = compile_intervention(InterventionSpec{}, model.n());
    Var x = generator_forward(model, gen_binder, tape.constant(z), obs, Mode::kTrain);
    Var adv = neg(mean_all(model.disc.forward(disc_binder, x, Mode::kTrain)));
    Var h = acyclicity_penalty_node(bound_adjacency(model, gen_binder), beta);
    Var constraint = add(scale(h, lag.lambda_bar), scale(square(h), 0.5 * lag.rho));
    Var loss = add(adv, constraint);
    if (!loss.value().all_finite())
        throw NonFiniteLoss("generator loss is not finite");
    return loss;
}

// ---- training ------------------------------------------------------------------

LgnTrainResult train_lgn(const CategoricalDataset& data, const LgnConfig& config) {
    config.validate();
    data.validate();
    if (data.m() < 2)
        throw ContractViolation("training needs at least 2 rows");

    LgnTrainResult result;
    result.model = build_lgn(data.schema, config);
    LgnModel& model = result.model;

    const Tensor real_all = one_hot_encode(data);
    const std::size_t m = data.m();
    const std::size_t batch = std::min(config.batch_size, m);
    const std::size_t batches_per_epoch = m / batch;

    Rng rng(config.seed ^ 0xd1b54a32d192ed03ull);  // training stream
    const AdamConfig d_adam{config.lr_d, config.adam_beta1, config.adam_beta2, 1e-8};
    const AdamConfig g_adam{config.lr_g, config.adam_beta1, config.adam_beta2, 1e-8};
    const CompiledIntervention obs = compile_intervention(InterventionSpec{}, model.n());

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::size_t critic_tick = 0;
    double last_g_mean = 0.0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double d_sum = 0.0, g_sum = 0.0;
        std::size_t d_count = 0, g_count = 0;
        try {
            for (std::size_t b = 0; b < batches_per_epoch; ++b) {
                Tensor rb = Tensor::zeros(batch, real_all.cols());
                for (std::size_t r = 0; r < batch; ++r)
                    for (std::size_t c = 0; c < real_all.cols(); ++c)
                        rb.at(r, c) = real_all.at(order[b * batch + r], c);

                // critic step
                {
                    const Tensor z = draw_noise(config, batch, model.n(), rng);
                    const Tensor fake =
                        generator_sample(model, z, obs, Mode::kTrain);
                    Tape tape;
                    Binder db(tape, model.store, /*trainable=*/true);
                    Var loss =
                        discriminator_loss(model, db, rb, fake, config.lambda_gp, rng);
                    adam_step(model.store, trainable_gradients(tape, loss, db, model.store),
                              d_adam);
                    d_sum += loss.value().item();
                    ++d_count;
                }

                // one generator step per `critic_steps` critic steps
                if (++critic_tick % config.critic_steps == 0) {
                    const Tensor z = draw_noise(config, batch, model.n(), rng);
                    Tape tape;
                    Binder gb(tape, model.store, /*trainable=*/true);
                    Binder dbc(tape, model.store, /*trainable=*/false);
                    Var loss = generator_loss(model, gb, dbc, z, model.lag, config.beta);
                    adam_step(model.store, trainable_gradients(tape, loss, gb, model.store),
                              g_adam);
                    g_sum += loss.value().item();
                    ++g_count;
                }
            }
        } catch (const NonFiniteLoss& e) {
            throw NonFiniteLoss(std::string(e.what()) + " (epoch " +
                                std::to_string(epoch) + ")");
        }

        const double h = acyclicity_penalty(model.adjacency(), config.beta);
        model.lag = lagrangian_update(model.lag, h, config.rho_growth, config.rho_cap);
        if (g_count > 0) last_g_mean = g_sum / static_cast<double>(g_count);
        result.history.push_back({epoch, d_count ? d_sum / d_count : 0.0, last_g_mean, h,
                                  model.lag.lambda_bar, model.lag.rho});
    }
    return result;
}

// ---- sampling -------------------------------------------------------------------

namespace {

std::vector<std::vector<int>> decode_soft(const Tensor& soft,
                                          const VariableSchema& schema,
                                          DecodeMode decode, Rng& rng) {
    if (decode == DecodeMode::kArgmax) return one_hot_decode(soft, schema);
    std::vector<std::vector<int>> rows(soft.rows(), std::vector<int>(schema.size()));
    for (std::size_t r = 0; r < soft.rows(); ++r) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < schema.size(); ++i) {
            double total = 0.0;
            for (std::size_t c = 0; c < schema.cards[i]; ++c)
                total += soft.at(r, off + c);
            double u = rng.uniform() * total;
            std::size_t pick = schema.cards[i] - 1;
            double acc = 0.0;
            for (std::size_t c = 0; c < schema.cards[i]; ++c) {
                acc += soft.at(r, off + c);
                if (u < acc) {
                    pick = c;
                    break;
                }
            }
            rows[r][i] = static_cast<int>(pick);
            off += schema.cards[i];
        }
    }
    return rows;
}

}  // namespace

std::vector<std::vector<int>> sample_observational(const LgnModel& model, std::size_t m,
                                                   Rng& rng, DecodeMode decode) {
    if (m == 0) return {};
    const Tensor z = draw_noise(model.config, m, model.n(), rng);
    const CompiledIntervention obs = compile_intervention(InterventionSpec{}, model.n());
    const Tensor soft = generator_sample(model, z, obs, Mode::kEval);
    return decode_soft(soft, model.schema, decode, rng);
}

std::vector<std::vector<int>> sample_interventional(const LgnModel& model,
                                                    const LabelAssignments& labels,
                                                    std::size_t m, Rng& rng,
                                                    DecodeMode decode) {
    const CompiledIntervention iv = compile_label_intervention(model.schema, labels);
    if (m == 0) return {};
    const Tensor z = draw_noise(model.config, m, model.n(), rng);
    const Tensor soft = generator_sample(model, z, iv, Mode::kEval);
    std::vector<std::vector<int>> rows = decode_soft(soft, model.schema, decode, rng);
    // do() fixes the label by definition: clamp the assigned categories.
    for (auto& row : rows)
        for (const auto& [var, category] : labels)
            row[static_cast<std::size_t>(var)] = category;
    return rows;
}

ConditionalDraw sample_conditional_stats(const LgnModel& model,
                                         const LabelAssignments& conditions,
                                         std::size_t m, std::size_t budget, Rng& rng,
                                         DecodeMode decode) {
    compile_label_intervention(model.schema, conditions);  // validate indices
    if (budget < m)
        throw ContractViolation("budget must cover the requested sample count");
    ConditionalDraw draw;
    draw.requested = m;
    while (draw.rows.size() < m && draw.drawn < budget) {
        const std::size_t chunk =
            std::min(budget - draw.drawn, std::max<std::size_t>(m, 512));
        std::vector<std::vector<int>> rows = sample_observational(model, chunk, rng, decode);
        for (auto& row : rows) {
            ++draw.drawn;
            bool match = true;
            for (const auto& [var, category] : conditions)
                if (row[static_cast<std::size_t>(var)] != category) {
                    match = false;
                    break;
                }
            if (match) {
                draw.rows.push_back(std::move(row));
                if (draw.rows.size() == m) break;
            }
        }
    }
    draw.acceptance_rate = draw.drawn ? static_cast<double>(draw.rows.size()) /
                                            static_cast<double>(draw.drawn)
                                      : 0.0;
    return draw;
}

std::vector<std::vector<int>> sample_conditional(const LgnModel& model,
                                                 const LabelAssignments& conditions,
                                                 std::size_t m, std::size_t budget,
                                                 Rng& rng, DecodeMode decode) {
    ConditionalDraw draw = sample_conditional_stats(model, conditions, m, budget, rng, decode);
    if (draw.exhausted())
        throw BudgetExhausted("conditional sampling found " +
                                  std::to_string(draw.rows.size()) + " of " +
                                  std::to_string(m) + " rows within budget " +
                                  std::to_string(budget),
                              std::move(draw.rows), draw.acceptance_rate);
    return draw.rows;
}

// ---- serialization -------------------------------------------------------------

std::string lgn_config_to_json(const LgnConfig& c) {
    json j;
    j["structured_heads"] = c.structured_heads;
    j["hidden_width"] = c.hidden_width;
    j["head_width"] = c.head_width;
    j["g_hidden_layers"] = c.g_hidden_layers;
    j["d_hidden_layers"] = c.d_hidden_layers;
    j["noise_prior"] = c.noise_prior == NoisePrior::kNormal ? "normal" : "uniform";
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["critic_steps"] = c.critic_steps;
    j["lr_g"] = c.lr_g;
    j["lr_d"] = c.lr_d;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["lambda_gp"] = c.lambda_gp;
    j["beta"] = c.beta;
    j["rho0"] = c.rho0;
    j["rho_growth"] = c.rho_growth;
    j["rho_cap"] = c.rho_cap;
    j["seed"] = c.seed;
    return j.dump();
}

LgnConfig lgn_config_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ParseError("config is not valid JSON", 0, 0);
    LgnConfig c;
    c.structured_heads = j.value("structured_heads", c.structured_heads);
    c.hidden_width = j.value("hidden_width", c.hidden_width);
    c.head_width = j.value("head_width", c.head_width);
    c.g_hidden_layers = j.value("g_hidden_layers", c.g_hidden_layers);
    c.d_hidden_layers = j.value("d_hidden_layers", c.d_hidden_layers);
    const std::string prior = j.value("noise_prior", "normal");
    if (prior != "normal" && prior != "uniform")
        throw ParseError("unknown noise prior '" + prior + "'", 0, 0);
    c.noise_prior = prior == "normal" ? NoisePrior::kNormal : NoisePrior::kUniform;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.critic_steps = j.value("critic_steps", c.critic_steps);
    c.lr_g = j.value("lr_g", c.lr_g);
    c.lr_d = j.value("lr_d", c.lr_d);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.lambda_gp = j.value("lambda_gp", c.lambda_gp);
    c.beta = j.value("beta", c.beta);
    c.rho0 = j.value("rho0", c.rho0);
    c.rho_growth = j.value("rho_growth", c.rho_growth);
    c.rho_cap = j.value("rho_cap", c.rho_cap);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

void save_lgn(const std::string& path, const LgnModel& model) {
    json extras;
    extras["kind"] = "lgn";
    extras["schema"]["names"] = model.schema.names;
    extras["schema"]["cards"] = model.schema.cards;
    extras["config"] = json::parse(lgn_config_to_json(model.config));
    extras["lagrangian"]["lambda_bar"] = model.lag.lambda_bar;
    extras["lagrangian"]["rho"] = model.lag.rho;
    extras["lagrangian"]["last_h"] = model.lag.last_h;
    write_checkpoint(path, extras.dump(), model.store);
}

LgnModel load_lgn(const std::string& path) {
    CheckpointData data = read_checkpoint(path);
    json extras = json::parse(data.extras_json, nullptr, /*allow_exceptions=*/false);
    if (extras.is_discarded() || extras.value("kind", "") != "lgn")
        throw SchemaMismatch("checkpoint does not hold a label-generation model");

    VariableSchema schema(extras.at("schema").at("names").get<std::vector<std::string>>(),
                          extras.at("schema").at("cards").get<std::vector<std::size_t>>());
    LgnConfig config = lgn_config_from_json(extras.at("config").dump());
    LgnModel model = build_lgn(schema, config);

    std::set<std::string> expected(model.store.names().begin(),
                                   model.store.names().end());
    std::set<std::string> loaded(data.store.names().begin(), data.store.names().end());
    if (expected != loaded)
        throw SchemaMismatch("checkpoint tensor directory does not match the "
                             "architecture described by its config");
    model.store = std::move(data.store);
    const json& lag = extras.at("lagrangian");
    model.lag.lambda_bar = lag.at("lambda_bar").get<double>();
    model.lag.rho = lag.at("rho").get<double>();
    model.lag.last_h = lag.at("last_h").get<double>();
    return model;
}

}  // namespace can
