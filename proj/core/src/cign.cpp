#include "can/cign.hpp"

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

void CignConfig::validate() const {
    if (noise_width < 1 || decoder_width < 1 || critic_width < 1 || trunk_layers < 1)
        throw ContractViolation("network sizes must be positive");
    if (epochs < 1 || batch_size < 2 || critic_steps < 1)
        throw ContractViolation("epochs, batch size and critic steps must be positive "
                                "(batches of at least 2 rows)");
    if (!(lr_g > 0.0) || !(lr_d > 0.0))
        throw ContractViolation("learning rates must be positive");
    if (!(rms_decay > 0.0 && rms_decay < 1.0))
        throw ContractViolation("rmsprop decay must lie in (0, 1)");
    if (!(lambda_gp >= 0.0)) throw ContractViolation("penalty coefficient must be >= 0");
    if (!(cls_weight >= 0.0))
        throw ContractViolation("classification weight must be >= 0");
    if (!(beta > 0.0)) throw ContractViolation("acyclicity curvature must be positive");
    if (!(rho0 > 0.0) || !(rho_growth >= 1.0) || !(rho_cap >= rho0))
        throw ContractViolation("dual-update schedule must have rho0 > 0, growth >= 1, "
                                "cap >= rho0");
}

// ---- model construction -----------------------------------------------------

namespace {

std::vector<LayerSpec> decoder_layers(std::size_t in, std::size_t width,
                                      std::size_t pixels) {
    return {LayerSpec::dense(in, width),      LayerSpec::batch_norm(width),
            LayerSpec::relu(),                LayerSpec::dense(width, width),
            LayerSpec::batch_norm(width),     LayerSpec::relu(),
            LayerSpec::dense(width, pixels),  LayerSpec::tanh()};
}

std::vector<LayerSpec> trunk_spec(std::size_t pixels, std::size_t width,
                                  std::size_t depth) {
    std::vector<LayerSpec> layers;
    std::size_t in = pixels;
    for (std::size_t l = 0; l < depth; ++l) {
        layers.push_back(LayerSpec::dense(in, width));
        layers.push_back(LayerSpec::leaky_relu(0.2));
        in = width;
    }
    return layers;
}

Tensor offdiag_mask(std::size_t n) {
    Tensor m = Tensor::full(n, n, 1.0);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 0.0;
    return m;
}

/// The adjacency leaf with its diagonal forced to zero inside the graph, so
/// no optimizer step can introduce self-loops.
Var bound_adjacency(const CignModel& model, Binder& binder) {
    Var raw = binder(kCignAdjacencyParam);
    return mul(raw, binder.tape().constant(offdiag_mask(model.n())));
}

void check_labels(const CignModel& model, const Tensor& labels) {
    if (labels.cols() != model.k())
        throw SchemaMismatch("label width " + std::to_string(labels.cols()) +
                             " does not match label count " + std::to_string(model.k()));
    for (double v : labels.raw())
        if (v != 0.0 && v != 1.0)
            throw ContractViolation("labels must be 0/1, got " + std::to_string(v));
}

void check_images(const CignModel& model, const Tensor& images, const char* which) {
    if (images.cols() != model.pixels())
        throw SchemaMismatch(std::string(which) + " batch width " +
                             std::to_string(images.cols()) +
                             " does not match pixel count " +
                             std::to_string(model.pixels()));
}

/// Critic score: adversarial head on the shared trunk (batch-norm free, so
/// the gradient penalty's per-row reading stays valid).
Var critic_score(const CignModel& model, Binder& binder, Var x) {
    return model.adv_head.forward(binder, model.trunk.forward(binder, x, Mode::kTrain),
                                  Mode::kTrain);
}

Tensor gaussian_noise(std::size_t m, std::size_t d, Rng& rng) {
    Tensor z = Tensor::zeros(m, d);
    for (double& v : z.raw()) v = rng.normal();
    return z;
}

}  // namespace

std::vector<std::string> CignModel::generator_param_names() const {
    std::vector<std::string> names{kCignAdjacencyParam};
    for (const std::string& p : decoder.param_names()) names.push_back(p);
    return names;
}

std::vector<std::string> CignModel::discriminator_param_names() const {
    std::vector<std::string> names;
    for (const std::string& p : trunk.param_names()) names.push_back(p);
    for (const std::string& p : adv_head.param_names()) names.push_back(p);
    for (const std::string& p : cls_head.param_names()) names.push_back(p);
    return names;
}

Tensor CignModel::adjacency() const {
    Tensor a = store.value(kCignAdjacencyParam);
    for (std::size_t i = 0; i < a.rows(); ++i) a.at(i, i) = 0.0;
    return a;
}

CignModel build_cign(const VariableSchema& schema, std::size_t noise_width,
                     std::size_t height, std::size_t width, const CignConfig& config) {
    if (schema.size() == 0)
        throw ContractViolation("conditional model requires at least one label");
    for (std::size_t c : schema.cards)
        if (c != 2) throw ContractViolation("labels must be binary (cardinality 2)");
    if (height < 1 || width < 1 || height > 32 || width > 32)
        throw ContractViolation("image shape must lie between 1x1 and 32x32");

    CignModel model;
    model.schema = schema;
    model.height = height;
    model.width = width;
    model.config = config;
    model.config.noise_width = noise_width;
    model.config.validate();
    model.lag = LagrangianState{0.0, model.config.rho0, -1.0};

    const std::size_t n = model.n();
    Rng rng(model.config.seed);
    model.store.create(kCignAdjacencyParam, Tensor::zeros(n, n));
    model.decoder = Network(
        "cign.g", decoder_layers(n, model.config.decoder_width, model.pixels()));
    model.decoder.init_params(model.store, rng);
    model.trunk = Network("cign.d.trunk", trunk_spec(model.pixels(),
                                                     model.config.critic_width,
                                                     model.config.trunk_layers));
    model.trunk.init_params(model.store, rng);
    model.adv_head =
        Network("cign.d.adv", {LayerSpec::dense(model.config.critic_width, 1)});
    model.adv_head.init_params(model.store, rng);
    model.cls_head =
        Network("cign.d.cls", {LayerSpec::dense(model.config.critic_width, model.k())});
    model.cls_head.init_params(model.store, rng);
    return model;
}

// ---- generation -------------------------------------------------------------

diff::Var cign_generate_node(const CignModel& model, Binder& binder,
                             const Tensor& labels, diff::Var z, Mode mode) {
    check_labels(model, labels);
    if (z.value().cols() != model.d())
        throw SchemaMismatch("noise width " + std::to_string(z.value().cols()) +
                             " does not match configured width " +
                             std::to_string(model.d()));
    if (labels.rows() != z.value().rows())
        throw SchemaMismatch("label and noise batches differ in size");

    const std::size_t m = labels.rows();
    const std::size_t k = model.k();
    const std::size_t n = model.n();
    Tape& tape = binder.tape();

    // Labels are intervened roots: mask 0 (clamped to c), noise coords mask 1.
    Tensor alpha = Tensor::zeros(1, n);
    for (std::size_t j = k; j < n; ++j) alpha.at(0, j) = 1.0;
    Tensor c = Tensor::zeros(m, n);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < k; ++j) c.at(r, j) = labels.at(r, j);

    std::vector<Var> z_parts{tape.constant(Tensor::zeros(m, k)), z};
    Var z_full = concat_cols(z_parts);
    Var a = bound_adjacency(model, binder);
    Var x_pre = scm_transform_node(a, z_full, alpha, c);
    return model.decoder.forward(binder, x_pre, mode);
}

ImageBatch cign_generate(const CignModel& model, const Tensor& labels, const Tensor& z,
                         Mode mode) {
    Tape tape;
    // Binding as constants only; eval mode does not touch the store.
    Binder binder(tape, const_cast<ParameterStore&>(model.store), /*trainable=*/false);
    Tensor images =
        cign_generate_node(model, binder, labels, tape.constant(z), mode).value();
    return ImageBatch{std::move(images), labels, model.height, model.width};
}

// ---- losses -------------------------------------------------------------------

diff::Var classification_term(const CignModel& model, Binder& disc_binder, diff::Var x,
                              const Tensor& labels) {
    check_labels(model, labels);
    check_images(model, x.value(), "classified");
    if (x.value().rows() != labels.rows())
        throw SchemaMismatch("batch and labels differ in size");
    Tape& tape = disc_binder.tape();
    Var logits = model.cls_head.forward(
        disc_binder, model.trunk.forward(disc_binder, x, Mode::kTrain), Mode::kTrain);
    Var y = tape.constant(labels);
    // Per-label binary cross-entropy from logits: softplus(l) - y*l.
    Var per_cell = sub(softplus(logits), mul(y, logits));
    return scale(sum_all(per_cell), 1.0 / static_cast<double>(labels.rows()));
}

diff::Var classification_loss(const CignModel& model, Binder& disc_binder,
                              const Tensor& real, const Tensor& real_labels,
                              diff::Var fake, const Tensor& fake_labels) {
    Tape& tape = disc_binder.tape();
    Var real_term =
        classification_term(model, disc_binder, tape.constant(real), real_labels);
    Var fake_term = classification_term(model, disc_binder, fake, fake_labels);
    return add(real_term, fake_term);
}

diff::Var cign_discriminator_loss(const CignModel& model, Binder& disc_binder,
                                  const Tensor& real, const Tensor& real_labels,
                                  const Tensor& fake, const Tensor& fake_labels,
                                  Rng& rng) {
    check_images(model, real, "real");
    check_images(model, fake, "fake");
    if (real.rows() != fake.rows())
        throw SchemaMismatch("real and fake batches differ in size");
    Tape& tape = disc_binder.tape();
    Var real_scores = critic_score(model, disc_binder, tape.constant(real));
    Var fake_scores = critic_score(model, disc_binder, tape.constant(fake));
    Var loss = sub(mean_all(fake_scores), mean_all(real_scores));
    if (model.config.lambda_gp > 0.0) {
        const Tensor x_hat = interpolate(real, fake, rng);
        const CriticFn critic = [&model](Binder& b, Var x) {
            return critic_score(model, b, x);
        };
        loss = add(loss, gradient_penalty(critic, disc_binder, x_hat,
                                          model.config.lambda_gp));
    }
    if (model.config.cls_weight > 0.0) {
        Var cls = classification_loss(model, disc_binder, real, real_labels,
                                      tape.constant(fake), fake_labels);
        loss = add(loss, scale(cls, model.config.cls_weight));
    }
    if (!loss.value().all_finite())
        throw NonFiniteLoss("critic loss is not finite");
    return loss;
}

diff::Var cign_generator_loss(const CignModel& model, Binder& gen_binder,
                              Binder& disc_binder, const Tensor& labels, const Tensor& z,
                              const LagrangianState& lag) {
    Tape& tape = gen_binder.tape();
    Var x = cign_generate_node(model, gen_binder, labels, tape.constant(z), Mode::kTrain);
    Var loss = neg(mean_all(critic_score(model, disc_binder, x)));
    // The real-batch classification term has zero generator gradient, so the
    // generator objective carries only the generated-batch term.
    if (model.config.cls_weight > 0.0) {
        Var cls = classification_term(model, disc_binder, x, labels);
        loss = add(loss, scale(cls, model.config.cls_weight));
    }
    Var h = acyclicity_penalty_node(bound_adjacency(model, gen_binder),
                                    model.config.beta);
    Var constraint = add(scale(h, lag.lambda_bar), scale(square(h), 0.5 * lag.rho));
    loss = add(loss, constraint);
    if (!loss.value().all_finite())
        throw NonFiniteLoss("generator loss is not finite");
    return loss;
}

// ---- training ------------------------------------------------------------------

CignTrainResult train_cign(const ImageBatch& data, const CignConfig& config) {
    config.validate();
    const std::size_t m = data.images.rows();
    const std::size_t k = data.labels.cols();
    if (m < 2) throw ContractViolation("training needs at least 2 rows");
    if (data.labels.rows() != m)
        throw SchemaMismatch("images and labels differ in row count");
    if (data.images.cols() != data.height * data.width)
        throw SchemaMismatch("image width does not match height x width");
    // Real images should be roughly tanh-scaled but the synthetic renderer's
    // additive noise is unclamped, so only finiteness is enforced here.
    if (!data.images.all_finite())
        throw ContractViolation("image values must be finite");

    std::vector<std::string> names;
    names.reserve(k);
    for (std::size_t i = 0; i < k; ++i) names.push_back("label" + std::to_string(i));
    VariableSchema schema(std::move(names), std::vector<std::size_t>(k, 2));

    CignTrainResult result;
    result.model = build_cign(schema, config.noise_width, data.height, data.width, config);
    CignModel& model = result.model;
    check_labels(model, data.labels);

    const std::size_t batch = std::min(config.batch_size, m);
    const std::size_t batches_per_epoch = m / batch;

    Rng rng(config.seed ^ 0xd1b54a32d192ed03ull);  // training stream
    const RmspropConfig d_rms{config.lr_d, config.rms_decay, 1e-8};
    const RmspropConfig g_rms{config.lr_g, config.rms_decay, 1e-8};

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
                Tensor rb = Tensor::zeros(batch, data.images.cols());
                Tensor lb = Tensor::zeros(batch, k);
                for (std::size_t r = 0; r < batch; ++r) {
                    const std::size_t src = order[b * batch + r];
                    for (std::size_t c = 0; c < data.images.cols(); ++c)
                        rb.at(r, c) = data.images.at(src, c);
                    for (std::size_t c = 0; c < k; ++c)
                        lb.at(r, c) = data.labels.at(src, c);
                }

                // critic step; the generated rows reuse the real batch labels
                {
                    const Tensor z = gaussian_noise(batch, model.d(), rng);
                    const Tensor fake = cign_generate(model, lb, z, Mode::kTrain).images;
                    Tape tape;
                    Binder db(tape, model.store, /*trainable=*/true);
                    Var loss = cign_discriminator_loss(model, db, rb, lb, fake, lb, rng);
                    rmsprop_step(model.store,
                                 trainable_gradients(tape, loss, db, model.store), d_rms);
                    d_sum += loss.value().item();
                    ++d_count;
                }

                // one generator step per `critic_steps` critic steps
                if (++critic_tick % config.critic_steps == 0) {
                    const Tensor z = gaussian_noise(batch, model.d(), rng);
                    Tape tape;
                    Binder gb(tape, model.store, /*trainable=*/true);
                    Binder dbc(tape, model.store, /*trainable=*/false);
                    Var loss = cign_generator_loss(model, gb, dbc, lb, z, model.lag);
                    rmsprop_step(model.store,
                                 trainable_gradients(tape, loss, gb, model.store), g_rms);
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

// ---- serialization -------------------------------------------------------------

std::string cign_config_to_json(const CignConfig& c) {
    json j;
    j["noise_width"] = c.noise_width;
    j["decoder_width"] = c.decoder_width;
    j["critic_width"] = c.critic_width;
    j["trunk_layers"] = c.trunk_layers;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["critic_steps"] = c.critic_steps;
    j["lr_g"] = c.lr_g;
    j["lr_d"] = c.lr_d;
    j["rms_decay"] = c.rms_decay;
    j["lambda_gp"] = c.lambda_gp;
    j["cls_weight"] = c.cls_weight;
    j["beta"] = c.beta;
    j["rho0"] = c.rho0;
    j["rho_growth"] = c.rho_growth;
    j["rho_cap"] = c.rho_cap;
    j["seed"] = c.seed;
    return j.dump();
}

CignConfig cign_config_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ParseError("config is not valid JSON", 0, 0);
    CignConfig c;
    c.noise_width = j.value("noise_width", c.noise_width);
    c.decoder_width = j.value("decoder_width", c.decoder_width);
    c.critic_width = j.value("critic_width", c.critic_width);
    c.trunk_layers = j.value("trunk_layers", c.trunk_layers);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.critic_steps = j.value("critic_steps", c.critic_steps);
    c.lr_g = j.value("lr_g", c.lr_g);
    c.lr_d = j.value("lr_d", c.lr_d);
    c.rms_decay = j.value("rms_decay", c.rms_decay);
    c.lambda_gp = j.value("lambda_gp", c.lambda_gp);
    c.cls_weight = j.value("cls_weight", c.cls_weight);
    c.beta = j.value("beta", c.beta);
    c.rho0 = j.value("rho0", c.rho0);
    c.rho_growth = j.value("rho_growth", c.rho_growth);
    c.rho_cap = j.value("rho_cap", c.rho_cap);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

void save_cign(const std::string& path, const CignModel& model) {
    json extras;
    extras["kind"] = "cign";
    extras["schema"]["names"] = model.schema.names;
    extras["schema"]["cards"] = model.schema.cards;
    extras["height"] = model.height;
    extras["width"] = model.width;
    extras["config"] = json::parse(cign_config_to_json(model.config));
    extras["lagrangian"]["lambda_bar"] = model.lag.lambda_bar;
    extras["lagrangian"]["rho"] = model.lag.rho;
    extras["lagrangian"]["last_h"] = model.lag.last_h;
    write_checkpoint(path, extras.dump(), model.store);
}

CignModel load_cign(const std::string& path) {
    CheckpointData data = read_checkpoint(path);
    json extras = json::parse(data.extras_json, nullptr, /*allow_exceptions=*/false);
    if (extras.is_discarded() || extras.value("kind", "") != "cign")
        throw SchemaMismatch("checkpoint does not hold a conditional image model");

    VariableSchema schema(extras.at("schema").at("names").get<std::vector<std::string>>(),
                          extras.at("schema").at("cards").get<std::vector<std::size_t>>());
    CignConfig config = cign_config_from_json(extras.at("config").dump());
    const std::size_t height = extras.at("height").get<std::size_t>();
    const std::size_t width = extras.at("width").get<std::size_t>();
    CignModel model = build_cign(schema, config.noise_width, height, width, config);

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
