#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "can/cign.hpp"
#include "can/data.hpp"
#include "can/errors.hpp"
#include "can/image_io.hpp"
#include "can/lgn.hpp"
#include "oracles.hpp"

using can::Binder;
using can::CignConfig;
using can::CignModel;
using can::ImageBatch;
using can::LagrangianState;
using can::Mode;
using can::RendererParams;
using can::Rng;
using can::SyntheticScmSpec;
using can::Tensor;
using can::VariableSchema;

namespace {

VariableSchema label_schema(std::size_t k) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < k; ++i) names.push_back("label" + std::to_string(i));
    return VariableSchema(names, std::vector<std::size_t>(k, 2));
}

/// Small-footprint config for arithmetic tests.
CignConfig tiny_config() {
    CignConfig cfg;
    cfg.noise_width = 1;
    cfg.decoder_width = 5;
    cfg.critic_width = 4;
    cfg.trunk_layers = 1;
    cfg.batch_size = 4;
    return cfg;
}

void zero_params(can::ParameterStore& store, const std::vector<std::string>& names) {
    for (const auto& n : names)
        for (double& v : store.value(n).raw()) v = 0.0;
}

bool same_bits(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (std::size_t i = 0; i < a.raw().size(); ++i)
        if (a.raw()[i] != b.raw()[i]) return false;
    return true;
}

Tensor random_images(std::size_t m, std::size_t pixels, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t = Tensor::zeros(m, pixels);
    for (double& v : t.raw()) v = 2.0 * rng.uniform() - 1.0;
    return t;
}

Tensor random_labels(std::size_t m, std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t = Tensor::zeros(m, k);
    for (double& v : t.raw()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    return t;
}

/// Central-difference check of `analytic` against `value` for every element
/// of every named parameter; returns the worst relative disagreement.
double worst_fd_error(can::ParameterStore& store, const std::vector<std::string>& names,
                      const can::GradientMap& analytic,
                      const std::function<double()>& value, double eps = 1e-5) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [n, g] : analytic) by_name[n] = &g;
    double worst = 0.0;
    for (const auto& name : names) {
        REQUIRE(by_name.count(name) == 1);
        const Tensor& g = *by_name[name];
        Tensor& p = store.value(name);
        REQUIRE(g.raw().size() == p.raw().size());
        for (std::size_t i = 0; i < p.raw().size(); ++i) {
            const double keep = p.raw()[i];
            p.raw()[i] = keep + eps;
            const double hi = value();
            p.raw()[i] = keep - eps;
            const double lo = value();
            p.raw()[i] = keep;
            worst = std::max(worst, oracle::rel_err(g.raw()[i], (hi - lo) / (2.0 * eps)));
        }
    }
    return worst;
}

const double kLn2 = std::log(2.0);

}  // namespace

// ---- construction -----------------------------------------------------------

TEST_CASE("build: structural width covers labels plus noise") {
    CignConfig cfg;
    CignModel wide = can::build_cign(label_schema(9), 128, 16, 16, cfg);
    CHECK(wide.k() == 9);
    CHECK(wide.d() == 128);
    CHECK(wide.n() == 137);
    CHECK(wide.store.value(can::kCignAdjacencyParam).rows() == 137);

    CignModel small = can::build_cign(label_schema(3), 16, 16, 16, cfg);
    CHECK(small.n() == 19);
    CHECK(small.pixels() == 256);
    // final decoder layer emits one value per pixel
    CHECK(small.store.value("cign.g.l6.w").cols() == 256);

    // the explicit noise width wins over the config's
    CignConfig other;
    other.noise_width = 99;
    CignModel overridden = can::build_cign(label_schema(2), 5, 8, 8, other);
    CHECK(overridden.d() == 5);
    CHECK(overridden.config.noise_width == 5);
}

TEST_CASE("build: contracts reject label-free, non-binary and oversized setups") {
    CignConfig cfg;
    CHECK_THROWS_AS(can::build_cign(VariableSchema{}, 4, 8, 8, cfg),
                    can::ContractViolation);
    VariableSchema ternary({"a"}, {3});
    CHECK_THROWS_AS(can::build_cign(ternary, 4, 8, 8, cfg), can::ContractViolation);
    CHECK_THROWS_AS(can::build_cign(label_schema(2), 4, 33, 8, cfg),
                    can::ContractViolation);
    CHECK_THROWS_AS(can::build_cign(label_schema(2), 4, 8, 0, cfg),
                    can::ContractViolation);
    CHECK_THROWS_AS(can::build_cign(label_schema(2), 0, 8, 8, cfg),
                    can::ContractViolation);
}

TEST_CASE("build: parameter name lists split generator from critic, adjacency first") {
    CignModel model = can::build_cign(label_schema(2), 3, 8, 8, tiny_config());
    const auto gen = model.generator_param_names();
    REQUIRE(!gen.empty());
    CHECK(gen[0] == std::string(can::kCignAdjacencyParam));
    for (const auto& n : gen)
        CHECK(n.rfind("cign.d.", 0) == std::string::npos);
    const auto disc = model.discriminator_param_names();
    REQUIRE(!disc.empty());
    for (const auto& n : disc) CHECK(n.rfind("cign.d.", 0) == 0);
}

// ---- generation ---------------------------------------------------------------

TEST_CASE("generation: zero adjacency equals a plain decoder on [labels, noise]") {
    CignModel model = can::build_cign(label_schema(2), 3, 4, 4, tiny_config());
    const std::size_t m = 5;
    const Tensor labels = random_labels(m, 2, 7);
    const Tensor z = random_images(m, 3, 8);  // any finite values work as noise

    ImageBatch out = can::cign_generate(model, labels, z, Mode::kEval);
    REQUIRE(out.images.rows() == m);
    REQUIRE(out.images.cols() == 16);
    CHECK(out.height == 4);
    CHECK(out.width == 4);
    CHECK(same_bits(out.labels, labels));

    // Adjacency starts at zero, so the structural pass is the identity on the
    // concatenated vector and the whole model is just the decoder.
    Tensor cat = Tensor::zeros(m, 5);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t j = 0; j < 2; ++j) cat.at(r, j) = labels.at(r, j);
        for (std::size_t j = 0; j < 3; ++j) cat.at(r, 2 + j) = z.at(r, j);
    }
    can::diff::Tape tape;
    Binder binder(tape, model.store, /*trainable=*/false);
    Tensor direct =
        model.decoder.forward(binder, tape.constant(cat), Mode::kEval).value();
    CHECK(same_bits(out.images, direct));
}

TEST_CASE("generation: conditioning is live, outputs bounded, contracts enforced") {
    CignModel model = can::build_cign(label_schema(2), 3, 4, 4, tiny_config());
    const std::size_t m = 6;
    const Tensor z = random_images(m, 3, 9);
    Tensor ones = Tensor::full(m, 2, 1.0);
    Tensor zeros = Tensor::zeros(m, 2);

    ImageBatch a = can::cign_generate(model, ones, z, Mode::kEval);
    ImageBatch b = can::cign_generate(model, zeros, z, Mode::kEval);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.images.raw().size(); ++i)
        diff = std::max(diff, std::abs(a.images.raw()[i] - b.images.raw()[i]));
    CHECK(diff > 0.0);  // same noise, different labels: decoder input differs

    for (Mode mode : {Mode::kEval, Mode::kTrain}) {
        ImageBatch out = can::cign_generate(model, ones, z, mode);
        for (double v : out.images.raw()) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }

    CHECK_THROWS_AS(can::cign_generate(model, random_labels(m, 3, 1), z, Mode::kEval),
                    can::SchemaMismatch);
    CHECK_THROWS_AS(can::cign_generate(model, ones, random_images(m, 2, 1), Mode::kEval),
                    can::SchemaMismatch);
    CHECK_THROWS_AS(can::cign_generate(model, ones, random_images(m + 1, 3, 1), Mode::kEval),
                    can::SchemaMismatch);
    Tensor bad = zeros;
    bad.at(0, 0) = 0.5;
    CHECK_THROWS_AS(can::cign_generate(model, bad, z, Mode::kEval),
                    can::ContractViolation);
}

TEST_CASE("generation: eval mode is pure, train mode moves the norm buffers") {
    CignModel model = can::build_cign(label_schema(2), 3, 4, 4, tiny_config());
    const Tensor labels = random_labels(4, 2, 3);
    const Tensor z = random_images(4, 3, 4);

    std::map<std::string, Tensor> before;
    for (const auto& n : model.store.names()) before.emplace(n, model.store.value(n));

    ImageBatch first = can::cign_generate(model, labels, z, Mode::kEval);
    ImageBatch second = can::cign_generate(model, labels, z, Mode::kEval);
    CHECK(same_bits(first.images, second.images));
    for (const auto& n : model.store.names())
        CHECK(same_bits(before.at(n), model.store.value(n)));

    can::cign_generate(model, labels, z, Mode::kTrain);
    bool buffer_moved = !same_bits(before.at("cign.g.l1.mean"),
                                   model.store.value("cign.g.l1.mean"));
    CHECK(buffer_moved);
}

// ---- loss closed forms ----------------------------------------------------------

TEST_CASE("classification loss: uniform head costs ln 2 per label per batch") {
    CignConfig cfg = tiny_config();
    cfg.noise_width = 2;
    CignModel model = can::build_cign(label_schema(3), 2, 4, 4, cfg);
    zero_params(model.store, model.discriminator_param_names());

    const std::size_t m = 4;
    const Tensor labels = random_labels(m, 3, 5);
    const Tensor real = random_images(m, 16, 6);
    const Tensor fake = random_images(m, 16, 7);

    can::diff::Tape tape;
    Binder db(tape, model.store, /*trainable=*/false);
    can::diff::Var term =
        can::classification_term(model, db, tape.constant(real), labels);
    CHECK(term.value().item() == doctest::Approx(3.0 * kLn2).epsilon(1e-12));

    can::diff::Var both = can::classification_loss(model, db, real, labels,
                                                   tape.constant(fake), labels);
    CHECK(both.value().item() == doctest::Approx(6.0 * kLn2).epsilon(1e-12));
}

TEST_CASE("classification loss: pass-through critic reduces to hand-computed entropy") {
    // One label, trunk wired so unit 0 carries pixel 0, head scaling it by 40:
    // logit = 40 * pixel0. A pixel of 1 is then classified correctly with
    // near-certainty; a pixel of 0 sits exactly at the ln 2 coin-flip.
    CignConfig cfg = tiny_config();
    cfg.critic_width = 2;
    CignModel model = can::build_cign(label_schema(1), 1, 1, 4, cfg);
    zero_params(model.store, model.discriminator_param_names());
    model.store.value("cign.d.trunk.l0.w").at(0, 0) = 1.0;
    model.store.value("cign.d.cls.l0.w").at(0, 0) = 40.0;

    Tensor real = Tensor::zeros(1, 4);   // pixel0 = 0 -> logit 0
    Tensor fake = Tensor::zeros(1, 4);
    fake.at(0, 0) = 1.0;                 // pixel0 = 1 -> logit 40
    Tensor labels = Tensor::full(1, 1, 1.0);

    can::diff::Tape tape;
    Binder db(tape, model.store, /*trainable=*/false);
    can::diff::Var loss = can::classification_loss(model, db, real, labels,
                                                   tape.constant(fake), labels);
    CHECK(loss.value().item() == doctest::Approx(kLn2).epsilon(1e-9));

    // Both batches classified correctly: the loss all but vanishes.
    can::diff::Var perfect = can::classification_loss(model, db, fake, labels,
                                                      tape.constant(fake), labels);
    CHECK(perfect.value().item() < 1e-9);
    CHECK(perfect.value().item() >= 0.0);
}

TEST_CASE("discriminator loss: zeroed critic reduces to penalty plus label entropy") {
    CignConfig cfg = tiny_config();
    cfg.noise_width = 2;
    cfg.lambda_gp = 3.0;
    cfg.cls_weight = 0.5;
    CignModel model = can::build_cign(label_schema(2), 2, 4, 4, cfg);
    zero_params(model.store, model.discriminator_param_names());

    const std::size_t m = 4;
    const Tensor labels = random_labels(m, 2, 5);
    const Tensor real = random_images(m, 16, 6);
    const Tensor fake = random_images(m, 16, 7);

    can::diff::Tape tape;
    Binder db(tape, model.store, /*trainable=*/false);
    Rng rng(3);
    can::diff::Var loss =
        can::cign_discriminator_loss(model, db, real, labels, fake, labels, rng);
    // scores identically zero; critic gradient zero, so the penalty is
    // lambda * (0 - 1)^2; the classification head is a coin flip per label.
    const double expected = 3.0 * 1.0 + 0.5 * (2.0 * 2.0 * kLn2);
    CHECK(loss.value().item() == doctest::Approx(expected).epsilon(1e-12));

    CHECK_THROWS_AS(can::cign_discriminator_loss(model, db, real, labels,
                                                 random_images(m + 1, 16, 8), labels, rng),
                    can::SchemaMismatch);
    CHECK_THROWS_AS(can::cign_discriminator_loss(model, db, random_images(m, 9, 8),
                                                 labels, fake, labels, rng),
                    can::SchemaMismatch);
}

TEST_CASE("generator loss: constant critic with a symmetric two-cycle adjacency") {
    // k = d = 1 gives a 2-node structural model; a symmetric off-diagonal
    // weight of 2^(-1/2) makes the acyclicity value 1/2 (trace of the squared
    // unit-curvature walk matrix). With the critic pinned at 0.7 and the
    // classification head at the coin flip, every term is known in closed form.
    CignConfig cfg = tiny_config();
    cfg.cls_weight = 2.0;
    CignModel model = can::build_cign(label_schema(1), 1, 1, 4, cfg);
    zero_params(model.store, model.discriminator_param_names());
    model.store.value("cign.d.adv.l0.b").at(0, 0) = 0.7;
    const double w = std::pow(2.0, -0.5);
    Tensor& a = model.store.value(can::kCignAdjacencyParam);
    a.at(0, 1) = w;
    a.at(1, 0) = w;

    const std::size_t m = 4;
    const Tensor labels = random_labels(m, 1, 2);
    const Tensor z = random_images(m, 1, 3);
    LagrangianState lag{2.0, 4.0, -1.0};

    can::diff::Tape tape;
    Binder gb(tape, model.store, /*trainable=*/true);
    Binder db(tape, model.store, /*trainable=*/false);
    can::diff::Var loss = can::cign_generator_loss(model, gb, db, labels, z, lag);

    // -0.7 (critic) + 2 * ln2 (classification) + 2 * 0.5 + (4/2) * 0.25 = 0.8 + 2 ln2
    const double expected = -0.7 + 2.0 * kLn2 + 2.0 * 0.5 + 2.0 * 0.25;
    CHECK(loss.value().item() == doctest::Approx(expected).epsilon(1e-9));
}

// ---- gradient checks -------------------------------------------------------------

TEST_CASE("generator loss: gradients match finite differences for every parameter") {
    CignConfig cfg = tiny_config();
    cfg.cls_weight = 0.7;
    cfg.seed = 13;
    CignModel model = can::build_cign(label_schema(1), 1, 1, 4, cfg);
    Tensor& a = model.store.value(can::kCignAdjacencyParam);
    a.at(0, 1) = 0.6;
    a.at(1, 0) = -0.3;
    LagrangianState lag{0.3, 2.0, -1.0};

    const std::size_t m = 3;
    const Tensor labels = random_labels(m, 1, 21);
    const Tensor z = random_images(m, 1, 22);

    auto value = [&]() {
        can::diff::Tape tape;
        Binder gb(tape, model.store, true);
        Binder db(tape, model.store, false);
        return can::cign_generator_loss(model, gb, db, labels, z, lag).value().item();
    };

    can::diff::Tape tape;
    Binder gb(tape, model.store, true);
    Binder db(tape, model.store, false);
    can::diff::Var loss = can::cign_generator_loss(model, gb, db, labels, z, lag);
    can::GradientMap grads = can::trainable_gradients(tape, loss, gb, model.store);

    const double worst = worst_fd_error(model.store, model.generator_param_names(),
                                        grads, value);
    CHECK(worst < 1e-4);
}

TEST_CASE("discriminator loss: gradients match finite differences for every parameter") {
    CignConfig cfg = tiny_config();
    cfg.cls_weight = 0.7;
    cfg.lambda_gp = 1.5;
    cfg.seed = 17;
    CignModel model = can::build_cign(label_schema(1), 1, 1, 4, cfg);

    const std::size_t m = 3;
    const Tensor labels = random_labels(m, 1, 31);
    const Tensor real = random_images(m, 4, 32);
    const Tensor fake = random_images(m, 4, 33);

    // reseed per evaluation so the interpolation points are held fixed
    auto value = [&]() {
        can::diff::Tape tape;
        Binder db(tape, model.store, true);
        Rng rng(77);
        return can::cign_discriminator_loss(model, db, real, labels, fake, labels, rng)
            .value()
            .item();
    };

    can::diff::Tape tape;
    Binder db(tape, model.store, true);
    Rng rng(77);
    can::diff::Var loss =
        can::cign_discriminator_loss(model, db, real, labels, fake, labels, rng);
    can::GradientMap grads = can::trainable_gradients(tape, loss, db, model.store);

    const double worst = worst_fd_error(model.store, model.discriminator_param_names(),
                                        grads, value);
    CHECK(worst < 1e-4);
}

// ---- training --------------------------------------------------------------------

namespace {

ImageBatch smoke_dataset(std::size_t m, std::uint64_t seed) {
    SyntheticScmSpec spec;
    spec.names = {"shape", "intensity", "position"};
    spec.cards = {2, 2, 2};
    spec.noise = {0.3, 0.3, 0.3};
    spec.edges = {{{0, 1}, 1.2}};
    RendererParams rp;
    rp.height = 8;
    rp.width = 8;
    return can::synth_image_dataset(spec, rp, m, seed);
}

CignConfig smoke_config() {
    CignConfig cfg;
    cfg.noise_width = 4;
    cfg.decoder_width = 24;
    cfg.critic_width = 16;
    cfg.trunk_layers = 2;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.critic_steps = 2;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("training: smoke run is finite, deterministic and checkpointable") {
    const ImageBatch data = smoke_dataset(64, 11);
    const CignConfig cfg = smoke_config();

    can::CignTrainResult first = can::train_cign(data, cfg);
    REQUIRE(first.history.size() == 3);
    for (const auto& e : first.history) {
        CHECK(std::isfinite(e.d_loss));
        CHECK(std::isfinite(e.g_loss));
        CHECK(e.h >= 0.0);
        CHECK(e.rho >= 1.0);
    }
    CHECK(first.model.schema.names ==
          std::vector<std::string>{"label0", "label1", "label2"});

    can::CignTrainResult second = can::train_cign(data, cfg);
    for (const auto& name : first.model.store.names())
        CHECK(same_bits(first.model.store.value(name), second.model.store.value(name)));

    const std::string path = "test_cign_ckpt.bin";
    can::save_cign(path, first.model);
    CignModel loaded = can::load_cign(path);
    CHECK(loaded.height == 8);
    CHECK(loaded.width == 8);
    CHECK(loaded.lag.lambda_bar == first.model.lag.lambda_bar);
    CHECK(loaded.lag.rho == first.model.lag.rho);
    CHECK(loaded.lag.last_h == first.model.lag.last_h);

    const Tensor labels = random_labels(2, 3, 41);
    const Tensor z = random_images(2, 4, 42);
    CHECK(same_bits(can::cign_generate(first.model, labels, z, Mode::kEval).images,
                    can::cign_generate(loaded, labels, z, Mode::kEval).images));
    std::remove(path.c_str());

    // a checkpoint of the label generator is not an image model
    const std::string other = "test_cign_wrong_kind.bin";
    can::LgnConfig lgn_cfg;
    lgn_cfg.hidden_width = 8;
    lgn_cfg.head_width = 4;
    lgn_cfg.g_hidden_layers = 1;
    lgn_cfg.d_hidden_layers = 1;
    can::save_lgn(other, can::build_lgn(label_schema(2), lgn_cfg));
    CHECK_THROWS_AS(can::load_cign(other), can::SchemaMismatch);
    std::remove(other.c_str());
}

TEST_CASE("training: rejects rows that do not match their declared shape") {
    ImageBatch data = smoke_dataset(8, 3);
    CignConfig cfg = smoke_config();
    cfg.epochs = 1;

    ImageBatch bad_shape = data;
    bad_shape.width = 7;
    CHECK_THROWS_AS(can::train_cign(bad_shape, cfg), can::SchemaMismatch);

    ImageBatch bad_range = data;
    bad_range.images.at(0, 0) = std::nan("");
    CHECK_THROWS_AS(can::train_cign(bad_range, cfg), can::ContractViolation);

    ImageBatch bad_labels = data;
    bad_labels.labels.at(0, 0) = 0.25;
    CHECK_THROWS_AS(can::train_cign(bad_labels, cfg), can::ContractViolation);
}

TEST_CASE("training: zero classification weight leaves the classifier head untouched") {
    const ImageBatch data = smoke_dataset(32, 13);
    CignConfig cfg = smoke_config();
    cfg.epochs = 2;
    cfg.cls_weight = 0.0;

    can::CignTrainResult result = can::train_cign(data, cfg);
    CignModel reference =
        can::build_cign(label_schema(3), cfg.noise_width, 8, 8, cfg);

    for (const auto& name : result.model.cls_head.param_names())
        CHECK(same_bits(result.model.store.value(name), reference.store.value(name)));
    // while the adversarial side did train
    bool trunk_moved = false;
    for (const auto& name : result.model.trunk.param_names())
        if (!same_bits(result.model.store.value(name), reference.store.value(name)))
            trunk_moved = true;
    CHECK(trunk_moved);
}

// ---- image io --------------------------------------------------------------------

TEST_CASE("image io: byte mapping clamps and rounds") {
    Tensor img = Tensor::matrix({{-1.0, 0.0, 1.0}, {-1.2, 1.2, 0.5}});
    const std::vector<unsigned char> bytes = can::gray_bytes(img);
    const std::vector<unsigned char> expected{0, 128, 255, 0, 255, 191};
    CHECK(bytes == expected);
    CHECK_THROWS_AS(can::gray_bytes(Tensor::zeros(0, 0)), can::ContractViolation);
}

TEST_CASE("image io: pgm golden bytes") {
    Tensor img = Tensor::matrix({{-1.0, 0.0, 1.0}, {-1.2, 1.2, 0.5}});
    const std::string encoded = can::pgm_encode(img);
    std::string expected = "P5\n3 2\n255\n";
    for (unsigned char b : {0, 128, 255, 0, 255, 191})
        expected.push_back(static_cast<char>(b));
    CHECK(encoded == expected);

    const std::string path = "test_cign_golden.pgm";
    can::write_pgm(path, img);
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::string on_disk((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    CHECK(on_disk == expected);
    std::remove(path.c_str());

    CHECK_THROWS_AS(can::write_pgm("/nonexistent-dir/x.pgm", img),
                    can::ContractViolation);
}

TEST_CASE("image io: png structure parses and pixels survive the round trip") {
    Tensor img = Tensor::matrix({{-1.0, 0.0, 1.0}, {-1.2, 1.2, 0.5}});
    const std::string png = can::png_encode_gray(img);

    const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    REQUIRE(png.size() > 8);
    for (std::size_t i = 0; i < 8; ++i)
        CHECK(static_cast<unsigned char>(png[i]) == sig[i]);

    auto be32 = [&](std::size_t off) {
        return (static_cast<std::uint32_t>(static_cast<unsigned char>(png[off])) << 24) |
               (static_cast<std::uint32_t>(static_cast<unsigned char>(png[off + 1])) << 16) |
               (static_cast<std::uint32_t>(static_cast<unsigned char>(png[off + 2])) << 8) |
               static_cast<std::uint32_t>(static_cast<unsigned char>(png[off + 3]));
    };

    // IHDR: 13-byte payload with width 3, height 2, depth 8, grayscale
    CHECK(be32(8) == 13);
    CHECK(png.substr(12, 4) == "IHDR");
    CHECK(be32(16) == 3);
    CHECK(be32(20) == 2);
    CHECK(static_cast<unsigned char>(png[24]) == 8);
    CHECK(static_cast<unsigned char>(png[25]) == 0);
    uLong ihdr_crc = crc32(0L, Z_NULL, 0);
    ihdr_crc = crc32(ihdr_crc, reinterpret_cast<const Bytef*>(png.data() + 12), 17);
    CHECK(be32(29) == static_cast<std::uint32_t>(ihdr_crc));

    // IDAT: inflate and compare to filter-prefixed scanlines
    const std::size_t idat_len = be32(33);
    CHECK(png.substr(37, 4) == "IDAT");
    std::vector<unsigned char> raw(2 * (3 + 1));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    const int rc = uncompress(raw.data(), &raw_len,
                              reinterpret_cast<const Bytef*>(png.data() + 41),
                              static_cast<uLong>(idat_len));
    REQUIRE(rc == Z_OK);
    REQUIRE(raw_len == raw.size());
    const std::vector<unsigned char> expected{0, 0, 128, 255, 0, 0, 255, 191};
    CHECK(raw == expected);

    // IEND closes the stream
    CHECK(png.substr(png.size() - 8, 4) == "IEND");

    const std::string path = "test_cign_golden.png";
    can::write_png_gray(path, img);
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::string on_disk((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    CHECK(on_disk == png);
    std::remove(path.c_str());
}

TEST_CASE("image io: batch rows extract as height x width tensors") {
    ImageBatch batch;
    batch.height = 2;
    batch.width = 3;
    batch.images = Tensor::matrix({{1, 2, 3, 4, 5, 6}, {7, 8, 9, 10, 11, 12}});
    batch.labels = Tensor::zeros(2, 1);

    Tensor second = can::image_from_batch(batch, 1);
    REQUIRE(second.rows() == 2);
    REQUIRE(second.cols() == 3);
    CHECK(second.at(0, 0) == 7);
    CHECK(second.at(0, 2) == 9);
    CHECK(second.at(1, 0) == 10);
    CHECK(second.at(1, 2) == 12);

    CHECK_THROWS_AS(can::image_from_batch(batch, 2), can::ContractViolation);
    batch.width = 4;
    CHECK_THROWS_AS(can::image_from_batch(batch, 0), can::SchemaMismatch);
}

// ---- config ----------------------------------------------------------------------

TEST_CASE("config: json round trip preserves every field") {
    CignConfig cfg;
    cfg.noise_width = 7;
    cfg.decoder_width = 33;
    cfg.critic_width = 12;
    cfg.trunk_layers = 3;
    cfg.epochs = 42;
    cfg.batch_size = 10;
    cfg.critic_steps = 4;
    cfg.lr_g = 0.002;
    cfg.lr_d = 0.0005;
    cfg.rms_decay = 0.95;
    cfg.lambda_gp = 7.5;
    cfg.cls_weight = 0.25;
    cfg.beta = 2.0;
    cfg.rho0 = 0.5;
    cfg.rho_growth = 5.0;
    cfg.rho_cap = 1e5;
    cfg.seed = 99;

    const CignConfig back = can::cign_config_from_json(can::cign_config_to_json(cfg));
    CHECK(back.noise_width == 7);
    CHECK(back.decoder_width == 33);
    CHECK(back.critic_width == 12);
    CHECK(back.trunk_layers == 3);
    CHECK(back.epochs == 42);
    CHECK(back.batch_size == 10);
    CHECK(back.critic_steps == 4);
    CHECK(back.lr_g == 0.002);
    CHECK(back.lr_d == 0.0005);
    CHECK(back.rms_decay == 0.95);
    CHECK(back.lambda_gp == 7.5);
    CHECK(back.cls_weight == 0.25);
    CHECK(back.beta == 2.0);
    CHECK(back.rho0 == 0.5);
    CHECK(back.rho_growth == 5.0);
    CHECK(back.rho_cap == 1e5);
    CHECK(back.seed == 99);
}

TEST_CASE("config: malformed documents and bad values are rejected") {
    CHECK_THROWS_AS(can::cign_config_from_json("not json{"), can::ParseError);
    CHECK_THROWS_AS(can::cign_config_from_json(R"({"rms_decay": 1.5})"),
                    can::ContractViolation);
    CHECK_THROWS_AS(can::cign_config_from_json(R"({"batch_size": 1})"),
                    can::ContractViolation);

    CignConfig bad;
    bad.cls_weight = -1.0;
    CHECK_THROWS_AS(bad.validate(), can::ContractViolation);
}
