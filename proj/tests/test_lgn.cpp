#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "can/data.hpp"
#include "can/errors.hpp"
#include "can/graph.hpp"
#include "can/lgn.hpp"
#include "can/scm.hpp"
#include "oracles.hpp"

using can::Binder;
using can::CategoricalDataset;
using can::CompiledIntervention;
using can::LabelAssignments;
using can::LagrangianState;
using can::LgnConfig;
using can::LgnModel;
using can::Mode;
using can::Rng;
using can::SyntheticScmSpec;
using can::Tensor;
using can::VariableSchema;

namespace {

VariableSchema binary_schema(std::size_t n) {
    std::vector<std::string> names;
    std::vector<std::size_t> cards(n, 2);
    for (std::size_t i = 0; i < n; ++i) names.push_back("v" + std::to_string(i));
    return VariableSchema(names, cards);
}

LgnConfig small_config() {
    LgnConfig cfg;
    cfg.hidden_width = 24;
    cfg.head_width = 12;
    cfg.d_hidden_layers = 2;
    cfg.g_hidden_layers = 2;
    return cfg;
}

void zero_params(can::ParameterStore& store, const std::vector<std::string>& names) {
    for (const auto& n : names)
        for (double& v : store.value(n).raw()) v = 0.0;
}

/// Trains one small chain model (v0 -> v1, strong coupling) and caches it.
struct TrainedChain {
    can::LgnTrainResult result;
    CategoricalDataset data;
};

const TrainedChain& trained_chain() {
    static TrainedChain cached = [] {
        SyntheticScmSpec spec;
        spec.names = {"a", "b"};
        spec.cards = {2, 2};
        spec.noise = {0.0, 0.0};
        spec.edges = {{{0, 1}, 3.0}};
        TrainedChain t;
        t.data = can::synth_scm_dataset(spec, 2560, 21);
        LgnConfig cfg = small_config();
        cfg.epochs = 400;
        cfg.lr_g = 0.002;
        cfg.lr_d = 0.002;
        cfg.seed = 4;
        t.result = can::train_lgn(t.data, cfg);
        return t;
    }();
    return cached;
}

std::map<std::vector<int>, double> joint_freq(const std::vector<std::vector<int>>& rows) {
    std::map<std::vector<int>, double> f;
    for (const auto& r : rows) f[r] += 1.0 / static_cast<double>(rows.size());
    return f;
}

double marginal1(const std::vector<std::vector<int>>& rows, std::size_t var) {
    double p = 0.0;
    for (const auto& r : rows) p += r[var] == 1 ? 1.0 : 0.0;
    return p / static_cast<double>(rows.size());
}

}  // namespace

TEST_CASE("architecture: widths follow the schema") {
    // Nine binary labels: generator noise 9-wide, critic reads 18 columns.
    LgnModel m9 = can::build_lgn(binary_schema(9), small_config());
    CHECK(m9.n() == 9);
    CHECK(m9.encoded_width() == 18);
    CHECK(m9.heads.size() == 9);
    CHECK(m9.disc.layers()[0].fan_in == 18);
    CHECK(m9.disc.layers().back().fan_out == 1);
    CHECK(m9.store.value(can::kAdjacencyParam).rows() == 9);

    // 20-variable clinical schema: critic input 60.
    std::vector<std::size_t> cards = {2, 2, 3, 3, 5, 2, 2, 3, 3, 2,
                                      5, 6, 2, 3, 2, 3, 4, 3, 3, 2};
    std::vector<std::string> names;
    for (std::size_t i = 0; i < 20; ++i) names.push_back("c" + std::to_string(i));
    LgnModel mc = can::build_lgn(VariableSchema(names, cards), small_config());
    CHECK(mc.encoded_width() == 60);
    CHECK(mc.disc.layers()[0].fan_in == 60);
    CHECK(mc.heads[11].layers()[4].fan_out == 6);

    // Degenerate single binary variable.
    LgnModel m1 = can::build_lgn(binary_schema(1), small_config());
    CHECK(m1.n() == 1);
    CHECK(m1.heads.size() == 1);
    CHECK(m1.heads[0].layers()[4].fan_out == 2);

    // Shared-trunk variant still exposes one softmax segment per variable.
    LgnConfig faithful = small_config();
    faithful.structured_heads = false;
    LgnModel mt = can::build_lgn(binary_schema(3), faithful);
    CHECK(mt.trunk.layers().back().segments == std::vector<std::size_t>{2, 2, 2});
    CHECK(can::build_lgn(binary_schema(2), small_config())
              .generator_param_names()
              .front() == std::string(can::kAdjacencyParam));
}

TEST_CASE("generator: empty intervention equals the observational path exactly") {
    for (bool structured : {true, false}) {
        LgnConfig cfg = small_config();
        cfg.structured_heads = structured;
        cfg.seed = 11;
        LgnModel model = can::build_lgn(binary_schema(3), cfg);
        Rng rng(5);
        Tensor z = can::draw_noise(cfg, 6, 3, rng);

        CompiledIntervention empty =
            can::compile_label_intervention(model.schema, {});
        CHECK(empty.alpha.raw() == can::DoubleVec{1.0, 1.0, 1.0});

        CompiledIntervention manual{Tensor::full(1, 3, 1.0), Tensor::zeros(1, 3)};
        Tensor a = can::generator_sample(model, z, empty, Mode::kEval);
        Tensor b = can::generator_sample(model, z, manual, Mode::kEval);
        REQUIRE(a.size() == b.size());
        CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);

        // Every head sums to one.
        for (std::size_t r = 0; r < a.rows(); ++r)
            for (std::size_t i = 0; i < 3; ++i)
                CHECK(a.at(r, 2 * i) + a.at(r, 2 * i + 1) ==
                      doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("generator: intervening every node makes the output independent of Z") {
    LgnModel model = can::build_lgn(binary_schema(3), small_config());
    LabelAssignments all = {{0, 1}, {1, 0}, {2, 1}};
    CompiledIntervention iv = can::compile_label_intervention(model.schema, all);
    Rng rng(7);
    Tensor z1 = can::draw_noise(model.config, 4, 3, rng);
    Tensor z2 = can::draw_noise(model.config, 4, 3, rng);
    Tensor a = can::generator_sample(model, z1, iv, Mode::kEval);
    Tensor b = can::generator_sample(model, z2, iv, Mode::kEval);
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

TEST_CASE("generator: structured heads inherit intervention locality bitwise") {
    LgnConfig cfg = small_config();
    cfg.seed = 13;
    LgnModel model = can::build_lgn(binary_schema(3), cfg);
    // Chain 0 -> 1 -> 2 written directly into the adjacency parameter.
    Tensor& a = model.store.value(can::kAdjacencyParam);
    a.at(0, 1) = 1.4;
    a.at(1, 2) = -1.1;

    Rng rng(19);
    Tensor z = can::draw_noise(cfg, 5, 3, rng);
    Tensor low = can::generator_sample(
        model, z, can::compile_label_intervention(model.schema, {{1, 0}}), Mode::kEval);
    Tensor high = can::generator_sample(
        model, z, can::compile_label_intervention(model.schema, {{1, 1}}), Mode::kEval);

    // Node 0 is not a descendant of 1: its head is bit-identical.
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 2; ++c)
            CHECK(low.at(r, c) == high.at(r, c));
    // Node 2 is downstream and must move.
    double delta = 0.0;
    for (std::size_t r = 0; r < 5; ++r) delta += std::abs(low.at(r, 4) - high.at(r, 4));
    CHECK(delta > 1e-6);

    Rng rng2(19);
    CHECK_THROWS_AS(can::generator_sample(model, Tensor::zeros(2, 5),
                                          can::compile_label_intervention(model.schema, {}),
                                          Mode::kEval),
                    can::SchemaMismatch);
}

TEST_CASE("critic loss: constant critic scores exactly lambda") {
    LgnModel model = can::build_lgn(binary_schema(2), small_config());
    zero_params(model.store, model.discriminator_param_names());
    Rng rng(3);
    Tensor real = Tensor::matrix({{1.0, 0.0, 0.0, 1.0}, {0.0, 1.0, 1.0, 0.0}});
    Tensor fake = Tensor::matrix({{0.7, 0.3, 0.5, 0.5}, {0.2, 0.8, 0.9, 0.1}});

    can::diff::Tape tape;
    Binder db(tape, model.store, true);
    CHECK(can::discriminator_loss(model, db, real, fake, 3.0, rng).value().item() ==
          doctest::Approx(3.0).epsilon(1e-12));

    can::diff::Tape tape2;
    Binder db2(tape2, model.store, true);
    CHECK(can::discriminator_loss(model, db2, real, fake, 0.0, rng).value().item() ==
          doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("critic loss: identical batches under a unit-gradient critic vanish") {
    LgnConfig cfg = small_config();
    cfg.hidden_width = 4;  // same as the encoded width so identity stacks exist
    cfg.d_hidden_layers = 2;
    LgnModel model = can::build_lgn(binary_schema(2), cfg);
    // Hidden layers: identity weights, large positive bias keeps every
    // leaky-relu in its slope-1 region; output weight has unit norm.
    model.store.value("lgn.d.l0.w") = Tensor::identity(4);
    model.store.value("lgn.d.l0.b") = Tensor::full(1, 4, 10.0);
    model.store.value("lgn.d.l2.w") = Tensor::identity(4);
    model.store.value("lgn.d.l2.b") = Tensor::full(1, 4, 10.0);
    model.store.value("lgn.d.l4.w") = Tensor::column({1.0, 0.0, 0.0, 0.0});
    model.store.value("lgn.d.l4.b") = Tensor::zeros(1, 1);

    Tensor batch = Tensor::matrix({{1.0, 0.0, 1.0, 0.0}, {0.0, 1.0, 0.0, 1.0}});
    Rng rng(9);
    can::diff::Tape tape;
    Binder db(tape, model.store, true);
    double loss = can::discriminator_loss(model, db, batch, batch, 7.0, rng).value().item();
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("critic loss: pure critic difference matches a hand computation") {
    LgnConfig cfg = small_config();
    cfg.seed = 23;
    LgnModel model = can::build_lgn(binary_schema(2), cfg);
    Rng rng(31);
    Tensor real = Tensor::matrix({{1.0, 0.0, 0.0, 1.0}, {0.0, 1.0, 1.0, 0.0}});
    Tensor fake = Tensor::matrix({{0.6, 0.4, 0.5, 0.5}, {0.1, 0.9, 0.8, 0.2}});

    can::diff::Tape tape;
    Binder db(tape, model.store, false);
    Tensor dr = model.disc.forward(db, tape.constant(real), Mode::kTrain).value();
    Tensor df = model.disc.forward(db, tape.constant(fake), Mode::kTrain).value();
    const double expected =
        (df.at(0, 0) + df.at(1, 0)) / 2.0 - (dr.at(0, 0) + dr.at(1, 0)) / 2.0;

    can::diff::Tape tape2;
    Binder db2(tape2, model.store, true);
    CHECK(can::discriminator_loss(model, db2, real, fake, 0.0, rng).value().item() ==
          doctest::Approx(expected).epsilon(1e-12));

    CHECK_THROWS_AS(can::discriminator_loss(model, db2, Tensor::zeros(2, 3), fake, 1.0, rng),
                    can::SchemaMismatch);
    model.store.value("lgn.d.l4.w").raw()[0] = std::numeric_limits<double>::infinity();
    can::diff::Tape tape3;
    Binder db3(tape3, model.store, true);
    CHECK_THROWS_AS(can::discriminator_loss(model, db3, real, fake, 1.0, rng),
                    can::NonFiniteLoss);
}

TEST_CASE("generator loss: constraint arithmetic and constant-critic behaviour") {
    LgnConfig cfg = small_config();
    cfg.seed = 17;
    LgnModel model = can::build_lgn(binary_schema(2), cfg);
    zero_params(model.store, model.discriminator_param_names());
    model.store.value("lgn.d.l" +
                      std::to_string(2 * (cfg.d_hidden_layers)) + ".b") =
        Tensor::scalar(0.7);  // critic == 0.7 everywhere

    // h([[0, w], [w, 0]]) = 2 w^4 with unit curvature; w = 2^(-1/2) gives 0.5.
    const double w = std::pow(2.0, -0.5);
    Tensor& a = model.store.value(can::kAdjacencyParam);
    a.at(0, 1) = w;
    a.at(1, 0) = w;
    CHECK(can::acyclicity_penalty(model.adjacency(), 1.0) == doctest::Approx(0.5));

    LagrangianState lag{2.0, 4.0, -1.0};
    Rng rng(2);
    Tensor z = can::draw_noise(cfg, 4, 2, rng);
    can::diff::Tape tape;
    Binder gb(tape, model.store, true);
    Binder db(tape, model.store, false);
    const double loss =
        can::generator_loss(model, gb, db, z, lag, 1.0).value().item();
    // adversarial term -0.7, constraint 2*0.5 + (4/2)*0.25 = 1.5
    CHECK(loss == doctest::Approx(-0.7 + 1.5).epsilon(1e-9));

    // Different noise, same constant critic: identical loss.
    Tensor z2 = can::draw_noise(cfg, 4, 2, rng);
    can::diff::Tape tape2;
    Binder gb2(tape2, model.store, true);
    Binder db2(tape2, model.store, false);
    CHECK(can::generator_loss(model, gb2, db2, z2, lag, 1.0).value().item() ==
          doctest::Approx(loss).epsilon(1e-12));

    // Zero adjacency: the constraint vanishes and only the critic term stays.
    a.at(0, 1) = 0.0;
    a.at(1, 0) = 0.0;
    can::diff::Tape tape3;
    Binder gb3(tape3, model.store, true);
    Binder db3(tape3, model.store, false);
    CHECK(can::generator_loss(model, gb3, db3, z, lag, 1.0).value().item() ==
          doctest::Approx(-0.7).epsilon(1e-12));
}

TEST_CASE("generator loss: gradients w.r.t. the adjacency match finite differences") {
    LgnConfig cfg = small_config();
    cfg.seed = 29;
    LgnModel model = can::build_lgn(binary_schema(3), cfg);
    Tensor& a = model.store.value(can::kAdjacencyParam);
    a.at(0, 1) = 0.8;
    a.at(1, 2) = -0.5;
    a.at(0, 2) = 0.3;
    LagrangianState lag{0.3, 2.0, -1.0};
    Rng rng(4);
    Tensor z = can::draw_noise(cfg, 4, 3, rng);

    auto loss_value = [&]() {
        can::diff::Tape tape;
        Binder gb(tape, model.store, true);
        Binder db(tape, model.store, false);
        return can::generator_loss(model, gb, db, z, lag, 1.0).value().item();
    };

    can::diff::Tape tape;
    Binder gb(tape, model.store, true);
    Binder db(tape, model.store, false);
    can::diff::Var loss = can::generator_loss(model, gb, db, z, lag, 1.0);
    std::vector<can::diff::Var> wrt = {gb(can::kAdjacencyParam)};
    Tensor grad = tape.gradients(loss, wrt)[0].value();

    const double eps = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) {
                CHECK(grad.at(i, j) == 0.0);  // diagonal is masked out
                continue;
            }
            const double keep = a.at(i, j);
            a.at(i, j) = keep + eps;
            const double hi = loss_value();
            a.at(i, j) = keep - eps;
            const double lo = loss_value();
            a.at(i, j) = keep;
            worst = std::max(worst,
                             oracle::rel_err(grad.at(i, j), (hi - lo) / (2.0 * eps)));
        }
    CHECK(worst < 1e-5);
}

TEST_CASE("dual update: multiplier climbs, penalty weight follows the schedule") {
    LagrangianState lag{0.0, 1.0, -1.0};
    LagrangianState next = can::lagrangian_update(lag, 0.5);
    CHECK(next.lambda_bar == doctest::Approx(0.5));
    CHECK(next.rho == 1.0);  // first update never grows rho
    CHECK(next.last_h == 0.5);

    // h did not drop below a quarter of the previous value: rho grows tenfold.
    LagrangianState grown = can::lagrangian_update(next, 0.4);
    CHECK(grown.lambda_bar == doctest::Approx(0.9));
    CHECK(grown.rho == 10.0);

    // Sufficient decrease: rho stays.
    LagrangianState stay = can::lagrangian_update(next, 0.1);
    CHECK(stay.rho == 1.0);
    CHECK(stay.lambda_bar == doctest::Approx(0.6));

    // h = 0 leaves the multiplier untouched.
    LagrangianState zero = can::lagrangian_update(next, 0.0);
    CHECK(zero.lambda_bar == next.lambda_bar);

    // Cap.
    LagrangianState big{1.0, 5e5, 1.0};
    CHECK(can::lagrangian_update(big, 1.0).rho == 1e6);

    CHECK_THROWS_AS(can::lagrangian_update(lag, -1e-6), can::ContractViolation);
    LgnConfig bad;
    bad.rho0 = 0.0;
    CHECK_THROWS_AS(bad.validate(), can::ContractViolation);
}

TEST_CASE("training: chain data is learned, h is driven to zero, history is sane") {
    const auto& t = trained_chain();
    const auto& hist = t.result.history;
    REQUIRE(hist.size() == t.result.model.config.epochs);

    // The multiplier never decreases and rho respects its floor.
    for (std::size_t e = 1; e < hist.size(); ++e) {
        CHECK(hist[e].lambda_bar >= hist[e - 1].lambda_bar);
        CHECK(hist[e].rho >= t.result.model.config.rho0);
        CHECK(std::isfinite(hist[e].d_loss));
        CHECK(std::isfinite(hist[e].g_loss));
    }
    CHECK(hist.back().h <= 1e-3);

    // Observational samples land near the training frequencies.
    Rng rng(77);
    auto rows = can::sample_observational(t.result.model, 10000, rng);
    auto sampled = joint_freq(rows);
    auto trained = joint_freq(t.data.rows);
    double tv = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) tv += std::abs(sampled[{a, b}] - trained[{a, b}]);
    CHECK(tv / 2.0 <= 0.1);
}

TEST_CASE("training: determinism and checkpoint round-trips are bitwise") {
    SyntheticScmSpec spec;
    spec.names = {"a", "b"};
    spec.cards = {2, 2};
    spec.noise = {0.0, 0.0};
    spec.edges = {{{0, 1}, 2.0}};
    CategoricalDataset data = can::synth_scm_dataset(spec, 256, 5);

    LgnConfig cfg = small_config();
    cfg.epochs = 3;
    cfg.seed = 41;
    can::LgnTrainResult r1 = can::train_lgn(data, cfg);
    can::LgnTrainResult r2 = can::train_lgn(data, cfg);

    const std::string p1 = "/tmp/lgn_ckpt_a.bin";
    const std::string p2 = "/tmp/lgn_ckpt_b.bin";
    const std::string p3 = "/tmp/lgn_ckpt_c.bin";
    can::save_lgn(p1, r1.model);
    can::save_lgn(p2, r2.model);
    CHECK(can::read_text_file(p1) == can::read_text_file(p2));

    // Different seed: different bytes.
    cfg.seed = 42;
    can::LgnTrainResult r3 = can::train_lgn(data, cfg);
    can::save_lgn(p3, r3.model);
    CHECK(can::read_text_file(p1) != can::read_text_file(p3));

    // Load/save round-trip is bitwise and sampling is reproduced exactly.
    LgnModel loaded = can::load_lgn(p1);
    can::save_lgn(p3, loaded);
    CHECK(can::read_text_file(p1) == can::read_text_file(p3));
    CHECK(loaded.lag.lambda_bar == r1.model.lag.lambda_bar);
    CHECK(loaded.lag.rho == r1.model.lag.rho);
    Rng ra(9), rb(9);
    CHECK(can::sample_observational(r1.model, 64, ra) ==
          can::sample_observational(loaded, 64, rb));

    std::ofstream bad("/tmp/lgn_ckpt_bad.bin", std::ios::binary);
    bad << "NOTACKPT-----";
    bad.close();
    CHECK_THROWS_AS(can::load_lgn("/tmp/lgn_ckpt_bad.bin"), can::ParseError);
    std::remove(p1.c_str());
    std::remove(p2.c_str());
    std::remove(p3.c_str());
    std::remove("/tmp/lgn_ckpt_bad.bin");
}

TEST_CASE("sampling: interventions clamp labels and respect locality") {
    const auto& t = trained_chain();
    const LgnModel& model = t.result.model;

    // Intervening every variable pins every row to the assignment.
    Rng rng(55);
    auto rows = can::sample_interventional(model, {{0, 1}, {1, 0}}, 200, rng);
    for (const auto& r : rows) CHECK(r == std::vector<int>{1, 0});

    // do(b): the upstream variable keeps its observational marginal.
    Rng r1(66), r2(66);
    const double p_obs = marginal1(can::sample_observational(model, 10000, r1), 0);
    const double p_do =
        marginal1(can::sample_interventional(model, {{1, 1}}, 10000, r2), 0);
    CHECK(std::abs(p_do - p_obs) <= 0.03);

    // do(a = 1) vs do(a = 0) shifts the child in the trained direction.
    Rng r3(67), r4(67);
    const double pb_a1 =
        marginal1(can::sample_interventional(model, {{0, 1}}, 10000, r3), 1);
    const double pb_a0 =
        marginal1(can::sample_interventional(model, {{0, 0}}, 10000, r4), 1);
    CHECK(std::abs(pb_a1 - pb_a0) > 0.3);

    CHECK_THROWS_AS(can::sample_interventional(model, {{0, 5}}, 10, rng),
                    can::ContractViolation);
    CHECK_THROWS_AS(can::sample_interventional(model, {{7, 0}}, 10, rng),
                    can::ContractViolation);
}

TEST_CASE("sampling: conditioning matches the data and budgets are honoured") {
    const auto& t = trained_chain();
    const LgnModel& model = t.result.model;

    // Empirical P(a = 1 | b = 1) from the training data.
    double n_b1 = 0.0, n_a1b1 = 0.0;
    for (const auto& r : t.data.rows) {
        if (r[1] != 1) continue;
        n_b1 += 1.0;
        if (r[0] == 1) n_a1b1 += 1.0;
    }
    const double target = n_a1b1 / n_b1;

    Rng rng(88);
    auto rows = can::sample_conditional(model, {{1, 1}}, 5000, 200000, rng);
    REQUIRE(rows.size() == 5000);
    for (const auto& r : rows) CHECK(r[1] == 1);
    CHECK(std::abs(marginal1(rows, 0) - target) <= 0.08);

    // Empty condition behaves like observational sampling.
    Rng ra(4), rb(4);
    CHECK(can::sample_conditional(model, {}, 100, 100, ra) ==
          can::sample_observational(model, 100, rb));

    CHECK_THROWS_AS(can::sample_conditional(model, {{0, 1}}, 100, 50, rng),
                    can::ContractViolation);
}

TEST_CASE("sampling: impossible conditions exhaust the budget with a partial batch") {
    // Untrained model clamped by intervention-free conditioning on a value the
    // generator cannot produce: condition on two variables simultaneously with
    // a tiny budget so exhaustion is certain.
    const auto& t = trained_chain();
    Rng rng(99);
    try {
        // b = 1 - a almost never co-occurs after training on a strong chain,
        // so demanding thousands of such rows inside a small budget fails.
        can::sample_conditional(t.result.model, {{0, 1}, {1, 0}}, 3000, 4000, rng);
        FAIL("expected BudgetExhausted");
    } catch (const can::BudgetExhausted& e) {
        CHECK(e.partial.size() < 3000);
        CHECK(e.acceptance_rate < 0.5);
        for (const auto& r : e.partial) {
            CHECK(r[0] == 1);
            CHECK(r[1] == 0);
        }
    }
}

TEST_CASE("sampling: the stats variant mirrors the throwing one and reports rates") {
    const auto& t = trained_chain();
    const LgnModel& model = t.result.model;

    // Success: identical row stream to sample_conditional for an equal seed,
    // with the acceptance rate taken over the rows actually inspected.
    Rng ra(21), rb(21);
    const auto thrown_rows = can::sample_conditional(model, {{1, 1}}, 200, 100000, ra);
    const can::ConditionalDraw draw =
        can::sample_conditional_stats(model, {{1, 1}}, 200, 100000, rb);
    CHECK(draw.rows == thrown_rows);
    CHECK(draw.requested == 200);
    CHECK_FALSE(draw.exhausted());
    REQUIRE(draw.drawn >= 200);
    CHECK(draw.acceptance_rate ==
          doctest::Approx(200.0 / static_cast<double>(draw.drawn)).epsilon(1e-12));

    // Exhaustion: no throw, partial rows and the same rate the exception carries.
    Rng rc(99), rd(99);
    const can::ConditionalDraw partial =
        can::sample_conditional_stats(model, {{0, 1}, {1, 0}}, 3000, 4000, rd);
    CHECK(partial.exhausted());
    CHECK(partial.drawn == 4000);
    try {
        can::sample_conditional(model, {{0, 1}, {1, 0}}, 3000, 4000, rc);
        FAIL("expected BudgetExhausted");
    } catch (const can::BudgetExhausted& e) {
        CHECK(e.partial == partial.rows);
        CHECK(e.acceptance_rate == partial.acceptance_rate);
    }

    // Budget below the request is rejected before any sampling.
    Rng re(1);
    CHECK_THROWS_AS(can::sample_conditional_stats(model, {{0, 1}}, 100, 50, re),
                    can::ContractViolation);
}

TEST_CASE("noise priors: normal moments and uniform support") {
    LgnConfig cfg;
    Rng rng(6);
    Tensor zn = can::draw_noise(cfg, 2000, 2, rng);
    double mean = 0.0, var = 0.0;
    for (double v : zn.raw()) mean += v;
    mean /= static_cast<double>(zn.size());
    for (double v : zn.raw()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(zn.size());
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.08);

    cfg.noise_prior = can::NoisePrior::kUniform;
    Tensor zu = can::draw_noise(cfg, 2000, 2, rng);
    for (double v : zu.raw()) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("config serialization round-trips every field") {
    LgnConfig cfg;
    cfg.structured_heads = false;
    cfg.hidden_width = 37;
    cfg.noise_prior = can::NoisePrior::kUniform;
    cfg.epochs = 9;
    cfg.lambda_gp = 2.5;
    cfg.seed = 123456789;
    can::LgnConfig back = can::lgn_config_from_json(can::lgn_config_to_json(cfg));
    CHECK(back.structured_heads == false);
    CHECK(back.hidden_width == 37);
    CHECK(back.noise_prior == can::NoisePrior::kUniform);
    CHECK(back.epochs == 9);
    CHECK(back.lambda_gp == 2.5);
    CHECK(back.seed == 123456789);
    CHECK_THROWS_AS(can::lgn_config_from_json("{"), can::ParseError);
    CHECK_THROWS_AS(can::lgn_config_from_json(R"({"noise_prior": "cauchy"})"),
                    can::ParseError);
}
