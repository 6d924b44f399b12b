#include "can/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "can/errors.hpp"
#include "can/rng.hpp"
#include "can/tape.hpp"

namespace can {

namespace {

using diff::Tape;
using diff::Var;

double sigmoid_scalar(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_same_nodes(const CausalGraph& est, const CausalGraph& truth) {
    if (est.n() != truth.n()) {
        throw SchemaMismatch("graphs have " + std::to_string(est.n()) + " vs " +
                             std::to_string(truth.n()) + " nodes");
    }
}

/// One-frequency of every one-hot dimension, computed without materialising
/// the encoding.
std::vector<double> one_frequencies(const CategoricalDataset& data) {
    data.validate();
    if (data.rows.empty()) throw ContractViolation("cannot take frequencies of an empty dataset");
    std::vector<double> freq(data.schema.total_width(), 0.0);
    const double inv_m = 1.0 / static_cast<double>(data.rows.size());
    for (const auto& row : data.rows) {
        for (std::size_t v = 0; v < data.schema.size(); ++v) {
            freq[data.schema.offset(v) + static_cast<std::size_t>(row[v])] += inv_m;
        }
    }
    return freq;
}

void check_shared_cards(const CategoricalDataset& a, const CategoricalDataset& b,
                        const CategoricalDataset& c) {
    if (a.schema.cards != b.schema.cards || a.schema.cards != c.schema.cards) {
        throw SchemaMismatch("train, samples and test must share one cardinality profile");
    }
    a.validate();
    b.validate();
    c.validate();
    if (a.rows.empty() || b.rows.empty() || c.rows.empty()) {
        throw ContractViolation("datasets must be non-empty");
    }
}

/// Encoded matrix with variable v's block removed: the feature view used when
/// predicting v (or one of its dimensions) from the rest of the row.
Tensor drop_block(const Tensor& enc, std::size_t offset, std::size_t width) {
    const std::size_t m = enc.rows();
    const std::size_t w = enc.cols();
    Tensor out = Tensor::zeros(m, w - width);
    for (std::size_t r = 0; r < m; ++r) {
        std::size_t k = 0;
        for (std::size_t c = 0; c < w; ++c) {
            if (c >= offset && c < offset + width) continue;
            out.at(r, k++) = enc.at(r, c);
        }
    }
    return out;
}

bool is_constant(const std::vector<double>& y) {
    return std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end();
}

/// 0/1 predictions on `features`: logistic regression when the fitting
/// targets carry both classes, the constant predictor otherwise.
std::vector<int> fit_and_predict(const Tensor& fit_features, const std::vector<double>& fit_targets,
                                 const Tensor& features, const LogisticConfig& cfg,
                                 bool* degenerate) {
    if (is_constant(fit_targets)) {
        *degenerate = true;
        return std::vector<int>(features.rows(), static_cast<int>(fit_targets.front()));
    }
    *degenerate = false;
    const LogisticModel model = logistic_fit(fit_features, fit_targets, cfg);
    std::vector<int> out(features.rows());
    const std::vector<double> prob = logistic_predict(model, features);
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = prob[r] >= 0.5 ? 1 : 0;
    return out;
}

std::vector<double> column_of(const Tensor& enc, std::size_t c) {
    std::vector<double> out(enc.rows());
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = enc.at(r, c);
    return out;
}

MetricStat aggregate(const std::vector<double>& values) {
    MetricStat s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.dev = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

void check_label_matrix(const Tensor& labels) {
    for (double v : labels.raw()) {
        if (v != 0.0 && v != 1.0) {
            throw ContractViolation("labels must be 0/1, got " + std::to_string(v));
        }
    }
}

std::vector<std::vector<int>> label_rows(const Tensor& labels) {
    std::vector<std::vector<int>> rows(labels.rows(), std::vector<int>(labels.cols()));
    for (std::size_t r = 0; r < labels.rows(); ++r)
        for (std::size_t c = 0; c < labels.cols(); ++c)
            rows[r][c] = labels.at(r, c) >= 0.5 ? 1 : 0;
    return rows;
}

std::vector<double> per_label_accuracy(const std::vector<std::vector<int>>& predicted,
                                       const std::vector<std::vector<int>>& actual) {
    const std::size_t k = predicted.empty() ? 0 : predicted.front().size();
    std::vector<double> acc(k, 0.0);
    for (std::size_t r = 0; r < predicted.size(); ++r)
        for (std::size_t j = 0; j < k; ++j)
            if (predicted[r][j] == actual[r][j]) acc[j] += 1.0;
    for (double& a : acc) a /= static_cast<double>(predicted.size());
    return acc;
}

void check_batch_pair(const ImageBatch& a, const ImageBatch& b, const char* what) {
    if (a.height != b.height || a.width != b.width ||
        a.images.cols() != b.images.cols() || a.labels.cols() != b.labels.cols()) {
        throw SchemaMismatch(std::string("image batches disagree in shape (") + what + ")");
    }
}

std::string format_stat(const MetricStat& s) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e ± %.1e", s.mean, s.dev);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph recovery
// ---------------------------------------------------------------------------

long long shd(const CausalGraph& est, const CausalGraph& truth) {
    check_same_nodes(est, truth);
    const auto& e = est.edges();
    const auto& t = truth.edges();
    long long total = 0;
    for (int i = 0; i < est.n(); ++i) {
        for (int j = i + 1; j < est.n(); ++j) {
            const bool eij = e.count({i, j}) != 0;
            const bool eji = e.count({j, i}) != 0;
            const bool tij = t.count({i, j}) != 0;
            const bool tji = t.count({j, i}) != 0;
            const int diff = static_cast<int>(eij != tij) + static_cast<int>(eji != tji);
            const bool reversal = diff == 2 && (eij != eji) && (tij != tji);
            total += reversal ? 1 : diff;
        }
    }
    return total;
}

double tpr(const CausalGraph& est, const CausalGraph& truth) {
    check_same_nodes(est, truth);
    if (truth.edges().empty()) {
        throw ContractViolation("true positive rate needs a non-empty truth graph");
    }
    std::size_t hits = 0;
    for (const Edge& edge : truth.edges()) hits += est.edges().count(edge);
    return static_cast<double>(hits) / static_cast<double>(truth.edges().size());
}

GraphMetrics graph_metrics(const CausalGraph& est, const CausalGraph& truth) {
    return {shd(est, truth), tpr(est, truth)};
}

// ---------------------------------------------------------------------------
// Logistic-regression helper
// ---------------------------------------------------------------------------

LogisticModel logistic_fit(const Tensor& features, const std::vector<double>& targets,
                           const LogisticConfig& cfg) {
    const std::size_t m = features.rows();
    const std::size_t k = features.cols();
    if (targets.size() != m) {
        throw SchemaMismatch("got " + std::to_string(targets.size()) + " targets for " +
                             std::to_string(m) + " feature rows");
    }
    if (m == 0) throw ContractViolation("cannot fit on an empty set");
    for (double y : targets) {
        if (y != 0.0 && y != 1.0) {
            throw ContractViolation("targets must be 0/1, got " + std::to_string(y));
        }
    }
    LogisticModel model;
    model.weights.assign(k, 0.0);
    std::vector<double> grad(k);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            double z = model.bias;
            for (std::size_t c = 0; c < k; ++c) z += model.weights[c] * features.at(r, c);
            const double delta = (sigmoid_scalar(z) - targets[r]) * inv_m;
            for (std::size_t c = 0; c < k; ++c) grad[c] += delta * features.at(r, c);
            grad_b += delta;
        }
        for (std::size_t c = 0; c < k; ++c) model.weights[c] -= cfg.learning_rate * grad[c];
        model.bias -= cfg.learning_rate * grad_b;
    }
    return model;
}

std::vector<double> logistic_predict(const LogisticModel& model, const Tensor& features) {
    if (features.cols() != model.weights.size()) {
        throw SchemaMismatch("model has " + std::to_string(model.weights.size()) +
                             " weights, features " + std::to_string(features.cols()) +
                             " columns");
    }
    std::vector<double> out(features.rows());
    for (std::size_t r = 0; r < out.size(); ++r) {
        double z = model.bias;
        for (std::size_t c = 0; c < model.weights.size(); ++c)
            z += model.weights[c] * features.at(r, c);
        out[r] = sigmoid_scalar(z);
    }
    return out;
}

double f1_score(const std::vector<int>& predicted, const std::vector<int>& actual) {
    if (predicted.size() != actual.size()) throw SchemaMismatch("prediction length mismatch");
    if (predicted.empty()) throw ContractViolation("f1 of an empty set");
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if ((predicted[i] != 0 && predicted[i] != 1) || (actual[i] != 0 && actual[i] != 1)) {
            throw ContractViolation("f1 labels must be 0/1");
        }
        tp += predicted[i] == 1 && actual[i] == 1;
        fp += predicted[i] == 1 && actual[i] == 0;
        fn += predicted[i] == 0 && actual[i] == 1;
    }
    const double denom = 2.0 * tp + fp + fn;
    return denom == 0.0 ? 1.0 : 2.0 * tp / denom;
}

double accuracy_score(const std::vector<int>& predicted, const std::vector<int>& actual) {
    if (predicted.size() != actual.size()) throw SchemaMismatch("prediction length mismatch");
    if (predicted.empty()) throw ContractViolation("accuracy of an empty set");
    double hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == actual[i];
    return hits / static_cast<double>(predicted.size());
}

// ---------------------------------------------------------------------------
// Label-quality metrics
// ---------------------------------------------------------------------------

double mse_p(const CategoricalDataset& test, const CategoricalDataset& samples) {
    if (test.schema.total_width() != samples.schema.total_width()) {
        throw SchemaMismatch("encoded widths differ: " +
                             std::to_string(test.schema.total_width()) + " vs " +
                             std::to_string(samples.schema.total_width()));
    }
    const std::vector<double> ft = one_frequencies(test);
    const std::vector<double> fs = one_frequencies(samples);
    double sum = 0.0;
    for (std::size_t i = 0; i < ft.size(); ++i) sum += (ft[i] - fs[i]) * (ft[i] - fs[i]);
    return sum / static_cast<double>(ft.size());
}

ScoreVectors mse_f_scores(const CategoricalDataset& train, const CategoricalDataset& samples,
                          const CategoricalDataset& test, const LogisticConfig& cfg) {
    check_shared_cards(train, samples, test);
    const VariableSchema& schema = train.schema;
    const Tensor enc_train = one_hot_encode(train);
    const Tensor enc_samples = one_hot_encode(samples);
    const Tensor enc_test = one_hot_encode(test);

    ScoreVectors out;
    for (std::size_t v = 0; v < schema.size(); ++v) {
        const std::size_t off = schema.offset(v);
        const std::size_t card = schema.cards[v];
        const Tensor x_train = drop_block(enc_train, off, card);
        const Tensor x_samples = drop_block(enc_samples, off, card);
        const Tensor x_test = drop_block(enc_test, off, card);
        for (std::size_t c = 0; c < card; ++c) {
            const std::size_t d = off + c;
            std::vector<int> truth(enc_test.rows());
            for (std::size_t r = 0; r < truth.size(); ++r)
                truth[r] = enc_test.at(r, d) != 0.0 ? 1 : 0;

            bool degenerate = false;
            std::vector<int> pred =
                fit_and_predict(x_train, column_of(enc_train, d), x_test, cfg, &degenerate);
            if (degenerate) {
                out.degenerate.push_back("f1 dim " + std::to_string(d) + " (" +
                                         schema.names[v] + "=" + std::to_string(c) +
                                         "): constant in train");
            }
            out.train_scores.push_back(f1_score(pred, truth));

            pred = fit_and_predict(x_samples, column_of(enc_samples, d), x_test, cfg,
                                   &degenerate);
            if (degenerate) {
                out.degenerate.push_back("f1 dim " + std::to_string(d) + " (" +
                                         schema.names[v] + "=" + std::to_string(c) +
                                         "): constant in samples");
            }
            out.sample_scores.push_back(f1_score(pred, truth));
        }
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < out.train_scores.size(); ++i) {
        const double gap = out.train_scores[i] - out.sample_scores[i];
        sum += gap * gap;
    }
    out.mse = sum / static_cast<double>(out.train_scores.size());
    return out;
}

double mse_f(const CategoricalDataset& train, const CategoricalDataset& samples,
             const CategoricalDataset& test, const LogisticConfig& cfg) {
    return mse_f_scores(train, samples, test, cfg).mse;
}

namespace {

/// One-vs-rest accuracy of predicting variable v of `test` from a model fit
/// on `fit` (both one-hot encoded). Appends a note when the fitting variable
/// is constant.
double ovr_accuracy(const Tensor& enc_fit, const Tensor& x_fit, const Tensor& x_test,
                    const std::vector<int>& truth, std::size_t off, std::size_t card,
                    const std::string& var_name, const char* source,
                    const LogisticConfig& cfg, std::vector<std::string>* degenerate) {
    // Variable constant in the fitting set: the constant predictor.
    bool variable_constant = true;
    int constant_class = -1;
    for (std::size_t r = 0; r < enc_fit.rows(); ++r) {
        int cls = 0;
        for (std::size_t c = 0; c < card; ++c)
            if (enc_fit.at(r, off + c) != 0.0) cls = static_cast<int>(c);
        if (r == 0) {
            constant_class = cls;
        } else if (cls != constant_class) {
            variable_constant = false;
            break;
        }
    }
    std::vector<int> pred(x_test.rows());
    if (variable_constant) {
        degenerate->push_back("accuracy var " + var_name + ": constant in " + source);
        std::fill(pred.begin(), pred.end(), constant_class);
    } else {
        std::vector<std::vector<double>> prob(card);
        for (std::size_t c = 0; c < card; ++c) {
            const std::vector<double> y = column_of(enc_fit, off + c);
            if (is_constant(y)) {
                prob[c].assign(x_test.rows(), y.front());
            } else {
                prob[c] = logistic_predict(logistic_fit(x_fit, y, cfg), x_test);
            }
        }
        for (std::size_t r = 0; r < x_test.rows(); ++r) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < card; ++c)
                if (prob[c][r] > prob[best][r]) best = c;
            pred[r] = static_cast<int>(best);
        }
    }
    return accuracy_score(pred, truth);
}

}  // namespace

ScoreVectors mse_a_scores(const CategoricalDataset& train, const CategoricalDataset& samples,
                          const CategoricalDataset& test, const LogisticConfig& cfg) {
    check_shared_cards(train, samples, test);
    const VariableSchema& schema = train.schema;
    const Tensor enc_train = one_hot_encode(train);
    const Tensor enc_samples = one_hot_encode(samples);
    const Tensor enc_test = one_hot_encode(test);

    ScoreVectors out;
    for (std::size_t v = 0; v < schema.size(); ++v) {
        const std::size_t off = schema.offset(v);
        const std::size_t card = schema.cards[v];
        const Tensor x_train = drop_block(enc_train, off, card);
        const Tensor x_samples = drop_block(enc_samples, off, card);
        const Tensor x_test = drop_block(enc_test, off, card);
        std::vector<int> truth(test.rows.size());
        for (std::size_t r = 0; r < truth.size(); ++r) truth[r] = test.rows[r][v];

        out.train_scores.push_back(ovr_accuracy(enc_train, x_train, x_test, truth, off, card,
                                                schema.names[v], "train", cfg,
                                                &out.degenerate));
        out.sample_scores.push_back(ovr_accuracy(enc_samples, x_samples, x_test, truth, off,
                                                 card, schema.names[v], "samples", cfg,
                                                 &out.degenerate));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < out.train_scores.size(); ++i) {
        const double gap = out.train_scores[i] - out.sample_scores[i];
        sum += gap * gap;
    }
    out.mse = sum / static_cast<double>(out.train_scores.size());
    return out;
}

double mse_a(const CategoricalDataset& train, const CategoricalDataset& samples,
             const CategoricalDataset& test, const LogisticConfig& cfg) {
    return mse_a_scores(train, samples, test, cfg).mse;
}

double hamming_score(const std::vector<std::vector<int>>& predicted,
                     const std::vector<std::vector<int>>& actual) {
    if (predicted.size() != actual.size()) throw SchemaMismatch("row count mismatch");
    if (predicted.empty()) throw ContractViolation("hamming score of an empty set");
    double hits = 0.0;
    std::size_t cells = 0;
    for (std::size_t r = 0; r < predicted.size(); ++r) {
        if (predicted[r].size() != actual[r].size() ||
            predicted[r].size() != predicted.front().size()) {
            throw SchemaMismatch("label width mismatch at row " + std::to_string(r));
        }
        for (std::size_t c = 0; c < predicted[r].size(); ++c)
            hits += predicted[r][c] == actual[r][c];
        cells += predicted[r].size();
    }
    if (cells == 0) throw ContractViolation("hamming score of zero-width labels");
    return hits / static_cast<double>(cells);
}

// ---------------------------------------------------------------------------
// Seeded-repeat aggregation
// ---------------------------------------------------------------------------

LabelQualityReport evaluate_label_quality(const CategoricalDataset& train,
                                          const CategoricalDataset& test,
                                          const SampleSource& sampler, std::size_t repeats,
                                          std::uint64_t base_seed, const LogisticConfig& cfg) {
    if (repeats == 0) throw ContractViolation("at least one repeat is required");
    std::vector<double> ps, fs, as;
    std::set<std::string> degenerate;
    for (std::size_t r = 0; r < repeats; ++r) {
        const CategoricalDataset samples = sampler(base_seed + r);
        ps.push_back(mse_p(test, samples));
        ScoreVectors f = mse_f_scores(train, samples, test, cfg);
        ScoreVectors a = mse_a_scores(train, samples, test, cfg);
        fs.push_back(f.mse);
        as.push_back(a.mse);
        degenerate.insert(f.degenerate.begin(), f.degenerate.end());
        degenerate.insert(a.degenerate.begin(), a.degenerate.end());
    }
    LabelQualityReport report;
    report.mse_p = aggregate(ps);
    report.mse_f = aggregate(fs);
    report.mse_a = aggregate(as);
    report.repeats = repeats;
    report.degenerate.assign(degenerate.begin(), degenerate.end());
    return report;
}

// ---------------------------------------------------------------------------
// GAN-train / GAN-test harness
// ---------------------------------------------------------------------------

LabelClassifier train_label_classifier(const Tensor& images, const Tensor& labels,
                                       const ClassifierConfig& cfg) {
    const std::size_t m = images.rows();
    if (labels.rows() != m) {
        throw SchemaMismatch("got " + std::to_string(labels.rows()) + " label rows for " +
                             std::to_string(m) + " images");
    }
    if (m < 2) throw ContractViolation("classifier training needs at least two rows");
    if (cfg.hidden_width == 0 || cfg.epochs == 0 || cfg.batch_size == 0 ||
        !(cfg.learning_rate > 0.0)) {
        throw ContractViolation("classifier config must have positive sizes and rate");
    }
    check_label_matrix(labels);

    LabelClassifier clf;
    clf.input_width = images.cols();
    clf.label_count = labels.cols();
    clf.net = Network("clf", {LayerSpec::dense(clf.input_width, cfg.hidden_width),
                              LayerSpec::relu(),
                              LayerSpec::dense(cfg.hidden_width, cfg.hidden_width),
                              LayerSpec::relu(),
                              LayerSpec::dense(cfg.hidden_width, clf.label_count)});
    Rng init_rng(cfg.seed);
    clf.net.init_params(clf.store, init_rng);

    const std::size_t batch = std::min(cfg.batch_size, m);
    const std::size_t batches_per_epoch = m / batch;
    const AdamConfig adam{cfg.learning_rate, 0.9, 0.999, 1e-8};
    Rng rng(cfg.seed ^ 0xd1b54a32d192ed03ull);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            Tensor xb = Tensor::zeros(batch, images.cols());
            Tensor yb = Tensor::zeros(batch, labels.cols());
            for (std::size_t r = 0; r < batch; ++r) {
                const std::size_t src = order[b * batch + r];
                for (std::size_t c = 0; c < images.cols(); ++c)
                    xb.at(r, c) = images.at(src, c);
                for (std::size_t c = 0; c < labels.cols(); ++c)
                    yb.at(r, c) = labels.at(src, c);
            }
            Tape tape;
            Binder binder(tape, clf.store, true);
            Var logits = clf.net.forward(binder, tape.constant(xb), Mode::kTrain);
            Var y = tape.constant(yb);
            // Mean binary cross-entropy from logits: softplus(z) - y*z.
            Var loss = diff::mean_all(diff::sub(diff::softplus(logits), diff::mul(y, logits)));
            if (!loss.value().all_finite()) {
                throw NonFiniteLoss("classifier loss diverged at epoch " +
                                    std::to_string(epoch));
            }
            adam_step(clf.store, trainable_gradients(tape, loss, binder, clf.store), adam);
        }
    }
    return clf;
}

std::vector<std::vector<int>> classifier_predict(const LabelClassifier& clf,
                                                 const Tensor& images) {
    if (images.cols() != clf.input_width) {
        throw SchemaMismatch("classifier expects " + std::to_string(clf.input_width) +
                             " pixels, got " + std::to_string(images.cols()));
    }
    Tape tape;
    // Scoring must not disturb the store; the classifier has no batch-norm
    // buffers, so a non-trainable binder over a const view is safe.
    Binder binder(tape, const_cast<ParameterStore&>(clf.store), false);
    Var logits = clf.net.forward(binder, tape.constant(images), Mode::kEval);
    std::vector<std::vector<int>> out(images.rows(), std::vector<int>(clf.label_count));
    for (std::size_t r = 0; r < images.rows(); ++r)
        for (std::size_t c = 0; c < clf.label_count; ++c)
            out[r][c] = logits.value().at(r, c) >= 0.0 ? 1 : 0;
    return out;
}

GanScorePair gan_train_test(const ImageBatch& real_train, const ImageBatch& real_test,
                            const ImageBatch& generated, const ClassifierConfig& cfg) {
    check_batch_pair(real_train, real_test, "real train vs real test");
    check_batch_pair(real_train, generated, "real train vs generated");
    GanScorePair out;

    // GAN-train: learn from generated data, grade on held-out real data.
    ClassifierConfig cfg_gen = cfg;
    const LabelClassifier on_generated =
        train_label_classifier(generated.images, generated.labels, cfg_gen);
    const auto pred_real = classifier_predict(on_generated, real_test.images);
    const auto truth_real = label_rows(real_test.labels);
    out.gan_train = hamming_score(pred_real, truth_real);
    out.per_label_train = per_label_accuracy(pred_real, truth_real);

    // GAN-test: learn from real data, grade on the generated set.
    ClassifierConfig cfg_real = cfg;
    cfg_real.seed = cfg.seed ^ 0x9e3779b97f4a7c15ull;
    const LabelClassifier on_real =
        train_label_classifier(real_train.images, real_train.labels, cfg_real);
    const auto pred_gen = classifier_predict(on_real, generated.images);
    const auto truth_gen = label_rows(generated.labels);
    out.gan_test = hamming_score(pred_gen, truth_gen);
    out.per_label_test = per_label_accuracy(pred_gen, truth_gen);
    return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::string graph_metrics_json(const GraphMetrics& metrics) {
    nlohmann::json j;
    j["shd"] = metrics.shd;
    j["tpr"] = metrics.tpr;
    return j.dump(2);
}

std::string label_quality_json(const LabelQualityReport& report) {
    nlohmann::json j;
    j["repeats"] = report.repeats;
    j["mse_p"] = {{"mean", report.mse_p.mean}, {"dev", report.mse_p.dev}};
    j["mse_f"] = {{"mean", report.mse_f.mean}, {"dev", report.mse_f.dev}};
    j["mse_a"] = {{"mean", report.mse_a.mean}, {"dev", report.mse_a.dev}};
    j["degenerate"] = report.degenerate;
    return j.dump(2);
}

std::string gan_scores_json(const GanScorePair& scores) {
    nlohmann::json j;
    j["gan_train"] = scores.gan_train;
    j["gan_test"] = scores.gan_test;
    j["per_label_train"] = scores.per_label_train;
    j["per_label_test"] = scores.per_label_test;
    return j.dump(2);
}

std::string graph_metrics_table(const GraphMetrics& metrics, const std::string& model,
                                const std::string& dataset) {
    std::ostringstream out;
    const std::size_t name_w = std::max<std::size_t>(8, model.size() + 2);
    out << "Graph recovery on " << dataset << ": SHD (lower is better), TPR (higher is better)\n\n";
    out << std::left << std::setw(static_cast<int>(name_w)) << "Model" << std::right
        << std::setw(6) << "SHD" << std::setw(8) << "TPR" << "\n";
    out << std::left << std::setw(static_cast<int>(name_w)) << model << std::right
        << std::setw(6) << metrics.shd << std::setw(8) << std::fixed << std::setprecision(2)
        << metrics.tpr << "\n";
    return out.str();
}

std::string label_quality_table(const LabelQualityReport& report, const std::string& model,
                                const std::string& dataset) {
    std::ostringstream out;
    const std::size_t name_w = std::max<std::size_t>(8, model.size() + 2);
    out << "Label quality on " << dataset << " (" << report.repeats << " repeats)\n\n";
    out << std::left << std::setw(static_cast<int>(name_w)) << "Model" << std::setw(22)
        << "MSE_p" << std::setw(22) << "MSE_f" << std::setw(22) << "MSE_a" << "\n";
    out << std::left << std::setw(static_cast<int>(name_w)) << model << std::setw(22)
        << format_stat(report.mse_p) << std::setw(22) << format_stat(report.mse_f)
        << std::setw(22) << format_stat(report.mse_a) << "\n";
    for (const std::string& d : report.degenerate) out << "note: " << d << "\n";
    return out.str();
}

std::string gan_scores_table(const GanScorePair& scores, const std::string& model,
                             const std::string& dataset) {
    std::ostringstream out;
    const std::size_t name_w = std::max<std::size_t>(8, model.size() + 2);
    out << "GAN-train / GAN-test on " << dataset << " (higher is better)\n\n";
    out << std::left << std::setw(static_cast<int>(name_w)) << "Model" << std::right
        << std::setw(11) << "GAN-train" << std::setw(10) << "GAN-test" << "\n";
    out << std::left << std::setw(static_cast<int>(name_w)) << model << std::right
        << std::setw(11) << std::fixed << std::setprecision(3) << scores.gan_train
        << std::setw(10) << scores.gan_test << "\n";
    if (!scores.per_label_train.empty()) {
        out << "\n" << std::left << std::setw(static_cast<int>(name_w)) << "Label"
            << std::right << std::setw(11) << "train-acc" << std::setw(10) << "test-acc"
            << "\n";
        for (std::size_t j = 0; j < scores.per_label_train.size(); ++j) {
            out << std::left << std::setw(static_cast<int>(name_w))
                << ("label" + std::to_string(j)) << std::right << std::setw(11) << std::fixed
                << std::setprecision(3) << scores.per_label_train[j] << std::setw(10)
                << scores.per_label_test[j] << "\n";
        }
    }
    return out.str();
}

}  // namespace can
