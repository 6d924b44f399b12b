#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "can/data.hpp"
#include "can/graph.hpp"
#include "can/layers.hpp"
#include "can/optim.hpp"
#include "can/tensor.hpp"

namespace can {

// ---------------------------------------------------------------------------
// Graph recovery
// ---------------------------------------------------------------------------

/// Structural Hamming distance and true-positive rate of an estimated graph
/// against the ground truth.
struct GraphMetrics {
    long long shd = 0;
    double tpr = 0.0;
};

/// Smallest number of edge additions, deletions and reversals that turn
/// `est` into `truth`. A pair holding one edge each, oppositely directed,
/// costs one move (a reversal); every other differing directed edge costs
/// one addition or deletion. Symmetric in its arguments.
/// Throws SchemaMismatch when the node counts differ.
long long shd(const CausalGraph& est, const CausalGraph& truth);

/// |est ∩ truth| / |truth| over directed edges.
/// Throws SchemaMismatch on node-count mismatch and ContractViolation when
/// the truth has no edges.
double tpr(const CausalGraph& est, const CausalGraph& truth);

GraphMetrics graph_metrics(const CausalGraph& est, const CausalGraph& truth);

// ---------------------------------------------------------------------------
// Logistic-regression helper
// ---------------------------------------------------------------------------

/// Deterministic full-batch gradient descent on the mean logistic loss,
/// starting from all-zero weights. No randomness, no early stopping: two
/// calls with the same inputs produce bitwise-identical models.
struct LogisticConfig {
    std::size_t iterations = 500;
    double learning_rate = 0.1;
};

struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
};

/// Fits P(y=1|x) = sigmoid(w·x + b). `targets` must hold 0/1 values with one
/// entry per feature row; mismatched lengths throw SchemaMismatch.
LogisticModel logistic_fit(const Tensor& features, const std::vector<double>& targets,
                           const LogisticConfig& cfg = {});

/// Per-row probabilities of the positive class.
std::vector<double> logistic_predict(const LogisticModel& model, const Tensor& features);

/// F1 of the positive class: 2TP / (2TP + FP + FN). When the denominator is
/// zero (no positives anywhere, all predictions correct) the score is 1.
/// Throws SchemaMismatch on length mismatch, ContractViolation when empty.
double f1_score(const std::vector<int>& predicted, const std::vector<int>& actual);

/// Fraction of equal entries.
double accuracy_score(const std::vector<int>& predicted, const std::vector<int>& actual);

// ---------------------------------------------------------------------------
// Label-quality metrics
// ---------------------------------------------------------------------------

/// Mean squared difference between the per-dimension one-frequencies of the
/// one-hot encodings of `test` and `samples`.
/// Throws SchemaMismatch when the encoded widths differ.
double mse_p(const CategoricalDataset& test, const CategoricalDataset& samples);

/// Score vectors behind mse_f / mse_a: one predictor is fit on the real
/// training split and one on the generated samples, both scored on the test
/// split. `degenerate` lists targets that were constant in a training set
/// and therefore scored with the constant predictor.
struct ScoreVectors {
    std::vector<double> train_scores;
    std::vector<double> sample_scores;
    std::vector<std::string> degenerate;
    double mse = 0.0;
};

/// Per one-hot DIMENSION: an l2-free logistic regression predicts the
/// dimension from every other variable's encoded block; the score is the F1
/// on the test split. mse = mean squared gap between the train-fitted and
/// sample-fitted F1 vectors. Throws SchemaMismatch unless all three datasets
/// share the cardinality profile.
ScoreVectors mse_f_scores(const CategoricalDataset& train, const CategoricalDataset& samples,
                          const CategoricalDataset& test, const LogisticConfig& cfg = {});
double mse_f(const CategoricalDataset& train, const CategoricalDataset& samples,
             const CategoricalDataset& test, const LogisticConfig& cfg = {});

/// Per categorical VARIABLE: a one-vs-rest stack of logistic regressions
/// predicts the variable from every other variable's encoded block; the
/// score is the accuracy on the test split.
ScoreVectors mse_a_scores(const CategoricalDataset& train, const CategoricalDataset& samples,
                          const CategoricalDataset& test, const LogisticConfig& cfg = {});
double mse_a(const CategoricalDataset& train, const CategoricalDataset& samples,
             const CategoricalDataset& test, const LogisticConfig& cfg = {});

/// Fraction of (row, label) cells on which two label matrices agree.
/// Throws SchemaMismatch on shape mismatch, ContractViolation when empty.
double hamming_score(const std::vector<std::vector<int>>& predicted,
                     const std::vector<std::vector<int>>& actual);

// ---------------------------------------------------------------------------
// Seeded-repeat aggregation
// ---------------------------------------------------------------------------

/// Mean and sample standard deviation (n-1 denominator; 0 when n = 1) over
/// seeded repeats.
struct MetricStat {
    double mean = 0.0;
    double dev = 0.0;
};

struct LabelQualityReport {
    MetricStat mse_p;
    MetricStat mse_f;
    MetricStat mse_a;
    std::size_t repeats = 0;
    std::vector<std::string> degenerate;
};

/// Produces one generated dataset per repeat seed.
using SampleSource = std::function<CategoricalDataset(std::uint64_t seed)>;

/// Runs mse_p / mse_f / mse_a against `repeats` independently generated
/// sample sets (seeds base_seed, base_seed+1, ...) and aggregates.
/// Throws ContractViolation when repeats is zero.
LabelQualityReport evaluate_label_quality(const CategoricalDataset& train,
                                          const CategoricalDataset& test,
                                          const SampleSource& sampler, std::size_t repeats = 5,
                                          std::uint64_t base_seed = 0,
                                          const LogisticConfig& cfg = {});

// ---------------------------------------------------------------------------
// GAN-train / GAN-test harness
// ---------------------------------------------------------------------------

/// Small dense multi-label classifier: two hidden layers, one sigmoid output
/// per label, binary cross-entropy, Adam. Deterministic by seed.
struct ClassifierConfig {
    std::size_t hidden_width = 128;
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    double learning_rate = 0.001;
    std::uint64_t seed = 0;
};

struct LabelClassifier {
    Network net;
    ParameterStore store;
    std::size_t input_width = 0;
    std::size_t label_count = 0;
};

/// Trains on rows of `images` (m × pixels) against 0/1 `labels` (m × k).
/// Throws SchemaMismatch on row-count mismatch, ContractViolation when fewer
/// than two rows, NonFiniteLoss if training diverges.
LabelClassifier train_label_classifier(const Tensor& images, const Tensor& labels,
                                       const ClassifierConfig& cfg = {});

/// Thresholded predictions (sigmoid ≥ 1/2) per row and label.
std::vector<std::vector<int>> classifier_predict(const LabelClassifier& clf,
                                                 const Tensor& images);

/// gan_train: Hamming score on real_test of a classifier trained on
/// generated data. gan_test: Hamming score on generated data of a classifier
/// trained on real_train. per_label_* hold the matching per-label accuracies.
struct GanScorePair {
    double gan_train = 0.0;
    double gan_test = 0.0;
    std::vector<double> per_label_train;
    std::vector<double> per_label_test;
};

/// All three batches must share the image shape and label count; labels must
/// be 0/1. Throws SchemaMismatch otherwise.
GanScorePair gan_train_test(const ImageBatch& real_train, const ImageBatch& real_test,
                            const ImageBatch& generated, const ClassifierConfig& cfg = {});

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::string graph_metrics_json(const GraphMetrics& metrics);
std::string label_quality_json(const LabelQualityReport& report);
std::string gan_scores_json(const GanScorePair& scores);

/// Aligned plain-text tables (model rows under metric columns).
std::string graph_metrics_table(const GraphMetrics& metrics, const std::string& model,
                                const std::string& dataset);
std::string label_quality_table(const LabelQualityReport& report, const std::string& model,
                                const std::string& dataset);
std::string gan_scores_table(const GanScorePair& scores, const std::string& model,
                             const std::string& dataset);

}  // namespace can
