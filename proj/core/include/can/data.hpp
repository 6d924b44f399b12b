#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "can/graph.hpp"
#include "can/rng.hpp"
#include "can/tensor.hpp"

namespace can {

/// Ordered categorical variables with their cardinalities.
struct VariableSchema {
    std::vector<std::string> names;
    std::vector<std::size_t> cards;

    VariableSchema() = default;
    VariableSchema(std::vector<std::string> names, std::vector<std::size_t> cards);

    std::size_t size() const { return names.size(); }
    /// Width of a one-hot encoded row: sum of cardinalities.
    std::size_t total_width() const;
    /// Column offset of variable i inside an encoded row.
    std::size_t offset(std::size_t i) const;
};

/// Rows of category indices under one schema, optionally carrying the
/// generating DAG when the data is synthetic.
struct CategoricalDataset {
    VariableSchema schema;
    std::vector<std::vector<int>> rows;
    std::optional<CausalGraph> truth;

    std::size_t m() const { return rows.size(); }
    void validate() const;
};

/// Ground-truth generator: a DAG over categorical nodes. Each node's category
/// is drawn from softmax(score) where score_c sums, over the node's parents,
/// the edge weight whenever c equals the parent's value folded onto the node's
/// categories (value mod cardinality), plus noise_scale * standard normal per
/// category.
struct SyntheticScmSpec {
    std::vector<std::string> names;
    std::vector<std::size_t> cards;
    std::vector<std::pair<Edge, double>> edges;  // (src, dst) -> weight
    std::vector<double> noise;                   // per-node scale

    std::size_t size() const { return cards.size(); }
    VariableSchema schema() const { return VariableSchema(names, cards); }
    CausalGraph graph() const;
    void validate() const;
};

/// Deterministic 2-D render driven by binary labels: one label toggles a
/// filled block on/off, one selects its fill intensity, one selects its
/// vertical position band. Pixels live in [-1, 1]; background plus seeded
/// Gaussian noise elsewhere. Any role can be disabled with index -1.
struct RendererParams {
    std::size_t height = 16;
    std::size_t width = 16;
    int shape_label = 0;      // block drawn iff this label is 1
    int intensity_label = 1;  // fill: low when 0, high when 1
    int position_label = 2;   // band: top when 0, bottom when 1
    double background = -1.0;
    double fill_low = 0.0;
    double fill_high = 0.9;
    double pixel_noise = 0.05;
};

/// Images (m x height*width) with their generating labels (m x k, 0/1).
struct ImageBatch {
    Tensor images;
    Tensor labels;
    std::size_t height = 0;
    std::size_t width = 0;
};

/// Reads a comma-separated file with a header row of variable names and
/// integer cells. With no schema, cardinalities are inferred as max+1 (at
/// least 2). `one_based` shifts source categories 1..K down to 0..K-1.
/// Malformed input raises ParseError carrying 1-based row/column.
CategoricalDataset load_categorical_csv(const std::string& path,
                                        const std::optional<VariableSchema>& schema = {},
                                        bool one_based = false);
CategoricalDataset parse_categorical_csv(const std::string& text,
                                         const std::optional<VariableSchema>& schema = {},
                                         bool one_based = false);

/// m x total_width matrix of concatenated one-hot blocks.
Tensor one_hot_encode(const CategoricalDataset& dataset);
Tensor one_hot_encode_rows(const std::vector<std::vector<int>>& rows,
                           const VariableSchema& schema);
/// Per-block argmax; accepts soft rows (e.g. softmax outputs).
std::vector<std::vector<int>> one_hot_decode(const Tensor& matrix,
                                             const VariableSchema& schema);

/// Seeded shuffle then split; the first floor(m * fraction) rows train.
std::pair<CategoricalDataset, CategoricalDataset> train_test_split(
    const CategoricalDataset& dataset, double fraction, std::uint64_t seed);

/// Ancestral sampling in topological order; ground truth attached.
CategoricalDataset synth_scm_dataset(const SyntheticScmSpec& spec, std::size_t m,
                                     std::uint64_t seed);

/// Exact conditional table of node `node` given parent values when the node's
/// noise scale is zero: softmax over its category scores.
std::vector<double> synth_conditional(const SyntheticScmSpec& spec, int node,
                                      const std::vector<int>& parent_values);

/// Renders one image from a row of binary labels; noise drawn from rng.
Tensor render_image(const std::vector<int>& labels, const RendererParams& params,
                    Rng& rng);

/// Labels sampled from the label DAG, then rendered. Deterministic by seed.
ImageBatch synth_image_dataset(const SyntheticScmSpec& label_spec,
                               const RendererParams& params, std::size_t m,
                               std::uint64_t seed);

/// Parses a generator description: {"nodes": [{"name", "cardinality",
/// "noise"}...], "edges": [{"from", "to", "weight"}...], "renderer": {...}}.
SyntheticScmSpec parse_scm_spec_json(const std::string& text);
RendererParams parse_renderer_json(const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace can
