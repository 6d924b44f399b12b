#include "can/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "can/errors.hpp"

namespace can {

using nlohmann::json;

VariableSchema::VariableSchema(std::vector<std::string> names_in,
                               std::vector<std::size_t> cards_in)
    : names(std::move(names_in)), cards(std::move(cards_in)) {
    if (names.size() != cards.size())
        throw ContractViolation("schema: names/cardinalities length mismatch");
    std::unordered_set<std::string> seen;
    for (const auto& n : names)
        if (!seen.insert(n).second)
            throw ContractViolation("schema: duplicate variable name '" + n + "'");
    for (std::size_t c : cards)
        if (c < 2) throw ContractViolation("schema: cardinality below 2");
}

std::size_t VariableSchema::total_width() const {
    return std::accumulate(cards.begin(), cards.end(), std::size_t{0});
}

std::size_t VariableSchema::offset(std::size_t i) const {
    std::size_t off = 0;
    for (std::size_t j = 0; j < i; ++j) off += cards[j];
    return off;
}

void CategoricalDataset::validate() const {
    for (const auto& row : rows) {
        if (row.size() != schema.size())
            throw ContractViolation("dataset row width does not match schema");
        for (std::size_t i = 0; i < row.size(); ++i)
            if (row[i] < 0 || static_cast<std::size_t>(row[i]) >= schema.cards[i])
                throw ContractViolation("dataset value outside schema cardinality");
    }
}

CausalGraph SyntheticScmSpec::graph() const {
    std::set<Edge> e;
    for (const auto& [edge, w] : edges) e.insert(edge);
    return CausalGraph(static_cast<int>(size()), std::move(e));
}

void SyntheticScmSpec::validate() const {
    if (names.size() != cards.size() || noise.size() != cards.size())
        throw ContractViolation("generator spec: field lengths disagree");
    schema();  // name/cardinality invariants
    for (const auto& [edge, w] : edges)
        if (!std::isfinite(w))
            throw ContractViolation("generator spec: non-finite edge weight");
    for (double s : noise)
        if (!(s >= 0.0) || !std::isfinite(s))
            throw ContractViolation("generator spec: noise scale must be finite and >= 0");
    graph();  // acyclicity
}

// ---- CSV ------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

long parse_int_cell(const std::string& cell, std::size_t row, std::size_t col) {
    long value = 0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc{} || ptr != last)
        throw ParseError("cell '" + cell + "' is not an integer", row, col);
    return value;
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file '" + path + "'", 0, 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CategoricalDataset parse_categorical_csv(const std::string& text,
                                         const std::optional<VariableSchema>& schema,
                                         bool one_based) {
    std::vector<std::string> lines;
    {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(line);
        }
        while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    }
    if (lines.empty()) throw ParseError("empty file: no header row", 1, 1);

    const std::vector<std::string> names = split_commas(lines[0]);
    if (names.size() == 1 && names[0].empty())
        throw ParseError("empty header row", 1, 1);
    const std::size_t n = names.size();
    if (schema && schema->size() != n)
        throw ParseError("header has " + std::to_string(n) + " columns but schema has " +
                             std::to_string(schema->size()),
                         1, 1);

    std::vector<std::vector<int>> rows;
    rows.reserve(lines.size() - 1);
    std::vector<long> max_value(n, 0);
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::size_t row_no = li + 1;  // 1-based, header is row 1
        std::vector<std::string> cells = split_commas(lines[li]);
        if (cells.size() != n)
            throw ParseError("row has " + std::to_string(cells.size()) +
                                 " cells, expected " + std::to_string(n),
                             row_no, cells.size());
        std::vector<int> row(n);
        for (std::size_t c = 0; c < n; ++c) {
            long v = parse_int_cell(cells[c], row_no, c + 1);
            if (one_based) v -= 1;
            if (v < 0)
                throw ParseError("category index " + std::to_string(v) + " is negative",
                                 row_no, c + 1);
            if (schema && static_cast<std::size_t>(v) >= schema->cards[c])
                throw ParseError("category index " + std::to_string(v) +
                                     " out of range for '" + names[c] + "' (valid 0.." +
                                     std::to_string(schema->cards[c] - 1) + ")",
                                 row_no, c + 1);
            max_value[c] = std::max(max_value[c], v);
            row[c] = static_cast<int>(v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("no data rows", 2, 1);

    VariableSchema out_schema;
    if (schema) {
        out_schema = *schema;
        out_schema.names = names;  // header wins for display names
    } else {
        std::vector<std::size_t> cards(n);
        for (std::size_t c = 0; c < n; ++c)
            cards[c] = std::max<std::size_t>(2, static_cast<std::size_t>(max_value[c]) + 1);
        out_schema = VariableSchema(names, cards);
    }
    CategoricalDataset dataset{std::move(out_schema), std::move(rows), std::nullopt};
    dataset.validate();
    return dataset;
}

CategoricalDataset load_categorical_csv(const std::string& path,
                                        const std::optional<VariableSchema>& schema,
                                        bool one_based) {
    return parse_categorical_csv(read_text_file(path), schema, one_based);
}

// ---- encoding ---------------------------------------------------------------

Tensor one_hot_encode_rows(const std::vector<std::vector<int>>& rows,
                           const VariableSchema& schema) {
    const std::size_t w = schema.total_width();
    Tensor out = Tensor::zeros(rows.size(), w);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != schema.size())
            throw SchemaMismatch("row width " + std::to_string(rows[r].size()) +
                                 " does not match schema size " +
                                 std::to_string(schema.size()));
        std::size_t off = 0;
        for (std::size_t i = 0; i < schema.size(); ++i) {
            const int v = rows[r][i];
            if (v < 0 || static_cast<std::size_t>(v) >= schema.cards[i])
                throw SchemaMismatch("category index out of schema range");
            out.at(r, off + static_cast<std::size_t>(v)) = 1.0;
            off += schema.cards[i];
        }
    }
    return out;
}

Tensor one_hot_encode(const CategoricalDataset& dataset) {
    return one_hot_encode_rows(dataset.rows, dataset.schema);
}

std::vector<std::vector<int>> one_hot_decode(const Tensor& matrix,
                                             const VariableSchema& schema) {
    if (matrix.cols() != schema.total_width())
        throw SchemaMismatch("matrix width " + std::to_string(matrix.cols()) +
                             " does not match encoded width " +
                             std::to_string(schema.total_width()));
    std::vector<std::vector<int>> rows(matrix.rows(), std::vector<int>(schema.size()));
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < schema.size(); ++i) {
            std::size_t best = 0;
            double best_v = matrix.at(r, off);
            for (std::size_t c = 1; c < schema.cards[i]; ++c) {
                const double v = matrix.at(r, off + c);
                if (v > best_v) {
                    best_v = v;
                    best = c;
                }
            }
            rows[r][i] = static_cast<int>(best);
            off += schema.cards[i];
        }
    }
    return rows;
}

// ---- splitting ----------------------------------------------------------------

std::pair<CategoricalDataset, CategoricalDataset> train_test_split(
    const CategoricalDataset& dataset, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ContractViolation("split fraction must lie strictly between 0 and 1");
    std::vector<std::size_t> idx(dataset.m());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);
    const auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(dataset.m()) * fraction + 1e-9));
    CategoricalDataset train{dataset.schema, {}, dataset.truth};
    CategoricalDataset test{dataset.schema, {}, dataset.truth};
    train.rows.reserve(n_train);
    test.rows.reserve(dataset.m() - n_train);
    for (std::size_t k = 0; k < idx.size(); ++k)
        (k < n_train ? train : test).rows.push_back(dataset.rows[idx[k]]);
    return {std::move(train), std::move(test)};
}

// ---- synthetic generators --------------------------------------------------

namespace {

std::vector<double> node_scores(const SyntheticScmSpec& spec, int node,
                                const std::vector<int>& values) {
    const std::size_t card = spec.cards[static_cast<std::size_t>(node)];
    std::vector<double> scores(card, 0.0);
    for (const auto& [edge, w] : spec.edges) {
        if (edge.second != node) continue;
        const int pv = values[static_cast<std::size_t>(edge.first)];
        scores[static_cast<std::size_t>(pv) % card] += w;
    }
    return scores;
}

std::vector<double> softmax_vec(std::vector<double> s) {
    const double mx = *std::max_element(s.begin(), s.end());
    double sum = 0.0;
    for (double& v : s) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : s) v /= sum;
    return s;
}

int draw_categorical(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
        acc += probs[c];
        if (u < acc) return static_cast<int>(c);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace

std::vector<double> synth_conditional(const SyntheticScmSpec& spec, int node,
                                      const std::vector<int>& parent_values) {
    return softmax_vec(node_scores(spec, node, parent_values));
}

CategoricalDataset synth_scm_dataset(const SyntheticScmSpec& spec, std::size_t m,
                                     std::uint64_t seed) {
    if (m < 1) throw ContractViolation("sample count must be at least 1");
    spec.validate();
    const CausalGraph truth = spec.graph();
    const std::vector<int> topo = topological_order(truth);
    Rng rng(seed);

    std::vector<std::vector<int>> rows(m, std::vector<int>(spec.size(), 0));
    for (std::size_t r = 0; r < m; ++r) {
        for (int node : topo) {
            std::vector<double> scores = node_scores(spec, node, rows[r]);
            const double sigma = spec.noise[static_cast<std::size_t>(node)];
            if (sigma > 0.0)
                for (double& s : scores) s += sigma * rng.normal();
            rows[r][static_cast<std::size_t>(node)] =
                draw_categorical(softmax_vec(std::move(scores)), rng);
        }
    }
    CategoricalDataset dataset{spec.schema(), std::move(rows), truth};
    dataset.validate();
    return dataset;
}

// ---- image rendering ---------------------------------------------------------

namespace {

int label_at(const std::vector<int>& labels, int idx) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= labels.size()) return 0;
    return labels[static_cast<std::size_t>(idx)] != 0 ? 1 : 0;
}

}  // namespace

Tensor render_image(const std::vector<int>& labels, const RendererParams& params,
                    Rng& rng) {
    const std::size_t h = params.height;
    const std::size_t w = params.width;
    if (h < 8 || w < 8)
        throw ContractViolation("renderer needs at least an 8x8 canvas");
    Tensor img = Tensor::full(h, w, params.background);

    const bool shape = params.shape_label < 0 || label_at(labels, params.shape_label) == 1;
    const double fill = label_at(labels, params.intensity_label) == 1 ? params.fill_high
                                                                      : params.fill_low;
    const bool bottom = label_at(labels, params.position_label) == 1;

    if (shape) {
        // Block spans the middle half of the columns and a quarter-height band.
        const std::size_t c0 = w / 4, c1 = w - w / 4;
        const std::size_t band = h / 4;
        const std::size_t r0 = bottom ? h - h / 8 - band : h / 8;
        for (std::size_t r = r0; r < r0 + band; ++r)
            for (std::size_t c = c0; c < c1; ++c) img.at(r, c) = fill;
    }
    if (params.pixel_noise > 0.0)
        for (double& v : img.raw()) v += params.pixel_noise * rng.normal();
    return img.reshaped({1, h * w});
}

ImageBatch synth_image_dataset(const SyntheticScmSpec& label_spec,
                               const RendererParams& params, std::size_t m,
                               std::uint64_t seed) {
    for (std::size_t c : label_spec.cards)
        if (c != 2) throw ContractViolation("image labels must be binary");
    const CategoricalDataset labels = synth_scm_dataset(label_spec, m, seed);
    const std::size_t k = label_spec.size();

    ImageBatch batch;
    batch.height = params.height;
    batch.width = params.width;
    batch.images = Tensor::zeros(m, params.height * params.width);
    batch.labels = Tensor::zeros(m, k);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);  // renderer noise stream
    for (std::size_t r = 0; r < m; ++r) {
        const Tensor img = render_image(labels.rows[r], params, rng);
        for (std::size_t j = 0; j < img.size(); ++j) batch.images.at(r, j) = img[j];
        for (std::size_t j = 0; j < k; ++j)
            batch.labels.at(r, j) = static_cast<double>(labels.rows[r][j]);
    }
    return batch;
}

// ---- JSON specs ---------------------------------------------------------------

namespace {

json parse_json(const std::string& text) {
    json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) throw ParseError("malformed JSON document", 0, 0);
    return doc;
}

}  // namespace

SyntheticScmSpec parse_scm_spec_json(const std::string& text) {
    const json doc = parse_json(text);
    if (!doc.contains("nodes") || !doc["nodes"].is_array() || doc["nodes"].empty())
        throw ParseError("generator spec: missing or empty 'nodes' array", 0, 0);

    SyntheticScmSpec spec;
    std::unordered_map<std::string, int> index;
    for (const auto& node : doc["nodes"]) {
        if (!node.contains("name"))
            throw ParseError("generator spec: node without 'name'", 0, 0);
        const std::string name = node["name"].get<std::string>();
        if (!index.emplace(name, static_cast<int>(spec.names.size())).second)
            throw ParseError("generator spec: duplicate node '" + name + "'", 0, 0);
        spec.names.push_back(name);
        spec.cards.push_back(node.value("cardinality", std::size_t{2}));
        spec.noise.push_back(node.value("noise", 0.0));
    }
    if (doc.contains("edges")) {
        for (const auto& edge : doc["edges"]) {
            const std::string from = edge.at("from").get<std::string>();
            const std::string to = edge.at("to").get<std::string>();
            if (!index.count(from) || !index.count(to))
                throw ParseError("generator spec: edge references unknown node", 0, 0);
            spec.edges.push_back({{index[from], index[to]}, edge.value("weight", 1.0)});
        }
    }
    spec.validate();
    return spec;
}

RendererParams parse_renderer_json(const std::string& text) {
    const json doc = parse_json(text);
    const json r = doc.contains("renderer") ? doc["renderer"] : doc;
    RendererParams p;
    p.height = r.value("height", p.height);
    p.width = r.value("width", p.width);
    p.shape_label = r.value("shape_label", p.shape_label);
    p.intensity_label = r.value("intensity_label", p.intensity_label);
    p.position_label = r.value("position_label", p.position_label);
    p.background = r.value("background", p.background);
    p.fill_low = r.value("fill_low", p.fill_low);
    p.fill_high = r.value("fill_high", p.fill_high);
    p.pixel_noise = r.value("pixel_noise", p.pixel_noise);
    return p;
}

}  // namespace can
