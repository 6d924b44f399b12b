// canet: command-line front end for the causal adversarial network library.
//
// Subcommands cover the full workflow: synthesizing datasets, training the
// label generator and the image generator, sampling under observational /
// interventional / conditional regimes, exporting recovered graphs, and
// scoring models. Every run that produces files writes them into a single
// output directory (default run/<timestamp>-<seed>/) together with a
// config.json echoing the fully resolved settings.
//
// Exit codes: 0 success, 2 input or configuration error, 3 numerical
// failure, 4 sampling budget exhausted (partial output is still written).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "can/checkpoint.hpp"
#include "can/cign.hpp"
#include "can/data.hpp"
#include "can/errors.hpp"
#include "can/eval.hpp"
#include "can/graph.hpp"
#include "can/image_io.hpp"
#include "can/lgn.hpp"
#include "can/rng.hpp"
#include "can/tensor.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

std::string fmt_double(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw can::ContractViolation("cannot open " + path.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw can::ContractViolation("failed writing " + path.string());
    std::cout << "wrote " << path.string() << '\n';
}

std::string timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
#if defined(_WIN32)
    localtime_s(&tm, &now);
#else
    localtime_r(&now, &tm);
#endif
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
    return buf;
}

/// Resolves and creates the output directory: `--out` verbatim when given,
/// otherwise run/<timestamp>-<seed>/.
fs::path prepare_out_dir(const std::string& out, std::uint64_t seed) {
    fs::path dir = out.empty() ? fs::path("run") / (timestamp() + "-" + std::to_string(seed))
                               : fs::path(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw can::ContractViolation("cannot create output directory " + dir.string() +
                                         ": " + ec.message());
    return dir;
}

void echo_config(const fs::path& dir, const json& resolved) {
    write_text(dir / "config.json", resolved.dump(2) + "\n");
}

std::string history_csv(const std::vector<can::EpochStats>& history) {
    std::string out = "epoch,d_loss,g_loss,h,lambda_bar,rho\n";
    for (const auto& row : history) {
        out += std::to_string(row.epoch) + ',' + fmt_double(row.d_loss) + ',' +
               fmt_double(row.g_loss) + ',' + fmt_double(row.h) + ',' +
               fmt_double(row.lambda_bar) + ',' + fmt_double(row.rho) + '\n';
    }
    return out;
}

std::string rows_csv(const std::vector<std::string>& names,
                     const std::vector<std::vector<int>>& rows) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ',';
        out += names[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += std::to_string(row[i]);
        }
        out += '\n';
    }
    return out;
}

/// Thresholds the adjacency and writes graph.dot / graph.edges / A.csv.
void export_graph_files(const fs::path& dir, const can::Tensor& a,
                        const std::vector<std::string>& names, double tau) {
    write_text(dir / "A.csv", can::adjacency_csv(a, names));
    const can::CausalGraph g = can::extract_graph(a, tau);
    write_text(dir / "graph.edges", can::to_edge_list(g, names));
    write_text(dir / "graph.dot", can::to_dot(g, names));
}

// ---------------------------------------------------------------------------
// Edge-list files ("src -> dst" per line, as written by graph exports)
// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> parse_edge_lines(const std::string& text,
                                                                  const std::string& what) {
    std::vector<std::pair<std::string, std::string>> edges;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto begin = line.find_first_not_of(" \t");
        if (begin == std::string::npos) continue;
        const auto end = line.find_last_not_of(" \t");
        line = line.substr(begin, end - begin + 1);
        if (line.empty() || line[0] == '#') continue;
        const auto arrow = line.find(" -> ");
        if (arrow == std::string::npos || arrow == 0 || arrow + 4 >= line.size())
            throw can::ParseError(what + ": expected '<src> -> <dst>'", lineno, 1);
        edges.emplace_back(line.substr(0, arrow), line.substr(arrow + 4));
    }
    return edges;
}

/// Reads two edge-list files onto a shared node index (truth names first,
/// then any new names from the estimate) so the graphs are comparable.
std::pair<can::CausalGraph, can::CausalGraph> load_graph_pair(const std::string& est_path,
                                                              const std::string& truth_path) {
    const auto est_edges = parse_edge_lines(can::read_text_file(est_path), est_path);
    const auto truth_edges = parse_edge_lines(can::read_text_file(truth_path), truth_path);

    std::vector<std::string> names;
    auto index_of = [&names](const std::string& name) {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        names.push_back(name);
        return static_cast<int>(names.size() - 1);
    };
    std::set<can::Edge> truth_set;
    for (const auto& [src, dst] : truth_edges) truth_set.insert({index_of(src), index_of(dst)});
    std::set<can::Edge> est_set;
    for (const auto& [src, dst] : est_edges) est_set.insert({index_of(src), index_of(dst)});

    const int n = static_cast<int>(names.size());
    return {can::CausalGraph(n, std::move(est_set)), can::CausalGraph(n, std::move(truth_set))};
}

// ---------------------------------------------------------------------------
// Assignment flags (--set name=value)
// ---------------------------------------------------------------------------

can::LabelAssignments parse_assignments(const can::VariableSchema& schema,
                                        const std::vector<std::string>& sets) {
    can::LabelAssignments out;
    for (const auto& entry : sets) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == entry.size())
            throw can::ContractViolation("--set expects name=value, got '" + entry + "'");
        const std::string name = entry.substr(0, eq);
        const std::string value = entry.substr(eq + 1);
        int var = -1;
        for (std::size_t i = 0; i < schema.names.size(); ++i)
            if (schema.names[i] == name) {
                var = static_cast<int>(i);
                break;
            }
        if (var < 0) throw can::SchemaMismatch("--set references unknown variable '" + name + "'");
        int category = 0;
        try {
            std::size_t used = 0;
            category = std::stoi(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
            throw can::ContractViolation("--set " + name + ": '" + value +
                                         "' is not a category index");
        }
        if (category < 0 || static_cast<std::size_t>(category) >=
                                schema.cards[static_cast<std::size_t>(var)])
            throw can::ContractViolation("--set " + name + ": category " + value +
                                         " outside cardinality " +
                                         std::to_string(schema.cards[static_cast<std::size_t>(var)]));
        out.push_back({var, category});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint kind sniffing
// ---------------------------------------------------------------------------

std::string checkpoint_kind(const std::string& path) {
    const can::CheckpointData data = can::read_checkpoint(path);
    json extras;
    try {
        extras = json::parse(data.extras_json);
    } catch (const json::exception& e) {
        throw can::ParseError(std::string("checkpoint manifest: ") + e.what(), 0, 0);
    }
    if (!extras.contains("kind") || !extras["kind"].is_string())
        throw can::SchemaMismatch("checkpoint " + path + " carries no model kind");
    return extras["kind"].get<std::string>();
}

// ---------------------------------------------------------------------------
// Shared ingredients
// ---------------------------------------------------------------------------

can::LgnConfig resolve_lgn_config(const std::string& config_path) {
    if (config_path.empty()) return can::LgnConfig{};
    return can::lgn_config_from_json(can::read_text_file(config_path));
}

can::CignConfig resolve_cign_config(const std::string& config_path) {
    if (config_path.empty()) return can::CignConfig{};
    return can::cign_config_from_json(can::read_text_file(config_path));
}

can::Tensor labels_to_tensor(const can::CategoricalDataset& data) {
    can::Tensor out = can::Tensor::zeros(data.m(), data.schema.size());
    for (std::size_t i = 0; i < data.rows.size(); ++i)
        for (std::size_t j = 0; j < data.rows[i].size(); ++j)
            out.at(i, j) = static_cast<double>(data.rows[i][j]);
    return out;
}

can::Tensor gaussian_noise(std::size_t m, std::size_t d, can::Rng& rng) {
    can::Tensor z = can::Tensor::zeros(m, d);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) z.at(i, j) = rng.normal();
    return z;
}

std::vector<std::string> cign_node_names(const can::CignModel& model) {
    std::vector<std::string> names = model.schema.names;
    for (std::size_t j = 0; j < model.d(); ++j) names.push_back("z" + std::to_string(j));
    return names;
}

/// Copies the selected rows of an image batch.
can::ImageBatch take_rows(const can::ImageBatch& batch, const std::vector<std::size_t>& rows) {
    can::ImageBatch out;
    out.height = batch.height;
    out.width = batch.width;
    out.images = can::Tensor::zeros(rows.size(), batch.images.cols());
    out.labels = can::Tensor::zeros(rows.size(), batch.labels.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < batch.images.cols(); ++j)
            out.images.at(i, j) = batch.images.at(rows[i], j);
        for (std::size_t j = 0; j < batch.labels.cols(); ++j)
            out.labels.at(i, j) = batch.labels.at(rows[i], j);
    }
    return out;
}

int run_guarded(const std::string& cmd, const std::function<int()>& body) {
    try {
        return body();
    } catch (const can::BudgetExhausted& e) {
        std::cerr << "canet " << cmd << ": " << e.what() << '\n';
        return 4;
    } catch (const can::NonFiniteLoss& e) {
        std::cerr << "canet " << cmd << ": " << e.what() << '\n';
        return 3;
    } catch (const can::NonFiniteGradient& e) {
        std::cerr << "canet " << cmd << ": " << e.what() << '\n';
        return 3;
    } catch (const can::SingularSystem& e) {
        std::cerr << "canet " << cmd << ": " << e.what() << '\n';
        return 3;
    } catch (const can::CyclicAfterThreshold& e) {
        std::cerr << "canet " << cmd << ": " << e.what() << '\n';
        return 3;
    } catch (const can::Error& e) {
        std::cerr << "canet " << cmd << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "canet " << cmd << ": " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"canet: adversarially trained causal generative models"};
    app.require_subcommand(1);

    // ---- train-lgn --------------------------------------------------------
    auto* train_lgn = app.add_subcommand(
        "train-lgn", "Train the label generator on a categorical CSV dataset");
    std::string tl_data, tl_config, tl_out;
    std::uint64_t tl_seed = 0;
    std::size_t tl_epochs = 0, tl_batch = 0, tl_critic = 0, tl_hidden = 0;
    double tl_lr_g = 0, tl_lr_d = 0, tl_lambda_gp = 0, tl_tau = 0.3;
    bool tl_shared = false, tl_one_based = false;
    train_lgn->add_option("--data", tl_data, "categorical CSV (header row of names)")
        ->required();
    train_lgn->add_option("--config", tl_config, "JSON config file; flags override its values");
    train_lgn->add_option("--out", tl_out, "output directory (default run/<timestamp>-<seed>)");
    train_lgn->add_option("--seed", tl_seed, "training seed");
    train_lgn->add_option("--epochs", tl_epochs, "training epochs");
    train_lgn->add_option("--batch", tl_batch, "batch size");
    train_lgn->add_option("--critic-steps", tl_critic, "critic updates per generator update");
    train_lgn->add_option("--hidden", tl_hidden, "trunk and critic width");
    train_lgn->add_option("--lr-g", tl_lr_g, "generator learning rate");
    train_lgn->add_option("--lr-d", tl_lr_d, "critic learning rate");
    train_lgn->add_option("--lambda-gp", tl_lambda_gp, "gradient penalty coefficient");
    train_lgn->add_option("--tau", tl_tau, "edge threshold for graph export")->capture_default_str();
    train_lgn->add_flag("--shared-trunk", tl_shared,
                        "use a shared trunk instead of per-variable heads");
    train_lgn->add_flag("--one-based", tl_one_based, "CSV categories run 1..K instead of 0..K-1");

    // ---- train-cign -------------------------------------------------------
    auto* train_cign = app.add_subcommand(
        "train-cign", "Train the image generator on a synthetic labeled-image dataset");
    std::string tc_spec, tc_config, tc_out;
    std::uint64_t tc_seed = 0;
    std::size_t tc_m = 1000, tc_epochs = 0, tc_batch = 0;
    double tc_lr_g = 0, tc_lr_d = 0, tc_tau = 0.3;
    train_cign
        ->add_option("--spec", tc_spec,
                     "JSON with the label DAG ('nodes'/'edges') and a 'renderer' object")
        ->required();
    train_cign->add_option("--config", tc_config, "JSON config file; flags override its values");
    train_cign->add_option("--out", tc_out, "output directory (default run/<timestamp>-<seed>)");
    train_cign->add_option("--seed", tc_seed, "training seed (also seeds the dataset)");
    train_cign->add_option("-m,--count", tc_m, "number of images to synthesize")->capture_default_str();
    train_cign->add_option("--epochs", tc_epochs, "training epochs");
    train_cign->add_option("--batch", tc_batch, "batch size");
    train_cign->add_option("--lr-g", tc_lr_g, "generator learning rate");
    train_cign->add_option("--lr-d", tc_lr_d, "discriminator learning rate");
    train_cign->add_option("--tau", tc_tau, "edge threshold for graph export")->capture_default_str();

    // ---- sample -----------------------------------------------------------
    auto* sample = app.add_subcommand(
        "sample", "Draw labels from a trained label-generator checkpoint");
    std::string sm_ckpt, sm_out, sm_mode = "observe", sm_decode = "argmax";
    std::vector<std::string> sm_sets;
    std::uint64_t sm_seed = 0;
    std::size_t sm_m = 1000, sm_budget = 0;
    sample->add_option("--checkpoint", sm_ckpt, "label-generator checkpoint")->required();
    sample->add_option("--mode", sm_mode, "observe | intervene | condition")->capture_default_str()
        ->check(CLI::IsMember({"observe", "intervene", "condition"}));
    sample->add_option("--set", sm_sets,
                       "name=value assignment (repeatable; intervene/condition only)");
    sample->add_option("-m,--count", sm_m, "rows to draw")->capture_default_str();
    sample->add_option("--budget", sm_budget,
                       "conditional draw budget (0 = max(100*m, 10000))")->capture_default_str();
    sample->add_option("--decode", sm_decode, "argmax | sample")->capture_default_str()
        ->check(CLI::IsMember({"argmax", "sample"}));
    sample->add_option("--seed", sm_seed, "sampling seed");
    sample->add_option("--out", sm_out, "output directory (default run/<timestamp>-<seed>)");

    // ---- gen-images -------------------------------------------------------
    auto* gen_images = app.add_subcommand(
        "gen-images", "Render PNG images from an image-generator checkpoint and a labels CSV");
    std::string gi_ckpt, gi_labels, gi_out, gi_prefix = "img";
    std::uint64_t gi_seed = 0;
    gen_images->add_option("--checkpoint", gi_ckpt, "image-generator checkpoint")->required();
    gen_images->add_option("--labels", gi_labels, "CSV of 0/1 labels (header = label names)")
        ->required();
    gen_images->add_option("--seed", gi_seed, "noise seed");
    gen_images->add_option("--out", gi_out, "output directory (default run/<timestamp>-<seed>)");
    gen_images->add_option("--prefix", gi_prefix, "image filename prefix")->capture_default_str();

    // ---- extract-graph ----------------------------------------------------
    auto* extract = app.add_subcommand(
        "extract-graph", "Export the learned adjacency of a checkpoint as dot/edges/CSV");
    std::string xg_ckpt, xg_out;
    double xg_tau = 0.3;
    std::uint64_t xg_seed = 0;
    extract->add_option("--checkpoint", xg_ckpt, "label- or image-generator checkpoint")
        ->required();
    extract->add_option("--tau", xg_tau, "edge threshold")->capture_default_str();
    extract->add_option("--seed", xg_seed, "only names the default output directory");
    extract->add_option("--out", xg_out, "output directory (default run/<timestamp>-<seed>)");

    // ---- eval-graph -------------------------------------------------------
    auto* eval_graph = app.add_subcommand(
        "eval-graph", "Compare an estimated edge list against a ground-truth edge list");
    std::string eg_graph, eg_truth, eg_out;
    eval_graph->add_option("--graph", eg_graph, "estimated edge list ('src -> dst' lines)")
        ->required();
    eval_graph->add_option("--truth", eg_truth, "ground-truth edge list")->required();
    eval_graph->add_option("--out", eg_out, "optional output directory for graph_metrics.json");

    // ---- eval-labels ------------------------------------------------------
    auto* eval_labels = app.add_subcommand(
        "eval-labels", "Score a label-generator checkpoint against a held-out split of a CSV");
    std::string el_ckpt, el_data, el_out;
    std::uint64_t el_seed = 0;
    std::size_t el_repeats = 5;
    double el_split = 0.5;
    bool el_one_based = false;
    eval_labels->add_option("--checkpoint", el_ckpt, "label-generator checkpoint")->required();
    eval_labels->add_option("--data", el_data, "categorical CSV matching the model schema")
        ->required();
    eval_labels->add_option("--split", el_split, "train fraction of the data")->capture_default_str();
    eval_labels->add_option("--repeats", el_repeats, "seeded sampling repeats")->capture_default_str();
    eval_labels->add_option("--seed", el_seed, "split seed and base sampling seed");
    eval_labels->add_option("--out", el_out, "optional output directory for label_quality.json");
    eval_labels->add_flag("--one-based", el_one_based,
                          "CSV categories run 1..K instead of 0..K-1");

    // ---- eval-gan ---------------------------------------------------------
    auto* eval_gan = app.add_subcommand(
        "eval-gan", "GAN-train/GAN-test scores of an image-generator checkpoint");
    std::string ga_ckpt, ga_spec, ga_out;
    std::uint64_t ga_seed = 0;
    std::size_t ga_m = 1000, ga_clf_epochs = 20, ga_clf_hidden = 128;
    double ga_fraction = 0.8;
    eval_gan->add_option("--checkpoint", ga_ckpt, "image-generator checkpoint")->required();
    eval_gan
        ->add_option("--spec", ga_spec,
                     "JSON with the label DAG and 'renderer' used for the real data")
        ->required();
    eval_gan->add_option("-m,--count", ga_m, "real images to synthesize")->capture_default_str();
    eval_gan->add_option("--train-fraction", ga_fraction, "real train split fraction")->capture_default_str();
    eval_gan->add_option("--seed", ga_seed, "dataset/split/noise/classifier seed");
    eval_gan->add_option("--clf-epochs", ga_clf_epochs, "probe classifier epochs")->capture_default_str();
    eval_gan->add_option("--clf-hidden", ga_clf_hidden, "probe classifier hidden width")->capture_default_str();
    eval_gan->add_option("--out", ga_out, "optional output directory for gan_scores.json");

    // ---- synth-data -------------------------------------------------------
    auto* synth = app.add_subcommand(
        "synth-data", "Sample a categorical dataset from a ground-truth DAG spec");
    std::string sd_spec, sd_out;
    std::uint64_t sd_seed = 0;
    std::size_t sd_m = 1000;
    synth->add_option("--spec", sd_spec, "JSON with 'nodes' and 'edges'")->required();
    synth->add_option("-m,--count", sd_m, "rows to sample")->capture_default_str();
    synth->add_option("--seed", sd_seed, "sampling seed");
    synth->add_option("--out", sd_out, "output directory (default run/<timestamp>-<seed>)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "canet: " << e.what() << '\n';
        return 2;
    }

    // ---- dispatch ----------------------------------------------------------

    if (*train_lgn) {
        return run_guarded("train-lgn", [&] {
            can::LgnConfig cfg = resolve_lgn_config(tl_config);
            if (train_lgn->count("--seed")) cfg.seed = tl_seed;
            if (train_lgn->count("--epochs")) cfg.epochs = tl_epochs;
            if (train_lgn->count("--batch")) cfg.batch_size = tl_batch;
            if (train_lgn->count("--critic-steps")) cfg.critic_steps = tl_critic;
            if (train_lgn->count("--hidden")) cfg.hidden_width = tl_hidden;
            if (train_lgn->count("--lr-g")) cfg.lr_g = tl_lr_g;
            if (train_lgn->count("--lr-d")) cfg.lr_d = tl_lr_d;
            if (train_lgn->count("--lambda-gp")) cfg.lambda_gp = tl_lambda_gp;
            if (tl_shared) cfg.structured_heads = false;
            cfg.validate();

            const can::CategoricalDataset data =
                can::load_categorical_csv(tl_data, {}, tl_one_based);
            const fs::path dir = prepare_out_dir(tl_out, cfg.seed);
            echo_config(dir, json{{"command", "train-lgn"},
                                  {"data", tl_data},
                                  {"tau", tl_tau},
                                  {"one_based", tl_one_based},
                                  {"config", json::parse(can::lgn_config_to_json(cfg))}});

            can::LgnTrainResult result = can::train_lgn(data, cfg);
            const can::EpochStats& last = result.history.back();
            std::cout << "trained " << cfg.epochs << " epochs: d_loss=" << last.d_loss
                      << " g_loss=" << last.g_loss << " h=" << last.h << '\n';

            can::save_lgn((dir / "model.bin").string(), result.model);
            std::cout << "wrote " << (dir / "model.bin").string() << '\n';
            write_text(dir / "history.csv", history_csv(result.history));
            export_graph_files(dir, result.model.adjacency(), result.model.schema.names, tl_tau);
            return 0;
        });
    }

    if (*train_cign) {
        return run_guarded("train-cign", [&] {
            can::CignConfig cfg = resolve_cign_config(tc_config);
            if (train_cign->count("--seed")) cfg.seed = tc_seed;
            if (train_cign->count("--epochs")) cfg.epochs = tc_epochs;
            if (train_cign->count("--batch")) cfg.batch_size = tc_batch;
            if (train_cign->count("--lr-g")) cfg.lr_g = tc_lr_g;
            if (train_cign->count("--lr-d")) cfg.lr_d = tc_lr_d;
            cfg.validate();

            const std::string spec_text = can::read_text_file(tc_spec);
            const can::SyntheticScmSpec label_spec = can::parse_scm_spec_json(spec_text);
            const can::RendererParams renderer = can::parse_renderer_json(spec_text);
            const can::ImageBatch data =
                can::synth_image_dataset(label_spec, renderer, tc_m, cfg.seed);

            const fs::path dir = prepare_out_dir(tc_out, cfg.seed);
            echo_config(dir, json{{"command", "train-cign"},
                                  {"spec", tc_spec},
                                  {"m", tc_m},
                                  {"tau", tc_tau},
                                  {"config", json::parse(can::cign_config_to_json(cfg))}});

            can::CignTrainResult result = can::train_cign(data, cfg);
            const can::EpochStats& last = result.history.back();
            std::cout << "trained " << cfg.epochs << " epochs: d_loss=" << last.d_loss
                      << " g_loss=" << last.g_loss << " h=" << last.h << '\n';

            can::save_cign((dir / "model.bin").string(), result.model);
            std::cout << "wrote " << (dir / "model.bin").string() << '\n';
            write_text(dir / "history.csv", history_csv(result.history));
            export_graph_files(dir, result.model.adjacency(), cign_node_names(result.model),
                               tc_tau);
            return 0;
        });
    }

    if (*sample) {
        return run_guarded("sample", [&] {
            const can::LgnModel model = can::load_lgn(sm_ckpt);
            const can::LabelAssignments assignments =
                parse_assignments(model.schema, sm_sets);
            if (sm_mode == "observe" && !assignments.empty())
                throw can::ContractViolation("--set requires --mode intervene or condition");
            if (sm_mode != "observe" && assignments.empty())
                throw can::ContractViolation("--mode " + sm_mode +
                                             " needs at least one --set assignment");
            const can::DecodeMode decode = sm_decode == "argmax" ? can::DecodeMode::kArgmax
                                                                 : can::DecodeMode::kSample;
            const std::size_t budget =
                sm_budget ? sm_budget : std::max<std::size_t>(100 * sm_m, 10000);

            const fs::path dir = prepare_out_dir(sm_out, sm_seed);
            echo_config(dir, json{{"command", "sample"},
                                  {"checkpoint", sm_ckpt},
                                  {"mode", sm_mode},
                                  {"set", sm_sets},
                                  {"m", sm_m},
                                  {"budget", budget},
                                  {"decode", sm_decode},
                                  {"seed", sm_seed}});

            can::Rng rng(sm_seed);
            std::vector<std::vector<int>> rows;
            json stats{{"mode", sm_mode}, {"requested", sm_m}};
            bool exhausted = false;
            if (sm_m == 0) {
                // header-only output
            } else if (sm_mode == "observe") {
                rows = can::sample_observational(model, sm_m, rng, decode);
            } else if (sm_mode == "intervene") {
                rows = can::sample_interventional(model, assignments, sm_m, rng, decode);
            } else {
                can::ConditionalDraw draw =
                    can::sample_conditional_stats(model, assignments, sm_m, budget, rng, decode);
                exhausted = draw.exhausted();
                stats["drawn"] = draw.drawn;
                stats["budget"] = budget;
                stats["acceptance_rate"] = draw.acceptance_rate;
                std::cout << "acceptance_rate=" << draw.acceptance_rate << '\n';
                rows = std::move(draw.rows);
            }
            stats["produced"] = rows.size();

            write_text(dir / "samples.csv", rows_csv(model.schema.names, rows));
            write_text(dir / "stats.json", stats.dump(2) + "\n");
            if (exhausted) {
                std::cerr << "canet sample: budget " << budget << " exhausted after "
                          << rows.size() << " of " << sm_m << " rows\n";
                return 4;
            }
            return 0;
        });
    }

    if (*gen_images) {
        return run_guarded("gen-images", [&] {
            const can::CignModel model = can::load_cign(gi_ckpt);
            const can::CategoricalDataset labels =
                can::load_categorical_csv(gi_labels, model.schema);
            if (labels.m() == 0)
                throw can::ContractViolation("labels CSV holds no rows");

            const fs::path dir = prepare_out_dir(gi_out, gi_seed);
            echo_config(dir, json{{"command", "gen-images"},
                                  {"checkpoint", gi_ckpt},
                                  {"labels", gi_labels},
                                  {"seed", gi_seed},
                                  {"prefix", gi_prefix},
                                  {"count", labels.m()}});

            can::Rng rng(gi_seed);
            const can::Tensor label_matrix = labels_to_tensor(labels);
            const can::Tensor z = gaussian_noise(labels.m(), model.d(), rng);
            const can::ImageBatch batch =
                can::cign_generate(model, label_matrix, z, can::Mode::kEval);
            for (std::size_t i = 0; i < labels.m(); ++i) {
                char name[64];
                std::snprintf(name, sizeof(name), "%s%05zu.png", gi_prefix.c_str(), i);
                const fs::path path = dir / name;
                can::write_png_gray(path.string(), can::image_from_batch(batch, i));
                std::cout << "wrote " << path.string() << '\n';
            }
            return 0;
        });
    }

    if (*extract) {
        return run_guarded("extract-graph", [&] {
            const std::string kind = checkpoint_kind(xg_ckpt);
            can::Tensor a;
            std::vector<std::string> names;
            if (kind == "lgn") {
                const can::LgnModel model = can::load_lgn(xg_ckpt);
                a = model.adjacency();
                names = model.schema.names;
            } else if (kind == "cign") {
                const can::CignModel model = can::load_cign(xg_ckpt);
                a = model.adjacency();
                names = cign_node_names(model);
            } else {
                throw can::SchemaMismatch("checkpoint kind '" + kind + "' has no graph");
            }
            const fs::path dir = prepare_out_dir(xg_out, xg_seed);
            echo_config(dir, json{{"command", "extract-graph"},
                                  {"checkpoint", xg_ckpt},
                                  {"kind", kind},
                                  {"tau", xg_tau}});
            export_graph_files(dir, a, names, xg_tau);
            return 0;
        });
    }

    if (*eval_graph) {
        return run_guarded("eval-graph", [&] {
            const auto [est, truth] = load_graph_pair(eg_graph, eg_truth);
            const can::GraphMetrics metrics = can::graph_metrics(est, truth);
            const std::string payload = can::graph_metrics_json(metrics);
            std::cout << payload << '\n';
            if (!eg_out.empty()) {
                const fs::path dir = prepare_out_dir(eg_out, 0);
                echo_config(dir, json{{"command", "eval-graph"},
                                      {"graph", eg_graph},
                                      {"truth", eg_truth}});
                write_text(dir / "graph_metrics.json", payload + "\n");
            }
            return 0;
        });
    }

    if (*eval_labels) {
        return run_guarded("eval-labels", [&] {
            const can::LgnModel model = can::load_lgn(el_ckpt);
            const can::CategoricalDataset data =
                can::load_categorical_csv(el_data, model.schema, el_one_based);
            const auto [train, test] = can::train_test_split(data, el_split, el_seed);
            const std::size_t sample_m = train.m();
            const can::SampleSource sampler = [&model, sample_m](std::uint64_t seed) {
                can::Rng rng(seed);
                return can::CategoricalDataset{
                    model.schema, can::sample_observational(model, sample_m, rng), {}};
            };
            const can::LabelQualityReport report =
                can::evaluate_label_quality(train, test, sampler, el_repeats, el_seed);
            std::cout << can::label_quality_table(
                report, fs::path(el_ckpt).filename().string(),
                fs::path(el_data).filename().string());
            if (!el_out.empty()) {
                const fs::path dir = prepare_out_dir(el_out, el_seed);
                echo_config(dir, json{{"command", "eval-labels"},
                                      {"checkpoint", el_ckpt},
                                      {"data", el_data},
                                      {"split", el_split},
                                      {"repeats", el_repeats},
                                      {"seed", el_seed}});
                write_text(dir / "label_quality.json", can::label_quality_json(report) + "\n");
            }
            return 0;
        });
    }

    if (*eval_gan) {
        return run_guarded("eval-gan", [&] {
            const can::CignModel model = can::load_cign(ga_ckpt);
            const std::string spec_text = can::read_text_file(ga_spec);
            const can::SyntheticScmSpec label_spec = can::parse_scm_spec_json(spec_text);
            const can::RendererParams renderer = can::parse_renderer_json(spec_text);
            const can::ImageBatch real =
                can::synth_image_dataset(label_spec, renderer, ga_m, ga_seed);

            if (ga_fraction <= 0.0 || ga_fraction >= 1.0)
                throw can::ContractViolation("--train-fraction must lie strictly in (0, 1)");
            std::vector<std::size_t> order(ga_m);
            for (std::size_t i = 0; i < ga_m; ++i) order[i] = i;
            can::Rng split_rng(ga_seed ^ 0x5851f42d4c957f2dull);
            split_rng.shuffle(order);
            const std::size_t train_m =
                static_cast<std::size_t>(static_cast<double>(ga_m) * ga_fraction);
            if (train_m < 2 || ga_m - train_m < 1)
                throw can::ContractViolation("split leaves too few rows on one side");
            const std::vector<std::size_t> train_rows(order.begin(),
                                                      order.begin() + static_cast<long>(train_m));
            const std::vector<std::size_t> test_rows(order.begin() + static_cast<long>(train_m),
                                                     order.end());
            const can::ImageBatch real_train = take_rows(real, train_rows);
            const can::ImageBatch real_test = take_rows(real, test_rows);

            can::Rng noise_rng(ga_seed ^ 0x9e6c63d0876a9a47ull);
            const can::Tensor z = gaussian_noise(train_m, model.d(), noise_rng);
            const can::ImageBatch generated =
                can::cign_generate(model, real_train.labels, z, can::Mode::kEval);

            can::ClassifierConfig clf;
            clf.hidden_width = ga_clf_hidden;
            clf.epochs = ga_clf_epochs;
            clf.seed = ga_seed;
            const can::GanScorePair scores =
                can::gan_train_test(real_train, real_test, generated, clf);
            std::cout << can::gan_scores_table(scores, fs::path(ga_ckpt).filename().string(),
                                               fs::path(ga_spec).filename().string());
            if (!ga_out.empty()) {
                const fs::path dir = prepare_out_dir(ga_out, ga_seed);
                echo_config(dir, json{{"command", "eval-gan"},
                                      {"checkpoint", ga_ckpt},
                                      {"spec", ga_spec},
                                      {"m", ga_m},
                                      {"train_fraction", ga_fraction},
                                      {"clf_epochs", ga_clf_epochs},
                                      {"clf_hidden", ga_clf_hidden},
                                      {"seed", ga_seed}});
                write_text(dir / "gan_scores.json", can::gan_scores_json(scores) + "\n");
            }
            return 0;
        });
    }

    if (*synth) {
        return run_guarded("synth-data", [&] {
            const can::SyntheticScmSpec spec =
                can::parse_scm_spec_json(can::read_text_file(sd_spec));
            const can::CategoricalDataset data = can::synth_scm_dataset(spec, sd_m, sd_seed);
            const fs::path dir = prepare_out_dir(sd_out, sd_seed);
            echo_config(dir, json{{"command", "synth-data"},
                                  {"spec", sd_spec},
                                  {"m", sd_m},
                                  {"seed", sd_seed}});
            write_text(dir / "data.csv", rows_csv(spec.names, data.rows));
            const can::CausalGraph g = spec.graph();
            write_text(dir / "truth.edges", can::to_edge_list(g, spec.names));
            write_text(dir / "truth.dot", can::to_dot(g, spec.names));
            return 0;
        });
    }

    std::cerr << "canet: no subcommand selected\n";
    return 2;
}
