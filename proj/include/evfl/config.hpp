#pragma once
// Experiment configuration: a JSON file with one object per concern.  The
// fields optimizer.kind/eta/l and activation.kind/p/gamma accept either a
// single value or a list; lists are sweep axes and the run expands their
// cartesian product into one session per point.
//
// Seeds are three independent streams: data (sampling + synthetic
// generation), init (parameter draws), activation (random policies).
// Changing one never perturbs consumers of the others.

#include <cstdint>
#include <string>
#include <vector>

#include "evfl/optimizers.hpp"
#include "evfl/streams.hpp"

namespace evfl {

struct DatasetConfig {
    std::string kind = "synthetic";  // "mnist-idx" | "csv" | "synthetic"
    int classes = 10;
    // mnist-idx
    std::string images, labels;
    bool augment_translate = false;
    // csv
    std::string path;
    std::size_t label_column = 0;
    std::size_t standardize_rows = 10000;
    std::vector<double> label_values;  // raw label value -> class index
    // synthetic
    SyntheticSpec synthetic;
};

struct ModelConfig {
    std::vector<std::size_t> client_hidden;        // widths between input part and embedding
    std::size_t embed_dim = 64;
    std::vector<std::size_t> server_hidden = {256};
    bool client_bias = true;
    bool server_bias = true;
    bool client_relu = true;  // ReLU after every client layer, embedding included
    bool server_relu = true;  // ReLU after server hidden layers (logits stay raw)
};

struct AuditConfig {
    bool enabled = false;  // record the full-gradient trace during the run
    std::size_t l = 10;
    double alpha = 0.99;
    std::vector<std::uint64_t> checkpoints;  // default: [rounds]
    bool save_trace = false;                 // also persist trace.bin
};

struct ExperimentConfig {
    std::uint64_t rounds = 200000;
    std::size_t clients = 4;
    std::uint64_t seed_data = 1, seed_init = 2, seed_activation = 3;

    DatasetConfig dataset;
    ModelConfig model;
    std::uint64_t resample_period = 0;  // stream drift; 0 = stationary

    // Sweep axes.
    std::vector<OptKind> opt_kinds{OptKind::DLR};
    std::vector<double> etas{0.1};
    std::vector<std::size_t> ls{10};
    double alpha = 0.95;
    std::string eta_schedule = "constant";

    std::vector<std::string> act_kinds{"full"};
    std::vector<double> ps{0.5};
    std::vector<double> p_per_client;  // fixed per-client probabilities (excludes a p sweep)
    std::vector<double> gammas{0.0};

    std::uint64_t metrics_window = 20000;
    bool events_log = false;
    bool count_query_bytes = false;

    AuditConfig audit;

    bool checkpoint_final = false;
    std::string checkpoint_load_dir;

    unsigned parallel = 1;
    std::string output_dir = "out";
};

// One expanded sweep point.
struct SweepPoint {
    std::string name;
    OptimizerSpec opt;
    std::string act_kind;
    double p = 0.5;
    std::vector<double> p_per_client;
    double gamma = 0.0;
};

// Parsing throws ConfigError carrying every structural diagnostic (bad
// JSON, wrong types, unknown keys).  Semantic range checks live in
// validate_config, which returns all diagnostics at once.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

// Canonical JSON (sorted keys, lists always lists) — serialize/parse
// round-trips to an identical canonical form.
std::string serialize_config(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Cartesian expansion in deterministic order: optimizer kind, activation
// kind, eta, l, p, gamma.  Point names are "<opt>-<act>" plus one
// "_<axis><value>" suffix per axis that actually sweeps.
std::vector<SweepPoint> expand_sweep(const ExperimentConfig& cfg);

} // namespace evfl
