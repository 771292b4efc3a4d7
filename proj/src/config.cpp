#include "evfl/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace evfl {

using nlohmann::json;

namespace {

// Collects structural diagnostics while pulling typed values out of the
// JSON tree, so one pass reports every problem.
struct Extractor {
    std::vector<std::string> diags;

    void unknown_keys(const json& obj, const std::string& where,
                      const std::set<std::string>& allowed) {
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!allowed.count(it.key()))
                diags.push_back(where + ": unknown key '" + it.key() + "'");
    }

    template <typename T>
    void get(const json& obj, const std::string& where, const char* key, T& out) {
        auto it = obj.find(key);
        if (it == obj.end()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            diags.push_back(where + "." + key + ": wrong type (" +
                            std::string(it->type_name()) + ")");
        }
    }

    // Scalar-or-list field.
    template <typename T>
    void get_list(const json& obj, const std::string& where, const char* key,
                  std::vector<T>& out) {
        auto it = obj.find(key);
        if (it == obj.end()) return;
        try {
            if (it->is_array())
                out = it->get<std::vector<T>>();
            else
                out = {it->get<T>()};
        } catch (const json::exception&) {
            diags.push_back(where + "." + key + ": expected value or list (" +
                            std::string(it->type_name()) + ")");
        }
    }

    // double that also accepts the strings "inf"/"-inf".
    void get_gamma_list(const json& obj, const std::string& where, const char* key,
                        std::vector<double>& out) {
        auto it = obj.find(key);
        if (it == obj.end()) return;
        json arr = it->is_array() ? *it : json::array({*it});
        std::vector<double> vals;
        for (const auto& v : arr) {
            if (v.is_number()) {
                vals.push_back(v.get<double>());
            } else if (v.is_string()) {
                std::string s = v.get<std::string>();
                if (s == "inf" || s == "+inf")
                    vals.push_back(std::numeric_limits<double>::infinity());
                else if (s == "-inf")
                    vals.push_back(-std::numeric_limits<double>::infinity());
                else
                    diags.push_back(where + "." + key + ": bad value '" + s + "'");
            } else {
                diags.push_back(where + "." + key + ": expected number or \"inf\"/\"-inf\"");
            }
        }
        if (!vals.empty()) out = std::move(vals);
    }
};

OptKind parse_opt_kind(const std::string& s, Extractor& ex) {
    if (s == "ogd") return OptKind::OGD;
    if (s == "slr") return OptKind::SLR;
    if (s == "dlr") return OptKind::DLR;
    ex.diags.push_back("optimizer.kind: unknown kind '" + s + "' (ogd|slr|dlr)");
    return OptKind::DLR;
}

std::string short_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");

    Extractor ex;
    ExperimentConfig cfg;

    ex.unknown_keys(root, "config",
                    {"rounds", "clients", "seeds", "dataset", "model", "stream", "optimizer",
                     "activation", "metrics", "audit", "checkpoint", "parallel",
                     "output_dir"});
    ex.get(root, "config", "rounds", cfg.rounds);
    ex.get(root, "config", "clients", cfg.clients);
    ex.get(root, "config", "parallel", cfg.parallel);
    ex.get(root, "config", "output_dir", cfg.output_dir);

    if (auto it = root.find("seeds"); it != root.end() && it->is_object()) {
        ex.unknown_keys(*it, "seeds", {"data", "init", "activation"});
        ex.get(*it, "seeds", "data", cfg.seed_data);
        ex.get(*it, "seeds", "init", cfg.seed_init);
        ex.get(*it, "seeds", "activation", cfg.seed_activation);
    } else if (it != root.end()) {
        ex.diags.push_back("seeds: must be an object");
    }

    if (auto it = root.find("dataset"); it != root.end() && it->is_object()) {
        ex.unknown_keys(*it, "dataset",
                        {"kind", "classes", "images", "labels", "augment_translate", "path",
                         "label_column", "standardize_rows", "label_values", "variant",
                         "samples", "dim", "noise", "radius", "margin"});
        ex.get(*it, "dataset", "kind", cfg.dataset.kind);
        ex.get(*it, "dataset", "classes", cfg.dataset.classes);
        ex.get(*it, "dataset", "images", cfg.dataset.images);
        ex.get(*it, "dataset", "labels", cfg.dataset.labels);
        ex.get(*it, "dataset", "augment_translate", cfg.dataset.augment_translate);
        ex.get(*it, "dataset", "path", cfg.dataset.path);
        ex.get(*it, "dataset", "label_column", cfg.dataset.label_column);
        ex.get(*it, "dataset", "standardize_rows", cfg.dataset.standardize_rows);
        ex.get(*it, "dataset", "label_values", cfg.dataset.label_values);
        ex.get(*it, "dataset", "variant", cfg.dataset.synthetic.variant);
        ex.get(*it, "dataset", "samples", cfg.dataset.synthetic.samples);
        ex.get(*it, "dataset", "dim", cfg.dataset.synthetic.dim);
        ex.get(*it, "dataset", "noise", cfg.dataset.synthetic.noise);
        ex.get(*it, "dataset", "radius", cfg.dataset.synthetic.radius);
        ex.get(*it, "dataset", "margin", cfg.dataset.synthetic.margin);
        cfg.dataset.synthetic.classes = cfg.dataset.classes;
    } else if (it != root.end()) {
        ex.diags.push_back("dataset: must be an object");
    }

    if (auto it = root.find("model"); it != root.end() && it->is_object()) {
        ex.unknown_keys(*it, "model",
                        {"client_hidden", "embed_dim", "server_hidden", "client_bias",
                         "server_bias", "client_relu", "server_relu"});
        ex.get(*it, "model", "client_hidden", cfg.model.client_hidden);
        ex.get(*it, "model", "embed_dim", cfg.model.embed_dim);
        ex.get(*it, "model", "server_hidden", cfg.model.server_hidden);
        ex.get(*it, "model", "client_bias", cfg.model.client_bias);
        ex.get(*it, "model", "server_bias", cfg.model.server_bias);
        ex.get(*it, "model", "client_relu", cfg.model.client_relu);
        ex.get(*it, "model", "server_relu", cfg.model.server_relu);
    } else if (it != root.end()) {
        ex.diags.push_back("model: must be an object");
    }

    if (auto it = root.find("stream"); it != root.end() && it->is_object()) {
        ex.unknown_keys(*it, "stream", {"resample_period"});
        ex.get(*it, "stream", "resample_period", cfg.resample_period);
    } else if (it != root.end()) {
        ex.diags.push_back("stream: must be an object");
    }

    if (auto it = root.find("optimizer"); it != root.end() && it->is_object()) {
        ex.unknown_keys(*it, "optimizer", {"kind", "eta", "l", "alpha", "eta_schedule"});
        std::vector<std::string> kinds;
        ex.get_list(*it, "optimizer", "kind", kinds);
        if (!kinds.empty()) {
            cfg.opt_kinds.clear();
            for (const auto& k : kinds) cfg.opt_kinds.push_back(parse_opt_kind(k, ex));
        }
        ex.get_list(*it, "optimizer", "eta", cfg.etas);
        ex.get_list(*it, "optimizer", "l", cfg.ls);
        ex.get(*it, "optimizer", "alpha", cfg.alpha);
        ex.get(*it, "optimizer", "eta_schedule", cfg.eta_schedule);
    } else if (it != root.end()) {
        ex.diags.push_back("optimizer: must be an object");
    }

    if (auto it = root.find("activation"); it != root.end() && it->is_object()) {
        ex.unknown_keys(*it, "activation", {"kind", "p", "p_per_client", "gamma"});
        std::vector<std::string> kinds;
        ex.get_list(*it, "activation", "kind", kinds);
        if (!kinds.empty()) cfg.act_kinds = std::move(kinds);
        ex.get_list(*it, "activation", "p", cfg.ps);
        ex.get(*it, "activation", "p_per_client", cfg.p_per_client);
        ex.get_gamma_list(*it, "activation", "gamma", cfg.gammas);
    } else if (it != root.end()) {
        ex.diags.push_back("activation: must be an object");
    }

    if (auto it = root.find("metrics"); it != root.end() && it->is_object()) {
        ex.unknown_keys(*it, "metrics", {"window", "events_log", "count_query_bytes"});
        ex.get(*it, "metrics", "window", cfg.metrics_window);
        ex.get(*it, "metrics", "events_log", cfg.events_log);
        ex.get(*it, "metrics", "count_query_bytes", cfg.count_query_bytes);
    } else if (it != root.end()) {
        ex.diags.push_back("metrics: must be an object");
    }

    if (auto it = root.find("audit"); it != root.end() && it->is_object()) {
        ex.unknown_keys(*it, "audit", {"trace", "l", "alpha", "checkpoints", "save_trace"});
        ex.get(*it, "audit", "trace", cfg.audit.enabled);
        ex.get(*it, "audit", "l", cfg.audit.l);
        ex.get(*it, "audit", "alpha", cfg.audit.alpha);
        ex.get(*it, "audit", "checkpoints", cfg.audit.checkpoints);
        ex.get(*it, "audit", "save_trace", cfg.audit.save_trace);
    } else if (it != root.end()) {
        ex.diags.push_back("audit: must be an object");
    }

    if (auto it = root.find("checkpoint"); it != root.end() && it->is_object()) {
        ex.unknown_keys(*it, "checkpoint", {"save_final", "load_dir"});
        ex.get(*it, "checkpoint", "save_final", cfg.checkpoint_final);
        ex.get(*it, "checkpoint", "load_dir", cfg.checkpoint_load_dir);
    } else if (it != root.end()) {
        ex.diags.push_back("checkpoint: must be an object");
    }

    if (!ex.diags.empty()) throw ConfigError(ex.diags);
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
    std::vector<std::string> d;
    auto file_exists = [](const std::string& p) {
        std::ifstream f(p);
        return static_cast<bool>(f);
    };

    if (cfg.rounds == 0) d.push_back("rounds: must be >= 1");
    if (cfg.clients == 0) d.push_back("clients: must be >= 1");
    if (cfg.metrics_window == 0) d.push_back("metrics.window: must be >= 1");
    if (cfg.parallel == 0) d.push_back("parallel: must be >= 1");

    const auto& ds = cfg.dataset;
    if (ds.kind == "mnist-idx") {
        if (ds.images.empty() || !file_exists(ds.images))
            d.push_back("dataset.images: file not found: '" + ds.images + "'");
        if (ds.labels.empty() || !file_exists(ds.labels))
            d.push_back("dataset.labels: file not found: '" + ds.labels + "'");
    } else if (ds.kind == "csv") {
        if (ds.path.empty() || !file_exists(ds.path))
            d.push_back("dataset.path: file not found: '" + ds.path + "'");
        if (ds.augment_translate)
            d.push_back("dataset.augment_translate: only valid for mnist-idx data");
    } else if (ds.kind == "synthetic") {
        if (ds.synthetic.variant != "blobs" && ds.synthetic.variant != "separable")
            d.push_back("dataset.variant: unknown variant '" + ds.synthetic.variant +
                        "' (blobs|separable)");
        if (ds.synthetic.variant == "separable" && ds.classes != 2)
            d.push_back("dataset.classes: variant 'separable' requires exactly 2 classes");
        if (ds.synthetic.samples == 0) d.push_back("dataset.samples: must be >= 1");
        if (ds.synthetic.dim < cfg.clients)
            d.push_back("dataset.dim: " + std::to_string(ds.synthetic.dim) +
                        " features cannot cover " + std::to_string(cfg.clients) + " clients");
        if (ds.augment_translate)
            d.push_back("dataset.augment_translate: only valid for mnist-idx data");
    } else {
        d.push_back("dataset.kind: unknown kind '" + ds.kind + "' (mnist-idx|csv|synthetic)");
    }
    if (ds.classes < 2) d.push_back("dataset.classes: must be >= 2");

    if (cfg.model.embed_dim == 0) d.push_back("model.embed_dim: must be >= 1");
    for (std::size_t w : cfg.model.client_hidden)
        if (w == 0) d.push_back("model.client_hidden: zero width");
    for (std::size_t w : cfg.model.server_hidden)
        if (w == 0) d.push_back("model.server_hidden: zero width");

    if (cfg.opt_kinds.empty()) d.push_back("optimizer.kind: empty sweep list");
    if (cfg.etas.empty()) d.push_back("optimizer.eta: empty sweep list");
    for (double e : cfg.etas)
        if (!(e > 0.0)) d.push_back("optimizer.eta: must be > 0, got " + short_double(e));
    if (cfg.ls.empty()) d.push_back("optimizer.l: empty sweep list");
    for (std::size_t l : cfg.ls)
        if (l == 0) d.push_back("optimizer.l: must be >= 1");
    bool has_dlr = false;
    for (OptKind k : cfg.opt_kinds) has_dlr = has_dlr || k == OptKind::DLR;
    if (has_dlr && !(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        d.push_back("optimizer.alpha: must lie in (0, 1), got " + short_double(cfg.alpha));
    if (cfg.eta_schedule != "constant" && cfg.eta_schedule != "inv_sqrt")
        d.push_back("optimizer.eta_schedule: unknown schedule '" + cfg.eta_schedule +
                    "' (constant|inv_sqrt)");

    if (cfg.act_kinds.empty()) d.push_back("activation.kind: empty sweep list");
    bool has_random = false;
    for (const auto& k : cfg.act_kinds) {
        if (k != "full" && k != "random" && k != "event")
            d.push_back("activation.kind: unknown kind '" + k + "' (full|random|event)");
        has_random = has_random || k == "random";
    }
    for (double p : cfg.ps)
        if (!(p >= 0.0 && p <= 1.0))
            d.push_back("activation.p: must lie in [0, 1], got " + short_double(p));
    if (!cfg.p_per_client.empty()) {
        if (cfg.p_per_client.size() != cfg.clients)
            d.push_back("activation.p_per_client: got " +
                        std::to_string(cfg.p_per_client.size()) + " entries for " +
                        std::to_string(cfg.clients) + " clients");
        for (double p : cfg.p_per_client)
            if (!(p >= 0.0 && p <= 1.0))
                d.push_back("activation.p_per_client: must lie in [0, 1], got " +
                            short_double(p));
        if (has_random && cfg.ps.size() > 1)
            d.push_back("activation.p_per_client: cannot combine with a p sweep list");
    }
    if (cfg.ps.empty()) d.push_back("activation.p: empty sweep list");
    if (cfg.gammas.empty()) d.push_back("activation.gamma: empty sweep list");

    if (cfg.audit.enabled) {
        if (cfg.audit.l == 0) d.push_back("audit.l: must be >= 1");
        if (!(cfg.audit.alpha > 0.0 && cfg.audit.alpha <= 1.0))
            d.push_back("audit.alpha: must lie in (0, 1], got " + short_double(cfg.audit.alpha));
        for (std::size_t i = 0; i < cfg.audit.checkpoints.size(); ++i) {
            if (cfg.audit.checkpoints[i] == 0 || cfg.audit.checkpoints[i] > cfg.rounds)
                d.push_back("audit.checkpoints: value " +
                            std::to_string(cfg.audit.checkpoints[i]) +
                            " outside [1, rounds]");
            if (i > 0 && cfg.audit.checkpoints[i] <= cfg.audit.checkpoints[i - 1])
                d.push_back("audit.checkpoints: must be strictly ascending");
        }
    }
    return d;
}

std::string serialize_config(const ExperimentConfig& cfg) {
    json j;
    j["rounds"] = cfg.rounds;
    j["clients"] = cfg.clients;
    j["seeds"] = {{"data", cfg.seed_data},
                  {"init", cfg.seed_init},
                  {"activation", cfg.seed_activation}};
    json ds;
    ds["kind"] = cfg.dataset.kind;
    ds["classes"] = cfg.dataset.classes;
    if (cfg.dataset.kind == "mnist-idx") {
        ds["images"] = cfg.dataset.images;
        ds["labels"] = cfg.dataset.labels;
        ds["augment_translate"] = cfg.dataset.augment_translate;
    } else if (cfg.dataset.kind == "csv") {
        ds["path"] = cfg.dataset.path;
        ds["label_column"] = cfg.dataset.label_column;
        ds["standardize_rows"] = cfg.dataset.standardize_rows;
        if (!cfg.dataset.label_values.empty()) ds["label_values"] = cfg.dataset.label_values;
    } else {
        ds["variant"] = cfg.dataset.synthetic.variant;
        ds["samples"] = cfg.dataset.synthetic.samples;
        ds["dim"] = cfg.dataset.synthetic.dim;
        ds["noise"] = cfg.dataset.synthetic.noise;
        ds["radius"] = cfg.dataset.synthetic.radius;
        ds["margin"] = cfg.dataset.synthetic.margin;
    }
    j["dataset"] = std::move(ds);
    j["model"] = {{"client_hidden", cfg.model.client_hidden},
                  {"embed_dim", cfg.model.embed_dim},
                  {"server_hidden", cfg.model.server_hidden},
                  {"client_bias", cfg.model.client_bias},
                  {"server_bias", cfg.model.server_bias},
                  {"client_relu", cfg.model.client_relu},
                  {"server_relu", cfg.model.server_relu}};
    j["stream"] = {{"resample_period", cfg.resample_period}};
    json opt;
    {
        std::vector<std::string> kinds;
        for (OptKind k : cfg.opt_kinds) kinds.push_back(to_string(k));
        opt["kind"] = kinds;
    }
    opt["eta"] = cfg.etas;
    opt["l"] = cfg.ls;
    opt["alpha"] = cfg.alpha;
    opt["eta_schedule"] = cfg.eta_schedule;
    j["optimizer"] = std::move(opt);
    json act;
    act["kind"] = cfg.act_kinds;
    act["p"] = cfg.ps;
    if (!cfg.p_per_client.empty()) act["p_per_client"] = cfg.p_per_client;
    {
        json g = json::array();
        for (double v : cfg.gammas) {
            if (std::isinf(v))
                g.push_back(v > 0 ? "inf" : "-inf");
            else
                g.push_back(v);
        }
        act["gamma"] = std::move(g);
    }
    j["activation"] = std::move(act);
    j["metrics"] = {{"window", cfg.metrics_window},
                    {"events_log", cfg.events_log},
                    {"count_query_bytes", cfg.count_query_bytes}};
    j["audit"] = {{"trace", cfg.audit.enabled},
                  {"l", cfg.audit.l},
                  {"alpha", cfg.audit.alpha},
                  {"checkpoints", cfg.audit.checkpoints},
                  {"save_trace", cfg.audit.save_trace}};
    j["checkpoint"] = {{"save_final", cfg.checkpoint_final},
                       {"load_dir", cfg.checkpoint_load_dir}};
    j["parallel"] = cfg.parallel;
    j["output_dir"] = cfg.output_dir;
    return j.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    // FNV-1a over the canonical serialization.
    std::string s = serialize_config(cfg);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<SweepPoint> expand_sweep(const ExperimentConfig& cfg) {
    std::vector<SweepPoint> points;
    const bool sweep_eta = cfg.etas.size() > 1;
    const bool sweep_l = cfg.ls.size() > 1;
    const bool sweep_p = cfg.ps.size() > 1;
    const bool sweep_g = cfg.gammas.size() > 1;
    for (OptKind ok : cfg.opt_kinds)
        for (const std::string& ak : cfg.act_kinds)
            for (double eta : cfg.etas)
                for (std::size_t l : cfg.ls)
                    for (double p : cfg.ps)
                        for (double gamma : cfg.gammas) {
                            SweepPoint pt;
                            pt.opt.kind = ok;
                            pt.opt.l = l;
                            pt.opt.alpha = cfg.alpha;
                            pt.opt.eta_server = eta;
                            pt.opt.eta_client = eta;
                            pt.opt.eta_schedule = cfg.eta_schedule;
                            pt.act_kind = ak;
                            pt.p = p;
                            pt.p_per_client = cfg.p_per_client;
                            pt.gamma = gamma;
                            pt.name = to_string(ok) + "-" + ak;
                            if (sweep_eta) pt.name += "_eta" + short_double(eta);
                            if (sweep_l) pt.name += "_l" + std::to_string(l);
                            if (sweep_p) pt.name += "_p" + short_double(p);
                            if (sweep_g) pt.name += "_g" + short_double(gamma);
                            points.push_back(std::move(pt));
                        }
    return points;
}

} // namespace evfl
