#include "evfl.h"

#include <cctype>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "evfl/config.hpp"
#include "evfl/error.hpp"
#include "evfl/metrics.hpp"
#include "evfl/regret_audit.hpp"
#include "evfl/runner.hpp"

struct evfl_config {
    evfl::ExperimentConfig cfg;
};

namespace {

thread_local std::string g_last_error;

evfl_status fail(evfl_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

evfl_status ok() {
    g_last_error.clear();
    return EVFL_OK;
}

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p) std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

std::vector<std::uint64_t> parse_checkpoint_csv(const char* text) {
    std::vector<std::uint64_t> out;
    if (!text || !*text) return out;
    std::stringstream ss{std::string(text)};
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(cell, &pos);
        } catch (const std::exception&) {
            throw evfl::ConfigError({"audit checkpoints: cannot parse '" + cell + "'"});
        }
        while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
        if (pos != cell.size())
            throw evfl::ConfigError({"audit checkpoints: cannot parse '" + cell + "'"});
        out.push_back(static_cast<std::uint64_t>(v));
    }
    return out;
}

} // namespace

extern "C" {

const char* evfl_version(void) { return "0.1.0"; }

const char* evfl_last_error(void) { return g_last_error.c_str(); }

void evfl_string_free(char* s) { std::free(s); }

evfl_status evfl_config_parse(const char* json_text, evfl_config** out) {
    if (!json_text || !out) return fail(EVFL_ERR_ARGUMENT, "NULL argument");
    *out = nullptr;
    try {
        auto* handle = new evfl_config{evfl::parse_config(json_text)};
        *out = handle;
        return ok();
    } catch (const evfl::Error& e) {
        return fail(EVFL_ERR_CONFIG, e.what());
    } catch (const std::exception& e) {
        return fail(EVFL_ERR_CONFIG, e.what());
    }
}

evfl_status evfl_config_load(const char* path, evfl_config** out) {
    if (!path || !out) return fail(EVFL_ERR_ARGUMENT, "NULL argument");
    *out = nullptr;
    try {
        auto* handle = new evfl_config{evfl::load_config_file(path)};
        *out = handle;
        return ok();
    } catch (const evfl::IoError& e) {
        return fail(EVFL_ERR_RUNTIME, e.what());
    } catch (const evfl::Error& e) {
        return fail(EVFL_ERR_CONFIG, e.what());
    } catch (const std::exception& e) {
        return fail(EVFL_ERR_CONFIG, e.what());
    }
}

void evfl_config_free(evfl_config* cfg) { delete cfg; }

evfl_status evfl_config_validate(const evfl_config* cfg, char** diagnostics_out) {
    if (diagnostics_out) *diagnostics_out = nullptr;
    if (!cfg) return fail(EVFL_ERR_ARGUMENT, "NULL config");
    std::vector<std::string> diags = evfl::validate_config(cfg->cfg);
    if (diags.empty()) return ok();
    std::string joined;
    for (const std::string& d : diags) {
        if (!joined.empty()) joined += '\n';
        joined += d;
    }
    if (diagnostics_out) *diagnostics_out = dup_string(joined);
    return fail(EVFL_ERR_CONFIG, joined);
}

evfl_status evfl_config_set_output_dir(evfl_config* cfg, const char* dir) {
    if (!cfg || !dir) return fail(EVFL_ERR_ARGUMENT, "NULL argument");
    cfg->cfg.output_dir = dir;
    return ok();
}

evfl_status evfl_config_set_seeds(evfl_config* cfg, uint64_t data_seed,
                                  uint64_t init_seed, uint64_t activation_seed) {
    if (!cfg) return fail(EVFL_ERR_ARGUMENT, "NULL config");
    cfg->cfg.seed_data = data_seed;
    cfg->cfg.seed_init = init_seed;
    cfg->cfg.seed_activation = activation_seed;
    return ok();
}

evfl_status evfl_config_get_seeds(const evfl_config* cfg, uint64_t* data_seed,
                                  uint64_t* init_seed, uint64_t* activation_seed) {
    if (!cfg) return fail(EVFL_ERR_ARGUMENT, "NULL config");
    if (data_seed) *data_seed = cfg->cfg.seed_data;
    if (init_seed) *init_seed = cfg->cfg.seed_init;
    if (activation_seed) *activation_seed = cfg->cfg.seed_activation;
    return ok();
}

evfl_status evfl_config_serialize(const evfl_config* cfg, char** json_out) {
    if (!cfg || !json_out) return fail(EVFL_ERR_ARGUMENT, "NULL argument");
    *json_out = dup_string(evfl::serialize_config(cfg->cfg));
    return *json_out ? ok() : fail(EVFL_ERR_RUNTIME, "out of memory");
}

evfl_status evfl_run(const evfl_config* cfg, const char* output_dir_or_null) {
    if (!cfg) return fail(EVFL_ERR_ARGUMENT, "NULL config");
    try {
        evfl::ExperimentResult res = evfl::run_experiment(
            cfg->cfg, output_dir_or_null ? output_dir_or_null : "");
        switch (res.exit_code()) {
            case 0:
                return ok();
            case 3: {
                std::string msg = "sweep points aborted:";
                for (const evfl::PointResult& p : res.points)
                    if (!p.ok) msg += " " + p.name + " (" + p.error + ")";
                return fail(EVFL_ERR_PARTIAL, msg);
            }
            default: {
                std::string msg = "every sweep point aborted:";
                for (const evfl::PointResult& p : res.points)
                    if (!p.ok) msg += " " + p.name + " (" + p.error + ")";
                return fail(EVFL_ERR_RUNTIME, msg);
            }
        }
    } catch (const evfl::ConfigError& e) {
        return fail(EVFL_ERR_CONFIG, e.what());
    } catch (const evfl::Error& e) {
        return fail(EVFL_ERR_RUNTIME, e.what());
    } catch (const std::exception& e) {
        return fail(EVFL_ERR_RUNTIME, e.what());
    }
}

evfl_status evfl_audit_trace(const char* trace_path, uint64_t l, double alpha,
                             const char* checkpoints_csv_or_null,
                             const char* out_csv_or_null, double* total_out) {
    if (!trace_path) return fail(EVFL_ERR_ARGUMENT, "NULL trace path");
    try {
        evfl::GradientTrace trace = evfl::load_trace(trace_path);
        std::vector<std::uint64_t> marks = parse_checkpoint_csv(checkpoints_csv_or_null);
        const std::uint64_t total_rounds = trace.grads.size();
        if (marks.empty() || marks.back() != total_rounds) marks.push_back(total_rounds);
        std::vector<std::pair<std::uint64_t, double>> series =
            evfl::empirical_dlr(trace, static_cast<std::size_t>(l), alpha, marks);
        if (out_csv_or_null && *out_csv_or_null)
            evfl::write_series_csv(out_csv_or_null, "dlr", series);
        if (total_out) *total_out = series.back().second;
        return ok();
    } catch (const evfl::ConfigError& e) {
        return fail(EVFL_ERR_CONFIG, e.what());
    } catch (const evfl::DimError& e) {
        return fail(EVFL_ERR_CONFIG, e.what());
    } catch (const evfl::Error& e) {
        return fail(EVFL_ERR_RUNTIME, e.what());
    } catch (const std::exception& e) {
        return fail(EVFL_ERR_RUNTIME, e.what());
    }
}

} // extern "C"
