// Command-line front end.  Talks to the core exclusively through the C API
// so the binary exercises the same surface any other embedding would.
//
// Exit codes: 0 success, 1 invalid configuration, 2 runtime failure
// (every sweep point aborted, bad file, ...), 3 partial sweep.

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "evfl.h"

namespace {

int status_to_exit(evfl_status s) {
    switch (s) {
        case EVFL_OK: return 0;
        case EVFL_ERR_CONFIG: return 1;
        case EVFL_ERR_PARTIAL: return 3;
        default: return 2;
    }
}

void print_error() {
    const char* msg = evfl_last_error();
    if (msg && *msg) std::fprintf(stderr, "error: %s\n", msg);
}

struct ConfigHandle {
    evfl_config* cfg = nullptr;
    ~ConfigHandle() { evfl_config_free(cfg); }
};

int cmd_validate(const std::string& path) {
    ConfigHandle h;
    evfl_status s = evfl_config_load(path.c_str(), &h.cfg);
    if (s != EVFL_OK) {
        print_error();
        return status_to_exit(s);
    }
    char* diags = nullptr;
    s = evfl_config_validate(h.cfg, &diags);
    if (s != EVFL_OK) {
        if (diags) std::fprintf(stderr, "%s\n", diags);
        evfl_string_free(diags);
        return status_to_exit(s);
    }
    std::printf("ok\n");
    return 0;
}

int cmd_run(const std::string& path, const std::string& output_dir,
            bool have_sd, std::uint64_t sd, bool have_si, std::uint64_t si,
            bool have_sa, std::uint64_t sa) {
    ConfigHandle h;
    evfl_status s = evfl_config_load(path.c_str(), &h.cfg);
    if (s != EVFL_OK) {
        print_error();
        return status_to_exit(s);
    }
    if (have_sd || have_si || have_sa) {
        std::uint64_t d = 0, i = 0, a = 0;
        evfl_config_get_seeds(h.cfg, &d, &i, &a);
        evfl_config_set_seeds(h.cfg, have_sd ? sd : d, have_si ? si : i,
                              have_sa ? sa : a);
    }
    char* diags = nullptr;
    s = evfl_config_validate(h.cfg, &diags);
    if (s != EVFL_OK) {
        if (diags) std::fprintf(stderr, "%s\n", diags);
        evfl_string_free(diags);
        return status_to_exit(s);
    }
    s = evfl_run(h.cfg, output_dir.empty() ? nullptr : output_dir.c_str());
    if (s != EVFL_OK) {
        print_error();
        return status_to_exit(s);
    }
    return 0;
}

int cmd_audit(const std::string& trace, std::uint64_t l, double alpha,
              const std::string& checkpoints, const std::string& out_csv) {
    double total = 0.0;
    evfl_status s = evfl_audit_trace(
        trace.c_str(), l, alpha, checkpoints.empty() ? nullptr : checkpoints.c_str(),
        out_csv.empty() ? nullptr : out_csv.c_str(), &total);
    if (s != EVFL_OK) {
        print_error();
        return status_to_exit(s);
    }
    std::printf("%.17g\n", total);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-driven online vertical federated learning simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(evfl_version()));

    std::string config_path, output_dir;
    std::uint64_t seed_data = 0, seed_init = 0, seed_activation = 0;

    CLI::App* run = app.add_subcommand("run", "Run a sweep from a JSON config");
    run->add_option("config", config_path, "Path to the JSON config")->required();
    run->add_option("--output-dir", output_dir, "Override the config's output directory");
    CLI::Option* osd = run->add_option("--seed-data", seed_data, "Override the data seed");
    CLI::Option* osi = run->add_option("--seed-init", seed_init, "Override the init seed");
    CLI::Option* osa =
        run->add_option("--seed-activation", seed_activation, "Override the activation seed");

    std::string v_path;
    CLI::App* validate = app.add_subcommand("validate", "Check a JSON config");
    validate->add_option("config", v_path, "Path to the JSON config")->required();

    std::string trace_path, checkpoints, audit_out;
    std::uint64_t audit_l = 10;
    double audit_alpha = 0.99;
    CLI::App* audit =
        app.add_subcommand("audit", "Empirical dynamic-local-regret of a gradient trace");
    audit->add_option("trace", trace_path, "Path to a saved trace (trace.bin)")->required();
    audit->add_option("--l", audit_l, "Window length")->required();
    audit->add_option("--alpha", audit_alpha, "Exponential decay in (0,1]")->required();
    audit->add_option("--checkpoints", checkpoints,
                      "Comma-separated ascending horizons to report");
    audit->add_option("--out", audit_out, "Write the (T,value) series to this CSV");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed())
        return cmd_run(config_path, output_dir, osd->count() > 0, seed_data,
                       osi->count() > 0, seed_init, osa->count() > 0, seed_activation);
    if (validate->parsed()) return cmd_validate(v_path);
    return cmd_audit(trace_path, audit_l, audit_alpha, checkpoints, audit_out);
}
