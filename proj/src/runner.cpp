#include "evfl/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include "evfl/error.hpp"
#include "evfl/events.hpp"
#include "evfl/models.hpp"
#include "evfl/optimizers.hpp"
#include "evfl/protocol.hpp"
#include "evfl/regret_audit.hpp"
#include "evfl/rng.hpp"
#include "evfl/streams.hpp"

namespace fs = std::filesystem;

namespace evfl {
namespace {

// Synthetic data generation draws from a seed derived from seed_data so the
// stream's own draw sequence (seeded with seed_data directly) stays
// decoupled from how many values generation consumed.
constexpr std::uint64_t kGenSeedSalt = 0x9E3779B97F4A7C15ull;

Dataset build_dataset(const ExperimentConfig& cfg) {
    const DatasetConfig& d = cfg.dataset;
    if (d.kind == "mnist-idx") {
        return load_idx(d.images, d.labels, d.classes);
    }
    if (d.kind == "csv") {
        return load_csv(d.path, d.label_column, d.classes, d.standardize_rows,
                        d.label_values);
    }
    Rng gen(cfg.seed_data ^ kGenSeedSalt);
    return make_synthetic(d.synthetic, gen);
}

std::vector<std::size_t> client_widths(const ExperimentConfig& cfg,
                                       std::size_t part_dim) {
    std::vector<std::size_t> w;
    w.push_back(part_dim);
    for (std::size_t h : cfg.model.client_hidden) w.push_back(h);
    w.push_back(cfg.model.embed_dim);
    return w;
}

std::vector<std::size_t> server_widths(const ExperimentConfig& cfg,
                                       std::size_t num_classes) {
    std::vector<std::size_t> w;
    w.push_back(cfg.clients * cfg.model.embed_dim);
    for (std::size_t h : cfg.model.server_hidden) w.push_back(h);
    w.push_back(num_classes);
    return w;
}

// Participant draw order is fixed (server, then clients ascending) so every
// sweep point sees identical initial parameters from the same init seed.
SplitModel build_models(const ExperimentConfig& cfg,
                        const FeaturePartition& partition,
                        std::size_t num_classes) {
    Rng init(cfg.seed_init);
    SplitModel sm;
    sm.server = make_mlp(server_widths(cfg, num_classes), cfg.model.server_bias,
                         cfg.model.server_relu, /*relu_after_last=*/false, init);
    sm.clients.reserve(cfg.clients);
    for (std::size_t m = 0; m < cfg.clients; ++m) {
        sm.clients.push_back(make_mlp(client_widths(cfg, partition.dim(m)),
                                      cfg.model.client_bias, cfg.model.client_relu,
                                      /*relu_after_last=*/cfg.model.client_relu,
                                      init));
    }
    return sm;
}

void check_same_shape(const Mlp& got, const Mlp& want, const std::string& what) {
    if (got.layers.size() != want.layers.size())
        throw FormatError("checkpoint " + what + ": layer count mismatch");
    for (std::size_t i = 0; i < got.layers.size(); ++i) {
        const AffineLayer& a = got.layers[i];
        const AffineLayer& b = want.layers[i];
        if (a.W.rows() != b.W.rows() || a.W.cols() != b.W.cols() ||
            a.b.size() != b.b.size())
            throw FormatError("checkpoint " + what + ": layer " +
                              std::to_string(i) + " shape mismatch");
    }
}

void load_all_checkpoints(const std::string& dir, SplitModel& sm) {
    std::uint32_t participant = 0;
    Mlp server = load_checkpoint((fs::path(dir) / "server.ckpt").string(), &participant);
    if (participant != 0)
        throw FormatError("checkpoint server.ckpt: stored participant id " +
                          std::to_string(participant) + ", expected 0");
    check_same_shape(server, sm.server, "server.ckpt");
    sm.server = std::move(server);
    for (std::size_t m = 0; m < sm.clients.size(); ++m) {
        const std::string name = "client" + std::to_string(m + 1) + ".ckpt";
        Mlp c = load_checkpoint((fs::path(dir) / name).string(), &participant);
        if (participant != m + 1)
            throw FormatError("checkpoint " + name + ": stored participant id " +
                              std::to_string(participant) + ", expected " +
                              std::to_string(m + 1));
        check_same_shape(c, sm.clients[m], name);
        sm.clients[m] = std::move(c);
    }
}

ActivationPolicy build_policy(const SweepPoint& pt, std::size_t clients) {
    if (pt.act_kind == "full") return FullPolicy{};
    if (pt.act_kind == "random") {
        RandomPolicy r;
        if (!pt.p_per_client.empty())
            r.probs = pt.p_per_client;
        else
            r.probs = {pt.p};
        (void)clients;
        return r;
    }
    return EventPolicy{pt.gamma};
}

struct PointArtifacts {
    std::vector<std::string> files; // relative to the point directory
};

PointResult run_point(const ExperimentConfig& cfg, const SweepPoint& pt,
                      const Dataset& data, const FeaturePartition& partition,
                      const fs::path& point_dir, PointArtifacts& artifacts) {
    PointResult res;
    res.name = pt.name;

    fs::create_directories(point_dir);

    SplitModel sm = build_models(cfg, partition, data.num_classes);
    if (!cfg.checkpoint_load_dir.empty()) load_all_checkpoints(cfg.checkpoint_load_dir, sm);

    ClassSampler sampler;
    sampler.resample_period = cfg.resample_period;
    SampleStream stream(data, partition, sampler, cfg.seed_data,
                        cfg.dataset.augment_translate);

    // Optional per-message log.
    std::unique_ptr<std::ofstream> events;
    if (cfg.events_log) {
        events = std::make_unique<std::ofstream>(point_dir / "events.csv");
        if (!*events) throw IoError("cannot open events.csv under " + point_dir.string());
        *events << "round,kind,from,to,bytes\n";
    }

    // Optional empirical-regret audit over the full composite gradient.
    std::optional<DlrAccumulator> audit_acc;
    std::vector<std::pair<std::uint64_t, double>> audit_series;
    std::vector<std::uint64_t> audit_marks;
    std::unique_ptr<GradientTrace> trace;
    if (cfg.audit.enabled) {
        audit_acc.emplace(cfg.audit.l, cfg.audit.alpha);
        audit_marks = cfg.audit.checkpoints;
        if (audit_marks.empty()) audit_marks = {cfg.rounds};
        if (cfg.audit.save_trace) trace = std::make_unique<GradientTrace>();
    }

    SessionHooks hooks;
    if (events) {
        hooks.on_message = [&events](const Message& msg) {
            *events << msg.round << ',' << to_string(msg.kind) << ',' << msg.from
                    << ',' << msg.to << ',' << msg.bytes << '\n';
        };
    }
    if (audit_acc) {
        hooks.on_trace = [&](std::uint64_t t, const Vector& g) {
            audit_acc->push(g);
            if (trace) {
                if (trace->dim == 0) trace->dim = g.size();
                trace->grads.push_back(g);
            }
            if (std::find(audit_marks.begin(), audit_marks.end(), t) != audit_marks.end())
                audit_series.emplace_back(t, audit_acc->value());
        };
    }

    Session session(std::move(sm.server), std::move(sm.clients), std::move(stream),
                    build_policy(pt, cfg.clients), cfg.seed_activation, pt.opt,
                    cfg.metrics_window, cfg.count_query_bytes, hooks);

    bool aborted = false;
    try {
        session.run(cfg.rounds);
    } catch (const RuntimeAbort& e) {
        aborted = true;
        res.error = e.what();
    }

    // Honest partial artifacts: whatever the prequential window accumulated is
    // written even when the session aborted mid-run.
    write_runtime_error_csv((point_dir / "runtime_error.csv").string(),
                            session.prequential().series());
    artifacts.files.push_back("runtime_error.csv");
    write_timing_csv((point_dir / "timing.csv").string(), session.timing());
    artifacts.files.push_back("timing.csv");
    if (!aborted) {
        res.summary = session.summary();
        write_summary_csv((point_dir / "summary.csv").string(), res.summary);
        artifacts.files.push_back("summary.csv");
    }
    if (events) {
        events->flush();
        if (!*events) throw IoError("failed writing events.csv under " + point_dir.string());
        artifacts.files.push_back("events.csv");
    }
    if (audit_acc) {
        if (!aborted && (audit_series.empty() || audit_series.back().first != cfg.rounds)) {
            // Guarantee a final point even if checkpoints omitted the horizon.
            if (std::find(audit_marks.begin(), audit_marks.end(), cfg.rounds) ==
                audit_marks.end())
                audit_series.emplace_back(cfg.rounds, audit_acc->value());
        }
        write_series_csv((point_dir / "dlr_series.csv").string(), "dlr", audit_series);
        artifacts.files.push_back("dlr_series.csv");
        if (trace) {
            save_trace((point_dir / "trace.bin").string(), *trace);
            artifacts.files.push_back("trace.bin");
        }
    }
    if (cfg.checkpoint_final && !aborted) {
        save_checkpoint((point_dir / "server.ckpt").string(), 0, session.server());
        artifacts.files.push_back("server.ckpt");
        for (std::size_t m = 0; m < session.clients().size(); ++m) {
            const std::string name = "client" + std::to_string(m + 1) + ".ckpt";
            save_checkpoint((point_dir / name).string(),
                            static_cast<std::uint32_t>(m + 1), session.clients()[m]);
            artifacts.files.push_back(name);
        }
    }

    res.ok = !aborted;
    return res;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

} // namespace

bool ExperimentResult::all_ok() const {
    return std::all_of(points.begin(), points.end(),
                       [](const PointResult& p) { return p.ok; });
}

bool ExperimentResult::any_ok() const {
    return std::any_of(points.begin(), points.end(),
                       [](const PointResult& p) { return p.ok; });
}

int ExperimentResult::exit_code() const {
    if (all_ok()) return 0;
    return any_ok() ? 3 : 2;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg_in,
                                const std::string& output_dir) {
    ExperimentConfig cfg = cfg_in;
    if (!output_dir.empty()) cfg.output_dir = output_dir;

    std::vector<std::string> diags = validate_config(cfg);
    if (!diags.empty()) throw ConfigError(diags);

    const fs::path out(cfg.output_dir);
    fs::create_directories(out);
    {
        std::ofstream rc(out / "resolved_config.json");
        if (!rc) throw IoError("cannot write resolved_config.json under " + out.string());
        rc << serialize_config(cfg) << '\n';
    }

    Dataset data = build_dataset(cfg);
    FeaturePartition partition = equal_partition(data.feature_dim, cfg.clients);

    std::vector<SweepPoint> sweep = expand_sweep(cfg);
    ExperimentResult result;
    result.points.resize(sweep.size());
    std::vector<PointArtifacts> artifacts(sweep.size());

    const std::size_t workers =
        std::min<std::size_t>(std::max<std::size_t>(cfg.parallel, 1), sweep.size());

    std::mutex mu;
    std::size_t next = 0;
    auto work = [&]() {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lk(mu);
                if (next >= sweep.size()) return;
                i = next++;
            }
            const SweepPoint& pt = sweep[i];
            try {
                result.points[i] = run_point(cfg, pt, data, partition,
                                             out / pt.name, artifacts[i]);
            } catch (const Error& e) {
                result.points[i].name = pt.name;
                result.points[i].ok = false;
                result.points[i].error = e.what();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& th : pool) th.join();
    }

    char hash_buf[32];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    const std::string hash = hash_buf;
    std::ofstream mf(out / "manifest.csv");
    if (!mf) throw IoError("cannot write manifest.csv under " + out.string());
    mf << "point,status,error,config_hash,seed_data,seed_init,seed_activation,"
          "rounds,empty_activation_rounds,artifacts\n";
    for (std::size_t i = 0; i < result.points.size(); ++i) {
        const PointResult& p = result.points[i];
        std::string joined;
        for (const std::string& f : artifacts[i].files) {
            if (!joined.empty()) joined += ';';
            joined += f;
        }
        mf << csv_escape(p.name) << ',' << (p.ok ? "ok" : "aborted") << ','
           << csv_escape(p.error) << ',' << hash << ',' << cfg.seed_data << ','
           << cfg.seed_init << ',' << cfg.seed_activation << ','
           << (p.ok ? p.summary.rounds : 0) << ','
           << (p.ok ? p.summary.empty_activation_rounds : 0) << ','
           << csv_escape(joined) << '\n';
    }
    mf.flush();
    if (!mf) throw IoError("failed writing manifest.csv under " + out.string());
    return result;
}

} // namespace evfl
